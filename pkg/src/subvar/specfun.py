"""Special functions used by the spectral expansions.

Generalized Laguerre polynomials, modified Bessel I, digamma/trigamma,
rising Pochhammer symbols, and the log-weighted Laguerre integrals

    Theta^d_n(alpha) = int_0^inf z^(alpha-1) e^(-z) log^d(z) L_n^nu(z) dz,

which appear in the coefficient algebra of the discrete-spectrum variance
swap series.  Everything here is real-valued, pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

__all__ = [
    "SpecFunConfig",
    "DEFAULT_CONFIG",
    "laguerre",
    "laguerre_all",
    "bessel_i",
    "log_bessel_i",
    "digamma",
    "trigamma",
    "pochhammer_rising",
    "theta",
]


@dataclass(frozen=True)
class SpecFunConfig:
    """Truncation control for the series evaluations."""

    series_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_CONFIG = SpecFunConfig()


# ---------------------------------------------------------------------------
# generalized Laguerre polynomials
# ---------------------------------------------------------------------------

def _laguerre_series(n: int, nu: float, z):
    # direct finite sum; adequate for small degree where no deep cancellation
    # occurs, and cheaper than the recurrence for vector z
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    # term_k = (-1)^k binom(n+nu, n-k) z^k / k!, built by ratio updates
    term = np.full_like(z, math.exp(math.lgamma(nu + n + 1) - math.lgamma(nu + 1) - math.lgamma(n + 1)))
    total += term
    for k in range(1, n + 1):
        term = term * (-(n - k + 1) * z) / (k * (nu + k))
        total += term
    return total


def _laguerre_recurrence(n: int, nu: float, z):
    z = np.asarray(z, dtype=float)
    lm1 = np.ones_like(z)
    if n == 0:
        return lm1
    lm = 1.0 + nu - z
    for m in range(1, n):
        lm, lm1 = ((2 * m + 1 + nu - z) * lm - (m + nu) * lm1) / (m + 1), lm
    return lm


def laguerre(n: int, nu: float, z, config: SpecFunConfig = DEFAULT_CONFIG):
    """Generalized Laguerre polynomial L_n^nu(z).

    Direct series for n <= 20, three-term recurrence otherwise.  nu must
    exceed -1 for the weight x^nu e^(-x) to be integrable.
    """
    if n < 0:
        raise ValueError("degree n must be nonnegative")
    if nu <= -1:
        raise ValueError("order nu must exceed -1")
    scalar = np.isscalar(z)
    out = _laguerre_series(n, nu, z) if n <= 20 else _laguerre_recurrence(n, nu, z)
    return float(out) if scalar else out


def laguerre_all(nmax: int, nu: float, z, *, half_exp_weight: bool = False) -> np.ndarray:
    """All of L_0^nu(z) .. L_nmax^nu(z) by the recurrence.

    Returns an array of shape (nmax+1,) + shape(z); used by the spectral
    series, which need every order at once.  With half_exp_weight the
    recurrence runs on e^(-z/2) L_n^nu(z), which stays bounded where the bare
    polynomials overflow (their magnitude grows like e^(z/2)).
    """
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    if nu <= -1:
        raise ValueError("order nu must exceed -1")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = np.exp(-0.5 * z) if half_exp_weight else 1.0
    if nmax >= 1:
        out[1] = (1.0 + nu - z) * out[0]
    for m in range(1, nmax):
        out[m + 1] = ((2 * m + 1 + nu - z) * out[m] - (m + nu) * out[m - 1]) / (m + 1)
    return out


# ---------------------------------------------------------------------------
# modified Bessel function I_nu
# ---------------------------------------------------------------------------

def _bessel_i_ascending(nu: float, z: float, config: SpecFunConfig) -> float:
    # all terms positive: no cancellation at any z, only term count grows
    q = 0.25 * z * z
    term = math.exp(nu * math.log(z / 2.0) - math.lgamma(nu + 1.0)) if z > 0 else (1.0 if nu == 0 else 0.0)
    total = term
    for k in range(1, config.max_terms):
        term *= q / (k * (nu + k))
        total += term
        if term < config.series_tol * total:
            return total
    raise ConvergenceError(f"bessel_i series did not converge for nu={nu}, z={z}")


def _bessel_i_asymptotic(nu: float, z: float, config: SpecFunConfig) -> tuple[float, float]:
    # returns (log prefactor, series sum) for I_nu(z) ~ e^z/sqrt(2 pi z) * sum
    mu4 = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    prev = math.inf
    for k in range(1, 60):
        term *= -(mu4 - (2 * k - 1) ** 2) / (8.0 * k * z)
        if abs(term) >= prev:
            break  # optimal truncation reached
        total += term
        prev = abs(term)
        if abs(term) < config.series_tol * abs(total):
            break
    return z - 0.5 * math.log(2.0 * math.pi * z), total


def bessel_i(nu: float, z: float, config: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Modified Bessel function I_nu(z) for nu >= 0, z >= 0.

    Ascending series for small/moderate z, large-argument asymptotic
    expansion beyond; relative accuracy ~1e-13 on z in [0, 700].
    """
    if nu < 0:
        raise ValueError("order nu must be nonnegative")
    if z < 0:
        raise ValueError("argument z must be nonnegative")
    if z == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if z > 709.0:
        raise OverflowError(f"I_nu({z}) exceeds double range")
    if z < max(60.0, 4.0 * nu * nu):
        return _bessel_i_ascending(nu, z, config)
    logpre, s = _bessel_i_asymptotic(nu, z, config)
    return math.exp(logpre) * s


def log_bessel_i(nu: float, z, config: SpecFunConfig = DEFAULT_CONFIG):
    """log I_nu(z) for scalar or array z; safe where I_nu itself overflows."""
    scalar = np.isscalar(z)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0):
        raise ValueError("argument z must be nonnegative")
    out = np.empty_like(z)
    small = z < max(60.0, 4.0 * nu * nu)

    zs = z[small]
    if zs.size:
        q = 0.25 * zs * zs
        with np.errstate(divide="ignore"):
            logpref = np.where(zs > 0, nu * np.log(zs / 2.0), 0.0) - math.lgamma(nu + 1.0)
        term = np.ones_like(zs)
        total = np.ones_like(zs)
        for k in range(1, config.max_terms):
            term = term * q / (k * (nu + k))
            total += term
            if np.all(term < config.series_tol * total):
                break
        else:
            raise ConvergenceError("log_bessel_i series did not converge")
        res = logpref + np.log(total)
        res[zs == 0.0] = 0.0 if nu == 0.0 else -math.inf
        out[small] = res

    zl = z[~small]
    if zl.size:
        # terms decay from the first for z >= max(60, 4 nu^2); fixed-order sweep
        mu4 = 4.0 * nu * nu
        term = np.ones_like(zl)
        total = np.ones_like(zl)
        for k in range(1, 60):
            term = term * (-(mu4 - (2 * k - 1) ** 2) / (8.0 * k)) / zl
            total += term
            if np.all(np.abs(term) < config.series_tol * np.abs(total)):
                break
        out[~small] = zl - 0.5 * np.log(2.0 * math.pi * zl) + np.log(total)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# digamma / trigamma
# ---------------------------------------------------------------------------

# Bernoulli numbers B_2 .. B_14
_BERN = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0)


def digamma(x: float) -> float:
    """psi(x) for x > 0 via upward recurrence plus asymptotic expansion."""
    if x <= 0:
        raise ValueError("digamma requires x > 0")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    s = math.log(x) - 0.5 / x
    p = inv2
    for j, b in enumerate(_BERN, start=1):
        s -= b * p / (2 * j)
        p *= inv2
    return acc + s


def trigamma(x: float) -> float:
    """psi'(x) for x > 0."""
    if x <= 0:
        raise ValueError("trigamma requires x > 0")
    acc = 0.0
    while x < 10.0:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    s = inv + 0.5 * inv2
    p = inv * inv2
    for b in _BERN:
        s += b * p
        p *= inv2
    return acc + s


# ---------------------------------------------------------------------------
# Pochhammer (rising factorial)
# ---------------------------------------------------------------------------

def pochhammer_rising(z: float, n: int) -> float:
    """Rising factorial (z)_n = z (z+1) ... (z+n-1), with (z)_0 = 1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    if z > 0 and n > 64:
        # gamma-ratio path keeps the rounding error independent of n
        return math.exp(math.lgamma(z + n) - math.lgamma(z))
    out = 1.0
    for j in range(n):
        out *= z + j
    return out


# ---------------------------------------------------------------------------
# log-weighted Laguerre integrals
# ---------------------------------------------------------------------------

def _harmonic(m: int) -> float:
    return sum(1.0 / j for j in range(1, m + 1))


def theta(delta: int, n: int, alpha: float, nu: float) -> float:
    """Theta^delta_n(alpha) = int_0^inf z^(alpha-1) e^(-z) log^delta(z) L_n^nu(z) dz.

    Closed form via derivatives of G(alpha) = Gamma(alpha) (1+nu-alpha)_n / n!.
    When alpha - nu - 1 is a nonnegative integer k < n the Pochhammer factor
    vanishes against a pole of the bracket; the analytic limit is used there.
    """
    if delta not in (1, 2):
        raise ValueError("delta must be 1 or 2")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")

    offset = alpha - nu - 1.0
    k = int(round(offset))
    if abs(offset - k) < 1e-9 and 0 <= k < n:
        # limit branch: single vanishing factor in (1+nu-alpha)_n
        base = math.exp(math.lgamma(alpha) + math.lgamma(k + 1) + math.lgamma(n - k) - math.lgamma(n + 1))
        sgn = -1.0 if k % 2 else 1.0
        if delta == 1:
            return -sgn * base
        return 2.0 * sgn * base * (_harmonic(n - k - 1) - _harmonic(k) - digamma(alpha))

    poch = pochhammer_rising(1.0 + nu - alpha, n)
    gam = math.exp(math.lgamma(alpha))
    b1 = digamma(alpha) - sum(1.0 / (p - alpha + nu) for p in range(1, n + 1))
    pref = poch * gam / math.exp(math.lgamma(n + 1))
    if delta == 1:
        return pref * b1
    b2 = trigamma(alpha) - sum(1.0 / (p - alpha + nu) ** 2 for p in range(1, n + 1))
    return pref * (b1 * b1 + b2)
