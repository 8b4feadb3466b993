"""Background diffusions and their spectral machinery.

Two worked diffusions:

* killed geometric Brownian motion -- continuous spectrum, plane-wave
  eigenfunctions indexed by a real frequency;
* jump-to-default CEV (volatility a x^beta, killing rate b + c a^2 x^(2 beta))
  -- purely discrete spectrum with equally spaced eigenvalues and
  Laguerre-polynomial eigenfunctions.

The module evaluates speed densities, eigenfunctions, the Feynman-Kac
transition density p1(t,x,y) (closed forms), the time-changed density

    p_phi(t,x,y) = m(y) sum_lam e^(-phi(lam) t) psi_lam(x) psi_lam(y),

and power moments of the defaultable asset price.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import ConvergenceError
from .subordinator import SubordinatorSpec, laplace_exponent, martingale_rho

__all__ = [
    "GBMSpec",
    "JDCEVSpec",
    "SpectralBasis",
    "speed_density",
    "gbm_eigen",
    "jdcev_eigen",
    "fk_density",
    "subordinated_density",
    "survival_probability",
    "moment_coefficients",
    "pth_moment",
    "save_diffusion_config",
    "load_diffusion_config",
]


# ---------------------------------------------------------------------------
# diffusion specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GBMSpec:
    """Geometric Brownian motion with constant killing rate."""

    sigma: float
    mu: float = 0.0
    k: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.k < 0:
            raise ValueError("killing rate k must be nonnegative")

    @property
    def xi(self) -> float:
        return (self.mu + self.k) / self.sigma - 0.5 * self.sigma

    @property
    def lam_min(self) -> float:
        # bottom of the continuous spectrum
        return 0.5 * self.xi**2 + self.k


@dataclass(frozen=True)
class JDCEVSpec:
    """Jump-to-default CEV: sigma(x) = a x^beta, k(x) = b + c a^2 x^(2 beta)."""

    a: float
    beta: float
    b: float = 0.0
    c: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("volatility scale a must be positive")
        if self.beta >= 0:
            raise ValueError("elasticity beta must be negative")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if self.c < 0.5:
            raise ValueError("c >= 1/2 is required (entrance boundary at zero)")

    @property
    def abs_beta(self) -> float:
        return abs(self.beta)

    @property
    def z_scale(self) -> float:
        """Scale of the Laguerre argument z = z_scale * x^(-2 beta)."""
        if self.mu + self.b == 0:
            raise ValueError("mu + b = 0: spectrum is not purely discrete")
        return abs(self.mu + self.b) / (self.a**2 * self.abs_beta)

    @property
    def drift_sign(self) -> float:
        return math.copysign(1.0, self.mu + self.b)

    @property
    def bessel_order(self) -> float:
        return (1.0 + 2.0 * self.c) / (2.0 * self.abs_beta)

    @property
    def eigen_gap(self) -> float:
        return 2.0 * abs(self.beta * (self.mu + self.b))

    @property
    def lam_first(self) -> float:
        if self.mu + self.b > 0:
            return 2.0 * (self.mu + self.b) * (self.abs_beta + self.c) + self.b
        if self.mu + self.b < 0:
            return abs(self.mu)
        raise ValueError("mu + b = 0: spectrum is not purely discrete")

    def killing_rate(self, x):
        return self.b + self.c * self.a**2 * np.asarray(x, dtype=float) ** (2 * self.beta)

    def local_vol(self, x):
        return self.a * np.asarray(x, dtype=float) ** self.beta


# ---------------------------------------------------------------------------
# speed density (reference point x0 = 1)
# ---------------------------------------------------------------------------

def speed_density(diff, x):
    """Speed density m(x) of the killed generator on (0, inf)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("speed density requires x > 0")
    if isinstance(diff, GBMSpec):
        out = 2.0 / (x * diff.sigma**2) * np.exp(2.0 * diff.xi * np.log(x) / diff.sigma)
    elif isinstance(diff, JDCEVSpec):
        out = (
            2.0 / diff.a**2
            * x ** (2 * diff.c - 2 - 2 * diff.beta)
            * np.exp(diff.drift_sign * diff.z_scale * x ** (-2 * diff.beta))
        )
    else:
        raise TypeError(f"unsupported diffusion {type(diff)!r}")
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# eigenfunctions
# ---------------------------------------------------------------------------

def gbm_eigen(spec: GBMSpec, omega: float, x: float):
    """Continuous-spectrum eigenfunction and eigenvalue of the killed GBM.

    psi_w(x) = sqrt(sigma/4 pi) x^((i w - xi)/sigma),
    lam_w = (w^2 + xi^2)/2 + k.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    psi = math.sqrt(spec.sigma / (4.0 * math.pi)) * np.exp((1j * omega - spec.xi) * math.log(x) / spec.sigma)
    lam = 0.5 * (omega**2 + spec.xi**2) + spec.k
    return psi, lam


def _jdcev_log_norm(spec: JDCEVSpec, n: np.ndarray) -> np.ndarray:
    # normalization making (psi_n, psi_m) = delta_nm under the speed measure
    nu = spec.bessel_order
    loga = math.log(spec.z_scale)
    return 0.5 * (nu * loga + _lgamma_arr(n) + math.log(abs(spec.mu + spec.b)) - _lgamma_arr(nu + n))


def _lgamma_arr(v):
    return np.vectorize(math.lgamma)(np.asarray(v, dtype=float))


def jdcev_eigen(spec: JDCEVSpec, n: int, x: float):
    """n-th (n >= 1) eigenfunction/eigenvalue of the killed JDCEV generator."""
    if n < 1:
        raise ValueError("eigenfunction index n starts at 1")
    if x <= 0:
        raise ValueError("x must be positive")
    if spec.mu + spec.b == 0:
        raise ValueError("mu + b = 0: spectrum is not purely discrete")
    z = spec.z_scale * x ** (-2 * spec.beta)
    log_norm = float(_jdcev_log_norm(spec, np.asarray([float(n)]))[0])
    psi = (
        math.exp(log_norm)
        * x
        * math.exp(-0.5 * (1.0 + spec.drift_sign) * z)
        * specfun.laguerre(n - 1, spec.bessel_order, z)
    )
    lam = spec.eigen_gap * (n - 1) + spec.lam_first
    return psi, lam


class SpectralBasis:
    """Cached eigendata for repeated series evaluation.

    For JDCEV: eigenvalues lam_1..lam_N and a psi-matrix evaluator.
    For GBM: a frequency grid symmetric about zero with trapezoid weights.
    """

    def __init__(self, diff, *, n_max: int | None = None, omega_max: float | None = None, n_nodes: int = 0):
        self.diff = diff
        if isinstance(diff, JDCEVSpec):
            if not n_max or n_max < 1:
                raise ValueError("JDCEV basis needs n_max >= 1")
            self.n_max = n_max
            n = np.arange(1, n_max + 1, dtype=float)
            self.lam = diff.lam_first + diff.eigen_gap * (n - 1)
            self._log_norm = _jdcev_log_norm(diff, n)
        elif isinstance(diff, GBMSpec):
            if omega_max is None or n_nodes < 2:
                raise ValueError("GBM basis needs omega_max and n_nodes")
            self.omega = np.linspace(-omega_max, omega_max, n_nodes)
            self.lam = 0.5 * (self.omega**2 + diff.xi**2) + diff.k
        else:
            raise TypeError(f"unsupported diffusion {type(diff)!r}")

    def psi(self, x) -> np.ndarray:
        """JDCEV eigenfunction matrix, shape (n_max, len(x))."""
        diff = self.diff
        if not isinstance(diff, JDCEVSpec):
            raise TypeError("psi matrix is defined for the discrete (JDCEV) basis")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        tilde = _psi_tilde_block(diff, (np.arange(1, self.n_max + 1, dtype=float), self._log_norm), x)
        return tilde * np.exp(-0.5 * _log_speed_density_jdcev(diff, x))[None, :]


# ---------------------------------------------------------------------------
# Feynman-Kac transition densities (closed forms)
# ---------------------------------------------------------------------------

def fk_density(diff, t: float, x: float, y):
    """Defective transition density p1(t,x,y) of the killed diffusion.

    Extended by zero for y outside (0, inf).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if x <= 0:
        raise ValueError("x must be positive")
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y, dtype=float)
    pos = y > 0
    if isinstance(diff, GBMSpec):
        s, mu, k = diff.sigma, diff.mu, diff.k
        yp = y[pos]
        d = np.log(yp) - math.log(x) - (mu + k - 0.5 * s * s) * t
        out[pos] = math.exp(-k * t) / (yp * s * math.sqrt(2 * math.pi * t)) * np.exp(-d * d / (2 * s * s * t))
    elif isinstance(diff, JDCEVSpec):
        out[pos] = _fk_density_jdcev(diff, t, x, y[pos])
    else:
        raise TypeError(f"unsupported diffusion {type(diff)!r}")
    return float(out) if out.ndim == 0 else out


def _fk_density_jdcev(diff: JDCEVSpec, t: float, x: float, y: np.ndarray) -> np.ndarray:
    A, eps, nu = diff.z_scale, diff.drift_sign, diff.bessel_order
    om, lam1 = diff.eigen_gap, diff.lam_first
    with np.errstate(over="ignore", invalid="ignore"):
        zx = A * x ** (-2 * diff.beta)
        zy = A * y ** (-2 * diff.beta)
        barg = A * (x * y) ** (-diff.beta) / math.sinh(0.5 * om * t)
        log_iv = specfun.log_bessel_i(nu, np.where(np.isfinite(barg), barg, 0.0))
        # log m(y) + remaining prefactors, assembled in log space to survive
        # the large cancelling exponents that appear at small t
        log_m = math.log(2.0 / diff.a**2) + (2 * diff.c - 2 - 2 * diff.beta) * np.log(y) + eps * zy
        log_p = (
            log_m
            + math.log(abs(diff.mu + diff.b))
            + (0.5 - diff.c) * (math.log(x) + np.log(y))
            + 0.5 * om * nu * t
            - lam1 * t
            - math.log(-math.expm1(-om * t))
            + eps * (zx + zy) / math.expm1(-eps * om * t)
            + log_iv
        )
        # points driven out of double range sit where the kernel itself is zero
        out = np.where(np.isfinite(log_p), np.exp(np.where(np.isfinite(log_p), log_p, -np.inf)), 0.0)
    return out


# ---------------------------------------------------------------------------
# subordinated (time-changed) transition density
# ---------------------------------------------------------------------------

def _gbm_omega_cutoff(sub: SubordinatorSpec, diff: GBMSpec, t: float, cutoff: float = 1e-15) -> float:
    # smallest Omega with exp(-phi(lam_Omega) t) below cutoff
    target = -math.log(cutoff)
    omega = 8.0
    for _ in range(40):
        lam = 0.5 * (omega**2 + diff.xi**2) + diff.k
        if laplace_exponent(sub, lam) * t > target:
            return omega
        omega *= 1.6
    raise ConvergenceError(
        "time-changed GBM density: spectral integrand does not decay "
        "(a pure-jump clock leaves an atom at the start point)"
    )


def _gauss_panels(a: float, b: float, n_panels: int, n_gl: int = 16):
    xg, wg = np.polynomial.legendre.leggauss(n_gl)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _subordinated_density_gbm(diff: GBMSpec, sub: SubordinatorSpec, t: float, x: float, y: np.ndarray) -> np.ndarray:
    omega_max = _gbm_omega_cutoff(sub, diff, t)
    delta = (math.log(x) - np.log(y)) / diff.sigma
    freq = max(1.0, float(np.max(np.abs(delta))))
    n_panels = int(min(20000, max(16, math.ceil(omega_max * freq / math.pi))))
    nodes, weights = _gauss_panels(0.0, omega_max, n_panels)
    lam = 0.5 * (nodes**2 + diff.xi**2) + diff.k
    damp = np.exp(-laplace_exponent(sub, lam) * t) * weights
    integral = np.empty_like(delta)
    chunk = max(1, int(4e7 // max(nodes.size, 1)))
    for lo in range(0, delta.size, chunk):
        sl = slice(lo, lo + chunk)
        integral[sl] = np.cos(np.outer(delta[sl], nodes)) @ damp
    pref = np.exp(diff.xi * (np.log(y) - math.log(x)) / diff.sigma) / (math.pi * diff.sigma * y)
    return pref * integral


def _log_speed_density_jdcev(diff: JDCEVSpec, x: np.ndarray) -> np.ndarray:
    z = diff.z_scale * x ** (-2 * diff.beta)
    return math.log(2.0 / diff.a**2) + (2 * diff.c - 2 - 2 * diff.beta) * np.log(x) + diff.drift_sign * z


def _subordinated_density_jdcev(
    diff: JDCEVSpec, sub: SubordinatorSpec, t: float, x: float, y: np.ndarray,
    tol: float, n_cap: int, block: int = 64,
) -> np.ndarray:
    # work with psi-tilde = psi sqrt(m), bounded in the state variable, and
    # stream the Laguerre recurrence so the cost stays linear in the
    # truncation order
    nu = diff.bessel_order
    ratio = np.exp(0.5 * (_log_speed_density_jdcev(diff, y) - _log_speed_density_jdcev(diff, np.asarray([x]))[0]))
    zy = diff.z_scale * y ** (-2 * diff.beta)
    zx = float(diff.z_scale * x ** (-2 * diff.beta))
    env_y = np.exp(0.5 * math.log(2.0 / diff.a**2) + (diff.c - diff.beta) * np.log(y)) * ratio
    env_x = math.exp(0.5 * math.log(2.0 / diff.a**2) + (diff.c - diff.beta) * math.log(x))

    ly_prev, ly = np.zeros_like(y), np.exp(-0.5 * zy)
    lx_prev, lx = 0.0, math.exp(-0.5 * zx)
    log_norm = 0.5 * (0.0 - math.lgamma(nu + 1.0))  # n = 1
    const = diff.z_scale**nu * abs(diff.mu + diff.b)  # squared A^(nu/2) sqrt|mu+b| normalization
    total = np.zeros_like(y, dtype=float)
    block_max = 0.0
    prev_block = math.inf
    for n in range(1, n_cap + 1):
        lam_n = diff.lam_first + diff.eigen_gap * (n - 1)
        damp = math.exp(-float(laplace_exponent(sub, lam_n)) * t)
        scale_n = math.exp(log_norm)
        contrib = (const * damp * scale_n * scale_n * env_x * lx) * (env_y * ly)
        total += contrib
        block_max = max(block_max, float(np.max(np.abs(contrib))))
        if n % block == 0:
            scale = max(float(np.max(np.abs(total))), 1e-300)
            if block_max < tol * scale and block_max <= prev_block:
                return total
            prev_block = block_max
            block_max = 0.0
        # advance L_(n-1) -> L_n (weighted) and the normalization
        m = n - 1
        ly, ly_prev = ((2 * m + 1 + nu - zy) * ly - (m + nu) * ly_prev) / (m + 1), ly
        lx, lx_prev = ((2 * m + 1 + nu - zx) * lx - (m + nu) * lx_prev) / (m + 1), lx
        log_norm += 0.5 * (math.log(n) - math.log(nu + n))
    raise ConvergenceError(f"subordinated density series not converged within {n_cap} terms")


def _block_basis(diff: JDCEVSpec, n_start: int, n_stop: int):
    n = np.arange(n_start, n_stop + 1, dtype=float)
    return n, _jdcev_log_norm(diff, n)


def _psi_tilde_block(diff: JDCEVSpec, basis, x: np.ndarray) -> np.ndarray:
    """psi_n(x) sqrt(m(x)), orthonormal in plain L^2(dy); bounded everywhere."""
    n, log_norm = basis
    z = diff.z_scale * x ** (-2 * diff.beta)
    lag_all = specfun.laguerre_all(int(n[-1]) - 1, diff.bessel_order, z, half_exp_weight=True)
    lag = lag_all[int(n[0]) - 1 :]
    env = np.exp(0.5 * math.log(2.0 / diff.a**2) + (diff.c - diff.beta) * np.log(x))
    return np.exp(log_norm)[:, None] * env[None, :] * lag


def subordinated_density(diff, sub: SubordinatorSpec, t: float, x: float, y, *, tol: float = 1e-10, n_cap: int = 20000):
    """Transition density of the diffusion run on the subordinator's clock.

    JDCEV: adaptively truncated eigenfunction series (raises ConvergenceError
    when the trace-class tail diagnostic fails, e.g. for a driftless clock
    whose Laplace exponent saturates).  GBM: frequency-domain quadrature over
    the continuous spectrum.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if x <= 0:
        raise ValueError("x must be positive")
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros_like(y_arr, dtype=float)
    pos = y_arr > 0
    if isinstance(diff, GBMSpec):
        out[pos] = _subordinated_density_gbm(diff, sub, t, x, y_arr[pos])
    elif isinstance(diff, JDCEVSpec):
        out[pos] = _subordinated_density_jdcev(diff, sub, t, x, y_arr[pos], tol, n_cap)
    else:
        raise TypeError(f"unsupported diffusion {type(diff)!r}")
    return float(out[0]) if np.isscalar(y) else out


# ---------------------------------------------------------------------------
# power moments of the defaultable asset (JDCEV)
# ---------------------------------------------------------------------------

def moment_coefficients(spec: JDCEVSpec, p: float, n_max: int) -> np.ndarray:
    """Expansion coefficients of x^p against the JDCEV eigenbasis.

    ctilde_n = (x^p, psi_n); requires mu + b < 0 and p > 2 (beta - c) for
    the weighted integral to exist.
    """
    if spec.mu + spec.b >= 0:
        raise ValueError("moment expansion requires mu + b < 0")
    if p <= 2 * (spec.beta - spec.c):
        raise ValueError("p must exceed 2 (beta - c)")
    nu = spec.bessel_order
    ab = spec.abs_beta
    b_exp = (p + 2 * spec.c) / (2 * ab)
    q = (1.0 - p) / (2 * ab)
    n = np.arange(1, n_max + 1, dtype=float)
    # rising factorial (q)_(n-1) tracked in log magnitude + sign
    steps = q + np.arange(0, n_max - 1, dtype=float)
    log_steps = np.concatenate(([0.0], np.log(np.abs(steps), where=steps != 0, out=np.full(steps.shape, -np.inf))))
    log_poch = np.cumsum(log_steps)
    sign = np.concatenate(([1.0], np.cumprod(np.sign(steps))))
    const = (
        (0.5 * nu - b_exp) * math.log(spec.z_scale)
        + math.lgamma(b_exp + 1.0)
        - 0.5 * math.log(abs(spec.mu + spec.b))
    )
    log_c = const + log_poch - 0.5 * (_lgamma_arr(n) + _lgamma_arr(nu + n))
    return sign * np.exp(log_c)


def survival_probability(spec: JDCEVSpec, sub: SubordinatorSpec, t: float, x: float, *, tol: float = 1e-10, n_cap: int = 20000) -> float:
    """P(no default by t) under the subordinated JDCEV dynamics."""
    return pth_moment(spec, sub, t, x, 0.0, tol=tol, n_cap=n_cap)


def pth_moment(spec: JDCEVSpec, sub: SubordinatorSpec, t: float, x: float, p: float, *, tol: float = 1e-10, n_cap: int = 20000) -> float:
    """E[(S_t)^p] for the subordinated defaultable JDCEV asset.

    Zero recovery: defaulted paths contribute nothing.  At t = 0 the series
    is evaluated literally; a warning is issued where uniform convergence is
    not guaranteed.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0 and p <= 0.5 * (spec.beta + 1.0) - spec.c:
        warnings.warn(
            "moment series at t=0 is not uniformly convergent for this p; "
            "evaluating the literal truncated series",
            RuntimeWarning,
        )
    rho = martingale_rho(sub, spec.mu) if p != 0.0 else 0.0
    total = 0.0
    prev_block = math.inf
    block = 64
    n_start = 1
    while n_start <= n_cap:
        n_stop = min(n_start + block - 1, n_cap)
        ns = np.arange(n_start, n_stop + 1)
        lam = spec.lam_first + spec.eigen_gap * (ns - 1)
        coeff = moment_coefficients(spec, p, n_stop)[n_start - 1 :]
        basis = _block_basis(spec, n_start, n_stop)
        sqrt_m_x = math.exp(0.5 * _log_speed_density_jdcev(spec, np.asarray([x]))[0])
        psi_x = _psi_tilde_block(spec, basis, np.asarray([x]))[:, 0] / sqrt_m_x
        terms = np.exp(-laplace_exponent(sub, lam) * t) * coeff * psi_x
        total += float(np.sum(terms))
        block_max = float(np.max(np.abs(terms))) if terms.size else 0.0
        scale = max(abs(total), 1e-300)
        if block_max < tol * scale and block_max <= prev_block:
            return math.exp(p * rho * t) * total
        prev_block = block_max
        n_start = n_stop + 1
    raise ConvergenceError(f"moment series not converged within {n_cap} terms")


# ---------------------------------------------------------------------------
# flat key=value config files
# ---------------------------------------------------------------------------

def save_diffusion_config(path, diff) -> None:
    lines = []
    if isinstance(diff, GBMSpec):
        lines = ["model=gbm", f"sigma={diff.sigma:.17g}", f"mu={diff.mu:.17g}", f"k={diff.k:.17g}"]
    elif isinstance(diff, JDCEVSpec):
        lines = [
            "model=jdcev",
            f"a={diff.a:.17g}",
            f"beta={diff.beta:.17g}",
            f"b={diff.b:.17g}",
            f"c={diff.c:.17g}",
            f"mu={diff.mu:.17g}",
        ]
    else:
        raise TypeError(f"unsupported diffusion {type(diff)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_kv_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            if not _:
                raise ValueError(f"malformed config line: {line!r}")
            out[key.strip()] = value.strip()
    return out


def load_diffusion_config(path):
    kv = parse_kv_file(path)
    model = kv.get("model", "").lower()
    if model == "gbm":
        return GBMSpec(sigma=float(kv["sigma"]), mu=float(kv.get("mu", 0.0)), k=float(kv.get("k", 0.0)))
    if model == "jdcev":
        return JDCEVSpec(
            a=float(kv["a"]), beta=float(kv["beta"]), b=float(kv.get("b", 0.0)),
            c=float(kv.get("c", 1.0)), mu=float(kv.get("mu", 0.0)),
        )
    raise ValueError(f"unknown model {model!r} in {path}")
