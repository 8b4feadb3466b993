"""Levy subordinator specifications and their Laplace exponents.

A subordinator is described by a nonnegative drift plus a jump (Levy)
measure on (0, inf).  Supported measures: compound Poisson with
exponential jumps, Gamma, inverse Gaussian, a tabulated finite-activity
density, or no jumps at all.  The module provides the Laplace exponent

    phi(lam) = gamma * lam + int (1 - e^(-lam s)) nu(ds),

the admissible exponential-moment set, the martingale scaling
rho = phi(-mu), and exact increment sampling for the Monte Carlo oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

__all__ = [
    "CompoundPoissonExp",
    "GammaJumps",
    "InverseGaussianJumps",
    "TabulatedLevy",
    "SubordinatorSpec",
    "MomentSet",
    "moment_set",
    "laplace_exponent",
    "is_in_I",
    "martingale_rho",
    "sample_increment",
    "levy_mean",
    "levy_second_moment",
    "exp_weighted_integral",
    "identity_subordinator",
    "read_levy_csv",
    "write_levy_csv",
]


# ---------------------------------------------------------------------------
# jump measure families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompoundPoissonExp:
    """Finite-activity jumps: intensity alpha, sizes Exp(eta)."""

    alpha: float
    eta: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("jump intensity alpha must be nonnegative")
        if self.eta <= 0:
            raise ValueError("exponential rate eta must be positive")

    # sup of the exponential-moment set
    def upper(self) -> float:
        return self.eta

    def jump_laplace(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= -self.eta):
            raise DivergenceError("Laplace exponent diverges for lam <= -eta")
        return self.alpha * lam / (lam + self.eta)

    def mean(self) -> float:
        return self.alpha / self.eta

    def second_moment(self) -> float:
        return 2.0 * self.alpha / self.eta**2

    def exp_weighted(self, lam: float, xi2: float) -> float:
        # int e^(-lam s) (s + s^2 xi2) nu(ds), closed form
        c = lam + self.eta
        if c <= 0:
            raise DivergenceError("exp-weighted jump integral diverges")
        return self.alpha * self.eta * (1.0 / c**2 + 2.0 * xi2 / c**3)

    def sample(self, dt: float, rng: np.random.Generator, size: int):
        counts = rng.poisson(self.alpha * dt, size=size)
        # Gamma(k, 1/eta) sums k exponential jumps; Gamma(0, .) == 0
        return rng.gamma(shape=counts, scale=1.0 / self.eta)


@dataclass(frozen=True)
class GammaJumps:
    """Gamma subordinator jumps: nu(ds) = shape * s^-1 e^(-rate s) ds."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("shape and rate must be positive")

    def upper(self) -> float:
        return self.rate

    def jump_laplace(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= -self.rate):
            raise DivergenceError("Laplace exponent diverges for lam <= -rate")
        return self.shape * np.log1p(lam / self.rate)

    def mean(self) -> float:
        return self.shape / self.rate

    def second_moment(self) -> float:
        return self.shape / self.rate**2

    def exp_weighted(self, lam: float, xi2: float) -> float:
        c = lam + self.rate
        if c <= 0:
            raise DivergenceError("exp-weighted jump integral diverges")
        return self.shape * (1.0 / c + xi2 / c**2)

    def sample(self, dt: float, rng: np.random.Generator, size: int):
        return rng.gamma(shape=self.shape * dt, scale=1.0 / self.rate, size=size)


@dataclass(frozen=True)
class InverseGaussianJumps:
    """IG subordinator jumps: nu(ds) = delta/sqrt(2 pi) s^-3/2 e^(-theta^2 s / 2) ds."""

    delta: float
    theta: float

    def __post_init__(self):
        if self.delta <= 0 or self.theta <= 0:
            raise ValueError("delta and theta must be positive")

    def upper(self) -> float:
        return 0.5 * self.theta**2

    def jump_laplace(self, lam):
        lam = np.asarray(lam, dtype=float)
        arg = self.theta**2 + 2.0 * lam
        if np.any(arg < 0):
            raise DivergenceError("Laplace exponent diverges for lam < -theta^2/2")
        return self.delta * (np.sqrt(arg) - self.theta)

    def mean(self) -> float:
        return self.delta / self.theta

    def second_moment(self) -> float:
        return self.delta / self.theta**3

    def exp_weighted(self, lam: float, xi2: float) -> float:
        c = lam + 0.5 * self.theta**2
        if c <= 0:
            raise DivergenceError("exp-weighted jump integral diverges")
        return self.delta / math.sqrt(2.0) * (c**-0.5 + 0.5 * xi2 * c**-1.5)

    def sample(self, dt: float, rng: np.random.Generator, size: int):
        mean = self.delta * dt / self.theta
        return rng.wald(mean, (self.delta * dt) ** 2, size=size)


@dataclass(frozen=True)
class TabulatedLevy:
    """Finite-activity jump density tabulated on a strictly increasing grid.

    The density is interpreted as supported on [s[0], s[-1]] and integrated
    by the trapezoid rule; infinite-activity input cannot be represented.
    """

    s: np.ndarray
    density: np.ndarray
    _mass: float = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        g = np.asarray(self.density, dtype=float)
        if s.ndim != 1 or s.size < 2 or s.shape != g.shape:
            raise ValueError("need matching 1-d grids with at least two points")
        if s[0] <= 0 or np.any(np.diff(s) <= 0):
            raise ValueError("jump-size grid must be strictly increasing and positive")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("density must be finite and nonnegative")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "density", g)
        object.__setattr__(self, "_mass", float(np.trapezoid(g, s)))
        if not math.isfinite(self._mass):
            raise ValueError("tabulated measure must have finite total mass")

    def upper(self) -> float:
        return math.inf  # compact support: all exponential moments finite

    def total_mass(self) -> float:
        return self._mass

    def jump_laplace(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        vals = np.trapezoid((1.0 - np.exp(-lam[:, None] * self.s[None, :])) * self.density[None, :], self.s, axis=1)
        return vals if vals.size > 1 else float(vals[0])

    def mean(self) -> float:
        return float(np.trapezoid(self.s * self.density, self.s))

    def second_moment(self) -> float:
        return float(np.trapezoid(self.s**2 * self.density, self.s))

    def exp_weighted(self, lam: float, xi2: float) -> float:
        w = np.exp(-lam * self.s) * (self.s + self.s**2 * xi2) * self.density
        return float(np.trapezoid(w, self.s))

    def sample(self, dt: float, rng: np.random.Generator, size: int):
        if self._mass == 0.0:
            return np.zeros(size)
        counts = rng.poisson(self._mass * dt, size=size)
        total = int(counts.sum())
        out = np.zeros(size)
        if total:
            # inverse-CDF draw from the normalized trapezoid CDF
            cdf = np.concatenate(([0.0], np.cumsum(0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.s))))
            cdf /= cdf[-1]
            u = rng.random(total)
            draws = np.interp(u, cdf, self.s)
            np.add.at(out, np.repeat(np.arange(size), counts), draws)
        return out


# union of the measure families accepted by SubordinatorSpec
_MEASURES = (CompoundPoissonExp, GammaJumps, InverseGaussianJumps, TabulatedLevy)


@dataclass(frozen=True)
class SubordinatorSpec:
    """Drift plus optional jump measure; levy_measure None means pure drift."""

    gamma: float
    levy_measure: object = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("drift gamma must be nonnegative")
        if self.levy_measure is not None and not isinstance(self.levy_measure, _MEASURES):
            raise ValueError(f"unsupported Levy measure type {type(self.levy_measure)!r}")
        if self.gamma == 0 and self.levy_measure is None:
            raise ValueError("the zero subordinator (gamma=0, no jumps) is not allowed")


def identity_subordinator() -> SubordinatorSpec:
    """The deterministic clock T_t = t, i.e. phi(lam) = lam."""
    return SubordinatorSpec(gamma=1.0, levy_measure=None)


# ---------------------------------------------------------------------------
# Laplace exponent, moment set, martingale scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSet:
    """The set of lam with int_[1,inf) e^(lam s) nu(ds) < inf, as (-inf, upper)."""

    upper: float

    def contains(self, lam: float) -> bool:
        # boundary points are excluded: the defining integral diverges there
        # for the exponential-tail families
        return lam < self.upper


def moment_set(spec: SubordinatorSpec) -> MomentSet:
    if spec.levy_measure is None:
        return MomentSet(upper=math.inf)
    return MomentSet(upper=spec.levy_measure.upper())


def is_in_I(spec: SubordinatorSpec, lam: float) -> bool:
    """Whether e^(lam s) is nu-integrable on [1, inf)."""
    return moment_set(spec).contains(lam)


def laplace_exponent(spec: SubordinatorSpec, lam):
    """phi(lam) = gamma lam + int (1 - e^(-lam s)) nu(ds).

    Accepts scalars or arrays.  Raises DivergenceError when lam is below the
    convergence threshold of the jump integral.
    """
    lam_arr = np.asarray(lam, dtype=float)
    out = spec.gamma * lam_arr
    if spec.levy_measure is not None:
        out = out + spec.levy_measure.jump_laplace(lam_arr)
    return float(out) if np.isscalar(lam) else out


def martingale_rho(spec: SubordinatorSpec, mu: float) -> float:
    """Scaling rho = phi(-mu) that makes the asset price a martingale."""
    if not is_in_I(spec, mu):
        raise ValueError(f"mu={mu} lies outside the admissible moment set")
    return float(laplace_exponent(spec, -mu))


def levy_mean(spec: SubordinatorSpec) -> float:
    """E[T_1] = gamma + int s nu(ds)."""
    m = spec.gamma
    if spec.levy_measure is not None:
        m += spec.levy_measure.mean()
    return m


def levy_second_moment(spec: SubordinatorSpec) -> float:
    """Var[T_1] = int s^2 nu(ds)."""
    return spec.levy_measure.second_moment() if spec.levy_measure is not None else 0.0


def exp_weighted_integral(spec: SubordinatorSpec, lam: float, xi2: float) -> float:
    """int e^(-lam s) (s + s^2 xi2) nu(ds); zero for a driftless measure-free spec."""
    if spec.levy_measure is None:
        return 0.0
    return spec.levy_measure.exp_weighted(lam, xi2)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_increment(spec: SubordinatorSpec, dt: float, rng: np.random.Generator, size: int | None = None):
    """Draw T_(t+dt) - T_t; exact for every supported family.

    With size=None a single float is returned, otherwise an array.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = 1 if size is None else int(size)
    out = np.full(n, spec.gamma * dt)
    if spec.levy_measure is not None:
        out = out + spec.levy_measure.sample(dt, rng, n)
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# tabulated-measure CSV interface
# ---------------------------------------------------------------------------

_LEVY_HEADER = "# subvar-csv v1 levy-measure"


def write_levy_csv(path, tab: TabulatedLevy) -> None:
    with open(path, "w") as fh:
        fh.write(_LEVY_HEADER + "\n")
        fh.write("s,density\n")
        for s, g in zip(tab.s, tab.density):
            fh.write(f"{s:.17g},{g:.17g}\n")


def read_levy_csv(path) -> TabulatedLevy:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("s,"):
                continue
            a, b = line.split(",")
            rows.append((float(a), float(b)))
    if not rows:
        raise ValueError(f"no data rows in {path}")
    arr = np.asarray(rows)
    return TabulatedLevy(s=arr[:, 0], density=arr[:, 1])
