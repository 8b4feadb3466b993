"""Market-implied business clock from a volatility smile.

Pipeline: discrete option quotes -> arbitrage-consistent call curve (SVI on
total implied variance) -> risk-neutral density -> projection onto the
background diffusion's eigenfunctions, giving samples of the clock's Laplace
exponent phi(lam) -> drift / jump-intensity / jump-law decomposition ->
numerical Laplace inversion back to a tabulated jump measure ready for
pricing.

The projection integral is evaluated after integrating by parts twice, so
all differentiation lands on the (analytic) eigenfunctions rather than on
the interpolated call prices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares, nnls

from .errors import ArbitrageError, FitError, InstabilityError
from .spectral import GBMSpec
from .subordinator import SubordinatorSpec, TabulatedLevy

__all__ = [
    "OptionQuote",
    "CallCurve",
    "PhiSamples",
    "SubordinatorEstimate",
    "svi_fit",
    "rn_density",
    "extract_phi",
    "decompose_cp",
    "tail_transform",
    "invert_laplace",
    "to_levy",
    "killed_gbm_call",
    "implied_total_variance",
    "read_quotes_csv",
    "write_quotes_csv",
    "write_phi_csv",
    "read_phi_csv",
    "write_table_csv",
    "read_table_csv",
]


# ---------------------------------------------------------------------------
# quotes and Black-Scholes helpers (zero rates throughout)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptionQuote:
    strike: float
    mid: float
    kind: str  # "call" | "put"
    tenor: float
    spot: float

    def __post_init__(self):
        if self.strike <= 0 or self.spot <= 0 or self.tenor <= 0:
            raise ValueError("strike, spot and tenor must be positive")
        if self.kind not in ("call", "put"):
            raise ValueError("kind must be 'call' or 'put'")
        if self.mid < 0:
            raise ValueError("mid must be nonnegative")
        if self.kind == "call" and self.mid > self.spot + 1e-12:
            raise ValueError("call mid cannot exceed spot")
        if self.kind == "put" and self.mid > self.strike + 1e-12:
            raise ValueError("put mid cannot exceed strike")

    def as_call_mid(self) -> float:
        """Convert to a call price via put-call parity (zero rates)."""
        if self.kind == "call":
            return self.mid
        return self.mid + self.spot - self.strike


def _ncdf(z):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(z, dtype=float) / math.sqrt(2.0)))


def _npdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def bs_call(spot: float, strike, total_var):
    """Black-Scholes call with total variance w = sigma^2 t, zero rates."""
    strike = np.asarray(strike, dtype=float)
    w = np.asarray(total_var, dtype=float)
    k = np.log(strike / spot)
    sq = np.sqrt(np.maximum(w, 1e-300))
    d1 = -k / sq + 0.5 * sq
    d2 = d1 - sq
    out = spot * _ncdf(d1) - strike * _ncdf(d2)
    return np.where(w <= 0, np.maximum(spot - strike, 0.0), out)


def implied_total_variance(price: float, spot: float, strike: float) -> float:
    """Invert the zero-rate Black-Scholes price to total implied variance."""
    intrinsic = max(spot - strike, 0.0)
    if price <= intrinsic + 1e-14 * spot:
        return 0.0
    if price >= spot:
        raise ValueError("call price at or above spot has no implied variance")
    f = lambda w: float(bs_call(spot, strike, w)) - price
    return brentq(f, 1e-14, 100.0, xtol=1e-16, rtol=1e-14)


def killed_gbm_call(diff: GBMSpec, t: float, x: float, strike) -> np.ndarray:
    """Call price under killed GBM with no time change (jump-to-default Black)."""
    strike = np.asarray(strike, dtype=float)
    rho = -diff.mu  # identity clock: phi(-mu) = -mu
    fwd = x * math.exp((diff.mu + diff.k) * t)
    w = diff.sigma**2 * t
    sq = math.sqrt(w)
    d1 = (np.log(fwd / strike) + 0.5 * w) / sq
    d2 = d1 - sq
    return math.exp((rho - diff.k - diff.mu) * t) * (fwd * _ncdf(d1) - strike * _ncdf(d2))


# ---------------------------------------------------------------------------
# SVI call curve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CallCurve:
    """Total-variance smile w(k) = a + b (rho (k-m) + sqrt((k-m)^2 + s^2))."""

    tenor: float
    spot: float
    a: float
    b: float
    rho: float
    m: float
    s: float
    fit_report: dict = field(default_factory=dict, compare=False)

    def total_variance(self, k):
        k = np.asarray(k, dtype=float)
        return self.a + self.b * (self.rho * (k - self.m) + np.sqrt((k - self.m) ** 2 + self.s**2))

    def _w_derivs(self, k):
        k = np.asarray(k, dtype=float)
        r = np.sqrt((k - self.m) ** 2 + self.s**2)
        w1 = self.b * (self.rho + (k - self.m) / r)
        w2 = self.b * self.s**2 / r**3
        return self.total_variance(k), w1, w2

    def call_price(self, strike):
        k = np.log(np.asarray(strike, dtype=float) / self.spot)
        return bs_call(self.spot, strike, self.total_variance(k))

    def call_slope(self, strike):
        """dC/dK along the smile (total-variance chain rule included)."""
        strike = np.asarray(strike, dtype=float)
        k = np.log(strike / self.spot)
        w, w1, _ = self._w_derivs(k)
        sq = np.sqrt(w)
        d2 = -k / sq - 0.5 * sq
        return _npdf(d2) * w1 / (2.0 * sq) - _ncdf(d2)

    def butterfly(self, k):
        """Density-positivity function g(k); negative values mean arbitrage."""
        w, w1, w2 = self._w_derivs(k)
        return (1.0 - k * w1 / (2.0 * w)) ** 2 - 0.25 * w1**2 * (1.0 / w + 0.25) + 0.5 * w2

    def density(self, strike):
        """Risk-neutral density d^2 C / dK^2 at the given strikes."""
        strike = np.asarray(strike, dtype=float)
        k = np.log(strike / self.spot)
        w, w1, _ = self._w_derivs(k)
        g = self.butterfly(k)
        sq = np.sqrt(w)
        d2 = -k / sq - 0.5 * sq
        return g * _npdf(d2) / (strike * sq)


def svi_fit(quotes: list[OptionQuote], *, k_check: tuple[float, float] = (-3.2, 3.2)) -> CallCurve:
    """Least-squares SVI fit on total implied variance.

    Quotes are converted to calls by parity first.  The fitted curve is
    rejected if it prices butterflies negatively on a dense log-moneyness
    grid spanning the extraction window.
    """
    if not quotes:
        raise FitError("no quotes supplied")
    tenor = quotes[0].tenor
    spot = quotes[0].spot
    strikes = np.array([q.strike for q in quotes])
    if len(np.unique(strikes)) < 5:
        raise FitError("need at least 5 distinct strikes for an SVI fit")
    if any(abs(q.tenor - tenor) > 1e-12 or abs(q.spot - spot) > 1e-12 for q in quotes):
        raise FitError("all quotes must share one tenor and spot")

    k = np.log(strikes / spot)
    w = np.array([implied_total_variance(q.as_call_mid(), spot, q.strike) for q in quotes])
    if np.any(w <= 0):
        raise FitError("a quote has no time value; cannot imply variance")

    kg = np.linspace(k_check[0], k_check[1], 241)

    def resid(p):
        curve = CallCurve(tenor, spot, *p)
        pen = np.maximum(0.0, -(curve.butterfly(kg) - 1e-6))
        return np.concatenate([curve.total_variance(k) - w, 2e3 * pen])

    wmax, wmin = float(np.max(w)), float(np.min(w))
    lo = [1e-12, 1e-12, -0.999, float(np.min(k)) - 1.0, 1e-5]
    hi = [2.0 * wmax + 1e-3, 10.0, 0.999, float(np.max(k)) + 1.0, 5.0]
    best = None
    for rho0 in (-0.6, 0.0, 0.6):
        p0 = np.array([
            max(0.5 * wmin, 1e-8),
            max((wmax - wmin) / (np.ptp(k) + 0.1), 1e-6),
            rho0,
            float(k[np.argmin(w)]),
            0.1,
        ])
        p0 = np.clip(p0, lo, hi)
        try:
            res = least_squares(resid, p0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, max_nfev=4000)
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("SVI optimization failed for every start")

    curve = CallCurve(tenor, spot, *best.x)
    gmin = float(np.min(curve.butterfly(kg)))
    if gmin < -1e-9:
        raise ArbitrageError(f"fitted smile admits butterfly arbitrage (min g = {gmin:.2e})")
    model = curve.call_price(strikes)
    mids = np.array([q.as_call_mid() for q in quotes])
    report = {
        "max_abs_price_error": float(np.max(np.abs(model - mids))),
        "rms_w_error": float(np.sqrt(np.mean((curve.total_variance(k) - w) ** 2))),
        "min_butterfly": gmin,
    }
    return CallCurve(tenor, spot, *best.x, fit_report=report)


def rn_density(curve: CallCurve, strike):
    """Risk-neutral density of the terminal price at the given strikes."""
    out = curve.density(strike)
    if np.any(out < -1e-12):
        raise ArbitrageError("negative risk-neutral density: butterfly arbitrage in the curve")
    return np.maximum(out, 0.0) if np.ndim(out) else float(max(out, 0.0))


# ---------------------------------------------------------------------------
# Laplace-exponent extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiSamples:
    """Sampled Laplace exponent of the implied clock on a spectral grid."""

    lam: np.ndarray
    phi: np.ndarray  # complex; real part is the estimate, imaginary part a misfit diagnostic
    real_part_policy: str = "real part used downstream; imaginary part diagnostic"
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def re(self) -> np.ndarray:
        return np.real(self.phi)

    @property
    def im(self) -> np.ndarray:
        return np.imag(self.phi)


def _pava_nondecreasing(v: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto nondecreasing sequences."""
    vals = list(map(float, v))
    weights = [1.0] * len(vals)
    out_v, out_w = [], []
    for val, wt in zip(vals, weights):
        out_v.append(val)
        out_w.append(wt)
        while len(out_v) > 1 and out_v[-2] > out_v[-1]:
            v2, w2 = out_v.pop(), out_w.pop()
            v1, w1 = out_v.pop(), out_w.pop()
            out_v.append((v1 * w1 + v2 * w2) / (w1 + w2))
            out_w.append(w1 + w2)
    res = np.empty(len(vals))
    i = 0
    for val, wt in zip(out_v, out_w):
        n = int(round(wt))
        res[i:i + n] = val
        i += n
    return res


def _strike_panels(spot: float, lo_frac: float, hi_frac: float, n_panels: int = 40, n_gl: int = 50):
    xg, wg = np.polynomial.legendre.leggauss(n_gl)
    edges = np.geomspace(spot * lo_frac, spot * hi_frac, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


class _PartsIntegrator:
    """J(q) = int dKK^2-derivative-of-C times K^q dK, by double integration by parts.

    J(q) = [C'(K) K^q - q C(K) K^(q-1)]_lo^hi + q (q - 1) int C(K) K^(q-2) dK,
    with C and C' analytic from the SVI curve.
    """

    def __init__(self, curve: CallCurve, lo_frac: float = 1 / 20, hi_frac: float = 20.0):
        self.curve = curve
        self.k_nodes, self.k_weights = _strike_panels(curve.spot, lo_frac, hi_frac)
        self.c_nodes = np.asarray(curve.call_price(self.k_nodes))
        self.lo = float(self.k_nodes[0] - 0.0) if False else curve.spot * lo_frac
        self.hi = curve.spot * hi_frac
        self.c_lo = float(curve.call_price(self.lo))
        self.c_hi = float(curve.call_price(self.hi))
        self.dc_lo = float(curve.call_slope(self.lo))
        self.dc_hi = float(curve.call_slope(self.hi))
        self.log_nodes = np.log(self.k_nodes)

    def __call__(self, q: complex) -> complex:
        lo, hi = self.lo, self.hi
        boundary = (
            self.dc_hi * hi**q - q * self.c_hi * hi ** (q - 1)
            - self.dc_lo * lo**q + q * self.c_lo * lo ** (q - 1)
        )
        integrand = self.c_nodes * np.exp((q - 2.0) * self.log_nodes)
        return boundary + q * (q - 1.0) * complex(np.sum(self.k_weights * integrand))


def extract_phi(
    curve: CallCurve,
    diff: GBMSpec,
    lambda_grid: np.ndarray | None = None,
    *,
    lambda_max: float = 200.0,
    n_nodes: int = 200,
    monotone_projection: bool = True,
) -> PhiSamples:
    """Sample the implied clock's Laplace exponent on the spectral grid.

    The frequency grid is uniform; eigenvalues follow the dispersion
    lam = (omega^2 + xi^2)/2 + k of the killed-GBM background.  The strike
    integral uses the integrated-by-parts form, so only the smile curve and
    its analytic first derivative enter.
    """
    t = curve.tenor
    x = curve.spot
    sigma, xi, kill = diff.sigma, diff.xi, diff.k

    if lambda_grid is not None:
        lam = np.asarray(lambda_grid, dtype=float)
        if np.any(lam < diff.lam_min - 1e-12):
            raise ValueError("lambda grid extends below the spectral floor")
        omega = np.sqrt(np.maximum(2.0 * (lam - kill) - xi**2, 0.0))
    else:
        omega_max = math.sqrt(max(2.0 * (lambda_max - kill) - xi**2, 1e-12))
        omega = np.linspace(0.0, omega_max, n_nodes)
        lam = 0.5 * (omega**2 + xi**2) + kill

    parts = _PartsIntegrator(curve)

    # martingale scaling: zero when the background drift is zero, otherwise a
    # short fixed-point iteration on the self-consistency relation
    rho = 0.0
    if diff.mu != 0.0:
        q_mu = (-1j * diff.mu - xi) / sigma
        for _ in range(50):
            val = -(np.log(complex(parts(q_mu)) * np.exp(-rho * t * q_mu)) - q_mu * math.log(x)) / t
            rho_new = float(np.real(val))
            if abs(rho_new - rho) < 1e-10:
                rho = rho_new
                break
            rho = rho_new

    phi = np.empty(len(omega), dtype=complex)
    for j, om in enumerate(omega):
        q = (1j * om - xi) / sigma
        integral = parts(q) * np.exp(-rho * t * q)
        ratio = integral * x ** (-q)
        if not np.isfinite(abs(ratio)) or abs(ratio) == 0.0 or np.real(ratio) <= 0.0:
            raise ValueError(f"projection integral left the log domain at omega={om:.4g}")
        phi[j] = -np.log(ratio) / t

    im_ratio = np.max(np.abs(phi.imag) / np.maximum(np.abs(phi.real), 1e-12))
    if im_ratio > 0.2:
        warnings.warn(
            f"imaginary part of the implied exponent reaches {im_ratio:.2f} of the real part; "
            "the background diffusion looks misspecified",
            RuntimeWarning,
        )

    re = phi.real
    monotone_violation = float(np.max(np.maximum(0.0, -np.diff(re))) if len(re) > 1 else 0.0)
    if monotone_projection:
        re = _pava_nondecreasing(re)
    diag = {"rho": rho, "max_im_ratio": float(im_ratio), "monotone_violation": monotone_violation}
    return PhiSamples(lam=lam, phi=re + 1j * phi.imag, diagnostics=diag)


# ---------------------------------------------------------------------------
# compound-Poisson decomposition and the general tail transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubordinatorEstimate:
    gamma_hat: float
    alpha_hat: float
    fhat_lam: np.ndarray
    fhat: np.ndarray
    levy_s: np.ndarray | None = None
    levy_density: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.gamma_hat < 0 or self.alpha_hat < 0:
            raise ValueError("estimated drift and intensity must be nonnegative")


def decompose_cp(phi: PhiSamples, *, fit_fraction: float = 0.5) -> SubordinatorEstimate:
    """Split phi into drift, jump intensity and jump-law transform samples.

    The drift is the large-lambda slope of phi, estimated by extrapolating
    phi(lam)/lam in 1/lam with a one-pole rational model (exact for
    exponentially distributed jump sizes); the intensity is the matching
    constant offset.  F-hat then follows pointwise from the samples.
    """
    lam = phi.lam
    re = phi.re
    if lam[-1] < 100.0:
        raise ValueError("decomposition needs samples up to lambda >= 100")

    s_hi = re[-1] / lam[-1]
    s_next = re[-2] / lam[-2]
    chord1 = (re[-1] - re[-2]) / (lam[-1] - lam[-2])
    chord2 = (re[-2] - re[-3]) / (lam[-2] - lam[-3])
    scale = max(abs(chord1), abs(chord2), 1e-12)
    if abs(chord1 - chord2) > 0.05 * scale:
        raise InstabilityError(
            f"slope estimates at the two largest lambdas differ by {abs(chord1 - chord2) / scale:.1%}"
        )

    sel = lam >= fit_fraction * lam[-1]
    lam_f, s_f = lam[sel], (re / lam)[sel]

    # pure-drift shortcut: a flat slope needs no jump component
    if float(np.max(s_f) - np.min(s_f)) < 1e-10 * max(abs(s_hi), 1e-12) + 1e-14:
        gamma_hat = max(float(np.mean(s_f)), 0.0)
        diag = {"no_jumps": True, "slope_spread": float(np.max(s_f) - np.min(s_f))}
        return SubordinatorEstimate(gamma_hat, 0.0, np.array([0.0]), np.array([1.0]), diagnostics=diag)

    def model(p, l):
        g, a, e = p
        return g + a / (l + math.exp(e))

    def resid(p):
        return model(p, lam_f) - s_f

    a0 = max(s_f[0] * lam_f[0] - s_f[-1] * lam_f[-1], 1e-6)
    p0 = np.array([max(s_f[-1] - a0 / lam_f[-1], 0.0), a0, math.log(10.0)])
    fit = least_squares(resid, p0, xtol=1e-15, ftol=1e-15, max_nfev=2000)
    gamma_hat = max(float(fit.x[0]), 0.0)
    # slope model: phi/lam = gamma + alpha/(lam + eta); alpha is the 1/lam weight
    alpha_hat = max(float(fit.x[1]), 0.0)

    if alpha_hat <= 1e-12:
        diag = {"no_jumps": True}
        return SubordinatorEstimate(gamma_hat, 0.0, np.array([0.0]), np.array([1.0]), diagnostics=diag)

    fhat = 1.0 + (gamma_hat * lam - re) / alpha_hat
    fhat_lam = np.concatenate(([0.0], lam))
    fhat = np.concatenate(([1.0], fhat))

    dec = np.diff(fhat)
    cvx = np.diff(fhat, 2)
    diag = {
        "no_jumps": False,
        "fit_cost": float(fit.cost),
        "max_monotone_violation": float(np.max(np.maximum(dec, 0.0), initial=0.0)),
        "max_convexity_violation": float(np.max(np.maximum(-cvx, 0.0), initial=0.0)),
    }
    if diag["max_monotone_violation"] > 1e-6 or diag["max_convexity_violation"] > 1e-6:
        warnings.warn("F-hat samples violate monotone convexity beyond slack", RuntimeWarning)
    return SubordinatorEstimate(gamma_hat, alpha_hat, fhat_lam, fhat, diagnostics=diag)


def tail_transform(phi: PhiSamples, gamma_hat: float):
    """Laplace transform of the jump-measure tail: phi(lam)/lam - gamma."""
    lam = phi.lam
    mask = lam > 0
    return lam[mask], phi.re[mask] / lam[mask] - gamma_hat


# ---------------------------------------------------------------------------
# numerical Laplace inversion (Gaver-Stehfest on a fitted surrogate)
# ---------------------------------------------------------------------------

def _stehfest_weights(order: int) -> np.ndarray:
    if order % 2 or order < 2:
        raise ValueError("Gaver-Stehfest order must be even and positive")
    m = order // 2
    v = np.zeros(order)
    for k in range(1, order + 1):
        total = 0.0
        for j in range((k + 1) // 2, min(k, m) + 1):
            total += (
                j**m * math.factorial(2 * j)
                / (math.factorial(m - j) * math.factorial(j) * math.factorial(j - 1)
                   * math.factorial(k - j) * math.factorial(2 * j - k))
            )
        v[k - 1] = (-1.0) ** (k + m) * total
    return v


def _fit_rational_surrogate(lam: np.ndarray, vals: np.ndarray, *, n_dict: int = 120):
    """Nonnegative mixture of 1/(lam + eta_j): positive, decreasing, convex."""
    etas = np.geomspace(1e-3, 2000.0, n_dict)
    design = 1.0 / (lam[:, None] + etas[None, :])
    coef, _ = nnls(design, vals)
    active = coef > 1e-13 * max(float(np.max(coef)), 1e-300)
    c_act, e_act = coef[active], etas[active]
    if c_act.size:
        # polish the few active atoms in log space
        p0 = np.concatenate([np.log(c_act), np.log(e_act)])
        na = c_act.size

        def resid(p):
            c = np.exp(p[:na])
            e = np.exp(p[na:])
            return (1.0 / (lam[:, None] + e[None, :])) @ c - vals

        try:
            fit = least_squares(resid, p0, xtol=1e-15, ftol=1e-15, max_nfev=3000)
            c_act, e_act = np.exp(fit.x[:na]), np.exp(fit.x[na:])
        except Exception:
            pass
    surr = (1.0 / (lam[:, None] + e_act[None, :])) @ c_act if c_act.size else np.zeros_like(vals)
    resid_sup = float(np.max(np.abs(surr - vals)))
    return c_act, e_act, resid_sup


def invert_laplace(lam, vals, s_grid, *, order: int = 12, residual_gate: float = 1e-4):
    """Invert transform samples to the time domain on s_grid.

    A completely monotone rational surrogate is fitted first (the inversion
    problem is only well posed within such a class); Gaver-Stehfest of the
    given order is then applied to the surrogate.  Raises FitError when the
    samples cannot be represented by the surrogate to the residual gate.
    """
    lam = np.asarray(lam, dtype=float)
    vals = np.asarray(vals, dtype=float)
    mask = lam > 0
    c, e, resid_sup = _fit_rational_surrogate(lam[mask], vals[mask])
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if resid_sup > residual_gate * max(1.0, scale):
        raise FitError(
            f"surrogate residual {resid_sup:.2e} above gate; samples are not a "
            "(positive, decreasing, convex) Laplace transform on this grid"
        )
    weights = _stehfest_weights(order)
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0):
        raise ValueError("s grid must be positive")
    ln2 = math.log(2.0)
    ks = np.arange(1, order + 1)
    lam_eval = ln2 * ks[None, :] / s_grid[:, None]
    ghat = (1.0 / (lam_eval[..., None] + e[None, None, :])) @ c if c.size else np.zeros_like(lam_eval)
    out = ln2 / s_grid * (ghat @ weights)
    return s_grid, out


def to_levy(est: SubordinatorEstimate, s_grid=None, *, order: int = 12) -> SubordinatorSpec:
    """Assemble a tabulated subordinator from the decomposition estimate."""
    if est.alpha_hat <= 0.0:
        return SubordinatorSpec(gamma=est.gamma_hat, levy_measure=None)
    if s_grid is None:
        lam_pos = est.fhat_lam[est.fhat_lam > 0]
        fh = est.fhat[est.fhat_lam > 0]
        # crude scale: lambda where F-hat has decayed to one half
        half = lam_pos[np.argmin(np.abs(fh - 0.5))] if len(lam_pos) else 10.0
        s_scale = 1.0 / max(half, 1e-3)
        s_grid = np.geomspace(0.02 * s_scale, 15.0 * s_scale, 200)
    s, f = invert_laplace(est.fhat_lam, est.fhat, s_grid, order=order)
    density = est.alpha_hat * f
    if np.any(density < -1e-6 * est.alpha_hat * max(float(np.max(np.abs(f))), 1e-300)):
        raise ValueError("inverted jump density is materially negative")
    if np.any(density < 0):
        warnings.warn("clipping small negative values of the inverted jump density", RuntimeWarning)
        density = np.maximum(density, 0.0)
    tab = TabulatedLevy(s=s, density=density)
    return SubordinatorSpec(gamma=est.gamma_hat, levy_measure=tab)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

_QUOTES_HEADER = "# subvar-csv v1 option-quotes"
_PHI_HEADER = "# subvar-csv v1 phi-samples"
_TABLE_HEADER = "# subvar-csv v1 table"


def write_quotes_csv(path, quotes: list[OptionQuote], symbol: str = "SYN") -> None:
    with open(path, "w") as fh:
        fh.write(_QUOTES_HEADER + "\n")
        fh.write("symbol,tenor_days,spot,strike,kind,mid\n")
        for q in quotes:
            fh.write(f"{symbol},{q.tenor * 365.0:.17g},{q.spot:.17g},{q.strike:.17g},{q.kind},{q.mid:.17g}\n")


def read_quotes_csv(path) -> list[OptionQuote]:
    quotes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("symbol,"):
                continue
            _, tenor_days, spot, strike, kind, mid = line.split(",")
            quotes.append(OptionQuote(
                strike=float(strike), mid=float(mid), kind=kind.strip(),
                tenor=float(tenor_days) / 365.0, spot=float(spot),
            ))
    if not quotes:
        raise ValueError(f"no quotes in {path}")
    return quotes


def write_phi_csv(path, samples: PhiSamples) -> None:
    with open(path, "w") as fh:
        fh.write(_PHI_HEADER + "\n")
        fh.write("lambda,re_phi,im_phi\n")
        for lam, p in zip(samples.lam, samples.phi):
            fh.write(f"{lam:.17g},{p.real:.17g},{p.imag:.17g}\n")


def read_phi_csv(path) -> PhiSamples:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("lambda,"):
                continue
            lam, re, im = line.split(",")
            rows.append((float(lam), float(re), float(im)))
    if not rows:
        raise ValueError(f"no phi samples in {path}")
    arr = np.asarray(rows)
    return PhiSamples(lam=arr[:, 0], phi=arr[:, 1] + 1j * arr[:, 2])


def write_table_csv(path, columns: dict) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    with open(path, "w") as fh:
        fh.write(_TABLE_HEADER + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_table_csv(path) -> dict:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    names = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return {n: data[:, i] for i, n in enumerate(names)}
