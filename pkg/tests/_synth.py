"""Synthetic price generation for the extraction round-trip tests.

For killed GBM time-changed by a compound-Poisson-exponential clock the
time-changed kernel is an explicit mixture: conditioning on the number of
jumps j, the business time is gamma*t plus an Erlang(j, eta) draw, and each
conditional price is a killed-Black formula.  This evaluates call prices by
one-dimensional quadrature per jump count -- an oracle entirely independent
of the spectral machinery under test.
"""

from __future__ import annotations

import math

import numpy as np

from subvar.implied import OptionQuote, killed_gbm_call
from subvar.spectral import GBMSpec
from subvar.subordinator import CompoundPoissonExp, SubordinatorSpec


def _erlang_nodes(j: int, eta: float, n: int = 96):
    # Gauss-Legendre on the Erlang(j, eta) density over its effective support
    from numpy.polynomial.legendre import leggauss

    hi = (j + 12.0 * math.sqrt(j)) / eta
    xg, wg = leggauss(n)
    u = 0.5 * hi * (xg + 1.0)
    w = 0.5 * hi * wg
    logpdf = (j - 1) * np.log(u) - eta * u + j * math.log(eta) - math.lgamma(j)
    return u, w * np.exp(logpdf)


def cpexp_gbm_call(diff: GBMSpec, sub: SubordinatorSpec, t: float, x: float, strikes) -> np.ndarray:
    """Call prices under subordinated killed GBM with CP-exponential jumps."""
    m = sub.levy_measure
    assert isinstance(m, CompoundPoissonExp)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    # rho differs from the identity-clock value embedded in killed_gbm_call;
    # price at rho = 0 scaling and re-scale the spot instead
    from subvar.subordinator import martingale_rho

    rho = martingale_rho(sub, diff.mu)

    def killed_black(tau: float) -> np.ndarray:
        if tau <= 0:
            return np.maximum(x - strikes * math.exp(-rho * t), 0.0) * math.exp(rho * t) * 0 + np.maximum(
                x * math.exp(rho * t) - strikes, 0.0
            )
        # E[(e^(rho t) X_tau 1_alive - K)^+] = e^(rho t) * killed-Black at K e^(-rho t) shifted
        fwd = x * math.exp((diff.mu + diff.k) * tau)
        w = diff.sigma**2 * tau
        sq = math.sqrt(w)
        kk = strikes * math.exp(-rho * t)
        d1 = (np.log(fwd / kk) + 0.5 * w) / sq
        d2 = d1 - sq
        ncdf = lambda z: 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))
        return math.exp(rho * t) * math.exp(-diff.k * tau) * (fwd * ncdf(d1) - kk * ncdf(d2))

    lam_pois = m.alpha * t
    out = np.zeros_like(strikes)
    total_p = 0.0
    j = 0
    while True:
        pj = math.exp(-lam_pois + j * math.log(lam_pois) - math.lgamma(j + 1)) if lam_pois > 0 else (1.0 if j == 0 else 0.0)
        if j == 0:
            cond = killed_black(sub.gamma * t)
        else:
            u, w = _erlang_nodes(j, m.eta)
            cond = np.zeros_like(strikes)
            for ui, wi in zip(u, w):
                cond += wi * killed_black(sub.gamma * t + ui)
        out += pj * cond
        total_p += pj
        j += 1
        if total_p > 1.0 - 1e-13 or j > 60:
            break
    return out


def make_quotes(diff: GBMSpec, sub: SubordinatorSpec, t: float, x: float, strikes) -> list[OptionQuote]:
    prices = cpexp_gbm_call(diff, sub, t, x, strikes)
    return [
        OptionQuote(strike=float(K), mid=float(p), kind="call", tenor=t, spot=x)
        for K, p in zip(np.atleast_1d(strikes), prices)
    ]


def make_killed_gbm_quotes(diff: GBMSpec, t: float, x: float, strikes) -> list[OptionQuote]:
    prices = killed_gbm_call(diff, t, x, strikes)
    return [
        OptionQuote(strike=float(K), mid=float(p), kind="call", tenor=t, spot=x)
        for K, p in zip(np.atleast_1d(strikes), prices)
    ]
