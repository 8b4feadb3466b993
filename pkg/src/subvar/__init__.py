"""Pricing toolkit for variance swaps on defaultable, Levy-time-changed assets.

The package has three layers:

* analytic machinery: special functions (`specfun`), subordinator laws
  (`subordinator`), diffusion spectral data and transition densities
  (`spectral`);
* pricing and extraction: variance swap rates (`varswap`) and the
  market-implied subordinator pipeline (`implied`);
* verification: an independent Monte Carlo oracle (`mc`) and a command-line
  driver (`cli`).
"""

from . import spectral, specfun, subordinator
from .spectral import GBMSpec, JDCEVSpec
from .subordinator import (
    CompoundPoissonExp,
    GammaJumps,
    InverseGaussianJumps,
    SubordinatorSpec,
    TabulatedLevy,
    laplace_exponent,
    martingale_rho,
)

__all__ = [
    "CompoundPoissonExp",
    "GBMSpec",
    "GammaJumps",
    "InverseGaussianJumps",
    "JDCEVSpec",
    "SubordinatorSpec",
    "TabulatedLevy",
    "VarSwapQuote",
    "implied",
    "kvar_gbm",
    "kvar_jdcev",
    "kvar_semigroup",
    "laplace_exponent",
    "martingale_rho",
    "mc",
    "specfun",
    "spectral",
    "subordinator",
    "varswap",
]

__version__ = "0.1.0"
