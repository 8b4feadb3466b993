"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """A truncated series or quadrature failed its tail diagnostic."""


class DivergenceError(ValueError):
    """An integral against the jump measure does not converge."""


class FitError(RuntimeError):
    """A least-squares fit failed or did not meet its quality gate."""


class ArbitrageError(ValueError):
    """A call curve violates static no-arbitrage (butterfly) constraints."""


class InstabilityError(RuntimeError):
    """Asymptotic estimates from samples disagree beyond tolerance."""
