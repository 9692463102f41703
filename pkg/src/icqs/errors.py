"""Exception types shared across the solver stack."""


class IcqsError(Exception):
    """Base class for all solver errors."""


class NotPositiveDefinite(IcqsError):
    """A matrix required to be positive definite failed its pivot test."""

    def __init__(self, pivot_index: int, pivot_value: float):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"pivot {pivot_index} is {pivot_value:.3e}; matrix is not positive definite"
        )


class NonConvergence(IcqsError):
    """An iterative factorization failed to converge."""


class DimensionMismatch(IcqsError):
    """Vector or matrix dimensions are inconsistent with the instance."""


class EnumerationBudgetExceeded(IcqsError):
    """Lattice enumeration visited more nodes than the configured budget."""


class OracleBudgetExceeded(IcqsError):
    """The brute-force search box contains more points than the oracle budget."""


class RejectionBudgetExceeded(IcqsError):
    """Instance generation exhausted its rejection budget."""


class InvalidM(IcqsError):
    """The counterexample family requires an even scale parameter M >= 2."""


class NoCycle(IcqsError):
    """The trace did not end in a cycle or fixed point."""


class NoEquilibriumFound(IcqsError):
    """Support enumeration exhausted all supports without a valid equilibrium.

    Cannot occur for a well-posed finite game; signals numerical failure.
    """


class ToleranceNotReached(IcqsError):
    """The approximate equilibrium search stopped above the requested regret."""

    def __init__(self, best_eps: float, message: str = ""):
        self.best_eps = best_eps
        super().__init__(message or f"best achievable regret was {best_eps:.3e}")
