"""Exception types shared across the package."""


class NumericDomainError(ArithmeticError):
    """A likelihood component left its numerically trustworthy region.

    Raised e.g. when the pairwise-margin series cancels catastrophically or a
    component overflows; the message names the offending component.
    """


class DivergenceError(RuntimeError):
    """The stochastic optimizer produced a non-finite or exploding iterate."""

    def __init__(self, iteration, last_theta, msg=None):
        self.iteration = iteration
        self.last_theta = last_theta
        super().__init__(
            msg or f"optimizer diverged at iteration {iteration}; "
            "reduce eta0 (the stepsize tuner halves it automatically)"
        )


class UnsupportedSchemeError(ValueError):
    """Operation not defined for this sampling scheme (e.g. recycled bernoulli)."""


class ConditioningError(ArithmeticError):
    """A matrix factorization failed even after the diagonal jitter fallback."""


class TuningError(RuntimeError):
    """Every candidate stepsize in the halving chain diverged."""


class CapabilityError(ValueError):
    """Request exceeds a hard implementation bound (e.g. Ising p > 25)."""
