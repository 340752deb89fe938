"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation
    (non-SPD matrix, time outside the horizon, state outside a grid, ...)."""


class SingularityError(RuntimeError):
    """A matrix that must be invertible is singular to working tolerance."""


class DivergenceError(RuntimeError):
    """An integration produced non-finite values; message carries the time
    (and particle index, for ensemble simulations) where it happened."""


class ConvergenceError(RuntimeError):
    """An iterative or integration procedure missed its accuracy target."""


class ScenarioError(ValueError):
    """Scenario file failed validation.  ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ResolutionWarning(UserWarning):
    """A density feature is too sharp for the active grid resolution."""
