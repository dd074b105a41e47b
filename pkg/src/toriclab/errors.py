"""Exception and warning types shared by the toriclab modules."""


class ToricLabError(Exception):
    """Base class for all errors raised by toriclab."""


class DefinitenessError(ToricLabError, ValueError):
    """A matrix that should be positive definite is not."""


class ShapeError(ToricLabError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(ToricLabError, ValueError):
    """A parameter lies outside the allowed range."""


class DataError(ToricLabError, ValueError):
    """Sampled data is insufficient for the requested estimate."""


class UnboundednessError(ToricLabError, ValueError):
    """An exponent is unbounded (+inf) where a finite value is required."""


class ConvexityError(ToricLabError, ValueError):
    """Sampled data violates convexity beyond tolerance."""


class HorizonError(ToricLabError, RuntimeError):
    """A transform did not stabilize within the available horizon."""


class FiniteEnergyError(ToricLabError, ValueError):
    """A potential or curve does not have finite energy / full mass."""


class UnsupportedDimensionError(ToricLabError, ValueError):
    """Only dimensions 1 and 2 are supported."""


class ScenarioError(ToricLabError, ValueError):
    """A scenario file is malformed or fails schema validation."""


class PositivityWarning(UserWarning):
    """A family expected to be positive shows a convexity defect."""


class ConvergenceWarning(UserWarning):
    """An approximation did not settle to the requested tolerance."""
