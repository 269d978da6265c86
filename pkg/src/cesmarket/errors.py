"""Exception types shared across the package."""


class CesMarketError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(CesMarketError, ValueError):
    """A bundle, allocation, or weight vector has the wrong shape."""


class NotDifferentiable(CesMarketError, TypeError):
    """Gradient requested from a valuation kind that has none (Leontief)."""


class BoundaryGradient(CesMarketError, ValueError):
    """A partial derivative diverges at a zero coordinate of the bundle."""


class DomainError(CesMarketError, ValueError):
    """Welfare queried outside its domain (negative values, or zeros with rho < 0)."""


class EmptyInput(CesMarketError, ValueError):
    """An operation that needs at least one agent received none."""


class BadParameter(CesMarketError, ValueError):
    """A numeric parameter is outside its documented range."""


class BadBid(CesMarketError, ValueError):
    """A bid profile contains a non-positive or non-finite bid."""


class BadMultiplicity(CesMarketError, ValueError):
    """An identity multiplicity below 1 was supplied."""


class BadRho(CesMarketError, ValueError):
    """A demonstration was asked for a curvature parameter it does not cover."""


class UnsupportedValuation(CesMarketError, TypeError):
    """The smooth solver was given a non-differentiable valuation kind."""


class UnsupportedDegree(CesMarketError, ValueError):
    """A degree-1-only analysis was given an instance of another degree."""


class NotLeontief(CesMarketError, TypeError):
    """The Leontief solver was given a non-Leontief valuation."""


class InconsistentMultipliers(CesMarketError, RuntimeError):
    """Per-holder multiplier estimates disagree beyond the allowed spread."""


class TooLarge(CesMarketError, ValueError):
    """A brute-force enumeration would exceed its point budget."""


class QuadratureFailure(CesMarketError, RuntimeError):
    """Adaptive quadrature could not reach tolerance within its depth budget."""


class NotEquilibrium(CesMarketError, RuntimeError):
    """A precondition requiring a certified equilibrium failed."""


class InstanceFormatError(CesMarketError, ValueError):
    """An instance or solution file is malformed or inconsistent."""


class DidNotConverge(CesMarketError, RuntimeError):
    """Solver failed to reach the requested residual; carries the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
