"""Exception types raised across the package."""


class PreservaError(ValueError):
    """Base class for validation failures."""


class NotSquare(PreservaError):
    pass


class NotHermitian(PreservaError):
    pass


class NotPSD(PreservaError):
    pass


class DimensionMismatch(PreservaError):
    pass


class NotTracePreserving(PreservaError):
    pass


class NotCompletelyPositive(PreservaError):
    pass


class NotDensityMatrix(PreservaError):
    pass


class BadWeights(PreservaError):
    pass


class BadParameter(PreservaError):
    pass


class BadIndex(PreservaError):
    pass


class NotBipartiteSquare(PreservaError):
    pass


class SigmaSingular(PreservaError):
    pass


class NotGibbsPreserving(PreservaError):
    pass


class BadEpsilon(PreservaError):
    pass


class CapExceeded(PreservaError):
    pass


class DimensionTooLarge(PreservaError):
    pass


class DimensionUnsupported(PreservaError):
    pass


class NotAscending(PreservaError):
    pass


class TargetInfeasible(PreservaError):
    pass


class OutOfRange(PreservaError):
    pass


class SearchFailed(PreservaError):
    pass


class WitnessNeverFires(PreservaError):
    pass


class EmptyFamily(PreservaError):
    pass


class SolverError(RuntimeError):
    """Base class for numerical solver failures."""


class Infeasible(SolverError):
    pass


class SolverDivergence(SolverError):
    """Raised when the iteration budget runs out; ``bracket`` holds (lower, upper)."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
