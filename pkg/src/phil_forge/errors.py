"""Exception types raised across the package."""


class PhilForgeError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(PhilForgeError, ValueError):
    pass


class DomainMismatchError(PhilForgeError, ValueError):
    pass


class NonProperError(PhilForgeError, ValueError):
    pass


class DegenerateDenominatorError(PhilForgeError, ValueError):
    pass


class AlgebraicLoopError(PhilForgeError):
    pass


class NearPoleError(PhilForgeError):
    pass


class UnstableSystemError(PhilForgeError):
    pass


class SingularTransformError(PhilForgeError):
    pass


class CutoffAboveNyquistError(PhilForgeError, ValueError):
    pass


# Riccati / synthesis

class NoStabilizingSolutionError(PhilForgeError):
    pass


class IterationDivergedError(PhilForgeError):
    pass


class RiccatiDivergenceError(PhilForgeError):
    pass


class NotStabilizableError(PhilForgeError):
    pass


class NotDetectableError(PhilForgeError):
    pass


class RankDeficientD12Error(PhilForgeError):
    pass


class RankDeficientD21Error(PhilForgeError):
    pass


class GammaInfeasibleError(PhilForgeError):
    pass


# Simulation

class NonFiniteStateError(PhilForgeError):
    def __init__(self, message, sample_index):
        super().__init__(message)
        self.sample_index = sample_index


class EmptyTraceError(PhilForgeError, ValueError):
    pass


class BracketInvalidError(PhilForgeError, ValueError):
    pass


# Configuration

class ConfigParseError(PhilForgeError):
    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ConfigValidationError(PhilForgeError, ValueError):
    def __init__(self, field, constraint, line=None):
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {constraint}{loc}")
        self.field = field
        self.constraint = constraint
        self.line = line
