"""Exception hierarchy shared across the package.

Scorers raise narrow subclasses so the batch harness can turn a failure on
one record into a skip entry instead of aborting the run.
"""

from sklearn.exceptions import NotFittedError


class GenuqError(Exception):
    """Base class for all package errors."""


# --- record model -----------------------------------------------------------


class MalformedJson(GenuqError):
    pass


class SchemaViolation(GenuqError):
    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class NormalizationError(GenuqError):
    """Token-level probability mass does not sum to one."""

    def __init__(self, position: int, message: str = ""):
        self.position = position
        super().__init__(f"position {position}: {message}" if message else f"position {position}")


class DatasetError(GenuqError):
    """Parse failure inside a dataset file, tagged with the line number."""

    def __init__(self, line_number: int, cause: Exception):
        self.line_number = line_number
        self.cause = cause
        super().__init__(f"line {line_number}: {cause}")


# --- scoring preconditions --------------------------------------------------


class EmptyOutput(GenuqError):
    pass


class MissingAlternatives(GenuqError):
    pass


class MissingUnconditional(GenuqError):
    pass


class MissingSampleLogprobs(GenuqError):
    pass


class MissingSampleTokens(GenuqError):
    pass


class MissingPTrue(GenuqError):
    pass


class MissingVerbalized(GenuqError):
    pass


class MissingEmbedding(GenuqError):
    pass


class SimilarityUnavailable(GenuqError):
    pass


class TooFewSamples(GenuqError):
    pass


class EmptyDenominator(GenuqError):
    pass


class SingularDegree(GenuqError):
    pass


# --- similarity / NLI providers ---------------------------------------------


class ProviderError(GenuqError):
    pass


class TransportError(ProviderError):
    pass


class ProtocolViolation(ProviderError):
    pass


# --- density fits ------------------------------------------------------------


class DimensionMismatch(GenuqError):
    pass


class DegenerateFit(GenuqError):
    pass


class LengthMismatch(GenuqError):
    pass


# --- calibration --------------------------------------------------------------


class DegenerateRange(GenuqError):
    pass


class UnfittedModel(GenuqError, NotFittedError):
    """Raised when a calibration model is applied before fitting.

    Also a sklearn ``NotFittedError`` so generic estimator checks catch it.
    """


# --- evaluation ----------------------------------------------------------------


class SingleClass(GenuqError):
    pass


class NoPositives(GenuqError):
    pass


class RangeViolation(GenuqError):
    pass


class DegenerateQuality(GenuqError):
    pass


# --- harness --------------------------------------------------------------------


class ConfigError(GenuqError):
    pass
