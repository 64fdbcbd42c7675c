"""Exception types shared across the package.

Most errors are precondition or contract violations and therefore also
subclass ValueError; numerical failures subclass ArithmeticError so callers
can distinguish "bad input" from "computation broke down".
"""


class AgcastError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AgcastError, ValueError):
    """Pipeline configuration is missing, malformed, or inconsistent."""


# --- data ingestion ---------------------------------------------------------

class MissingColumnError(AgcastError, ValueError):
    pass


class UnparseableDateError(AgcastError, ValueError):
    def __init__(self, row: int, text: str):
        self.row = row
        self.text = text
        super().__init__(f"row {row}: cannot parse date {text!r}")


class NonFiniteValueError(AgcastError, ValueError):
    def __init__(self, row: int, text: str):
        self.row = row
        self.text = text
        super().__init__(f"row {row}: non-finite value {text!r}")


class EmptyAfterCleaningError(AgcastError, ValueError):
    pass


class DuplicateDateError(AgcastError, ValueError):
    pass


class EmptyMonthError(AgcastError, ValueError):
    def __init__(self, month):
        self.month = month
        super().__init__(
            f"no observation on or before the 1st of {month.isoformat()} within lookback"
        )


class NoOverlapError(AgcastError, ValueError):
    pass


class InvalidSpecError(AgcastError, ValueError):
    """Synthetic-data specification fails validation."""


# --- preprocessing ----------------------------------------------------------

class ConstantSeriesError(AgcastError, ValueError):
    pass


class SeriesTooShortError(AgcastError, ValueError):
    pass


class InsufficientLengthError(AgcastError, ValueError):
    pass


# --- outlier detection ------------------------------------------------------

class TooFewPointsError(AgcastError, ValueError):
    pass


class InvalidConfigError(AgcastError, ValueError):
    pass


class DimensionMismatchError(AgcastError, ValueError):
    pass


# --- relations --------------------------------------------------------------

class ConstantInputError(AgcastError, ValueError):
    pass


class LengthMismatchError(AgcastError, ValueError):
    pass


class SingularRegressionError(AgcastError, ArithmeticError):
    """Lagged regression design is rank deficient (collinear lags)."""


class UnknownCommodityError(AgcastError, KeyError):
    pass


# --- models -----------------------------------------------------------------

class InsufficientSamplesError(AgcastError, ValueError):
    pass


class RankDeficientWarning(UserWarning):
    """Design matrix was rank deficient; ridge fallback applied."""


class NonFiniteLossError(AgcastError, ArithmeticError):
    """Training diverged to a non-finite loss."""


class EmptyDatasetError(AgcastError, ValueError):
    pass


class InsufficientHistoryError(AgcastError, ValueError):
    pass


# --- reporting --------------------------------------------------------------

class ConstantTargetError(AgcastError, ValueError):
    pass


class CommoditySetMismatchError(AgcastError, ValueError):
    pass


# --- pipeline ---------------------------------------------------------------

class MissingArtifactError(AgcastError, FileNotFoundError):
    def __init__(self, stage: str, path):
        self.stage = stage
        self.path = path
        super().__init__(f"missing artifact {path} (produced by the {stage!r} stage)")


class StageFailureError(AgcastError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
