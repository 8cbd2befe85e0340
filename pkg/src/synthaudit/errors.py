"""Exception types raised across the package.

Everything derives from AuditError so callers can catch the package's own
failures without swallowing programming errors.
"""


class AuditError(Exception):
    """Base class for all synthaudit errors."""


class InvalidConfig(AuditError):
    """A configuration object is structurally or semantically invalid."""


class UnknownAttributeInConfig(InvalidConfig):
    """A config references an attribute name the schema does not define."""


class SchemaMismatch(AuditError):
    """Two datasets that must share a schema do not."""


class MissingColumn(AuditError):
    """A CSV file lacks a column required by the schema."""


class UnknownCategory(AuditError):
    """A categorical value does not appear in the schema's category list."""

    def __init__(self, attribute: str, value: str, row: int | None = None):
        self.attribute = attribute
        self.value = value
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"unknown category {value!r} for attribute {attribute!r}{where}")


class OutOfRange(AuditError):
    """A continuous value lies outside the schema's declared range."""

    def __init__(self, attribute: str, value: float, row: int | None = None):
        self.attribute = attribute
        self.value = value
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"value {value!r} out of range for attribute {attribute!r}{where}")


class ParseError(AuditError):
    """A CSV cell could not be parsed (empty cells included)."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(message + where)


class EmptyDataset(AuditError):
    """An operation requires at least one record."""


class TooFewRecords(AuditError):
    """An operation requires more records than the dataset provides."""


class InvalidScale(AuditError):
    """Laplace scale must be positive and finite."""


class EmptyScores(AuditError):
    """The exponential mechanism needs at least one candidate score."""


class InvalidSensitivity(AuditError):
    """Sensitivity for a DP mechanism must be positive and finite."""


class MetadataViolation(AuditError):
    """Provided metadata does not cover a value present in the data."""

    def __init__(self, attribute: str, detail: str):
        self.attribute = attribute
        super().__init__(f"metadata violation on attribute {attribute!r}: {detail}")


class ExternalProcessFailed(AuditError):
    """An external generator command exited non-zero or produced no output."""


class OutputSchemaMismatch(AuditError):
    """An external generator's output CSV does not conform to the schema."""


class DegenerateLabels(AuditError):
    """A classification task has fewer than two label values.

    fit_forest does not raise this: it returns a constant classifier with a
    warning flag. The type exists so game outcomes can carry the condition.
    """


class RankDeficient(AuditError):
    """A linear system is singular beyond what the ridge jitter absorbs."""


class InsufficientRows(AuditError):
    """Too few rows to fit the linear attack model (need cols + 2)."""


class ReferenceTooSmall(AuditError):
    """The adversary's reference dataset cannot supply the requested draws."""


class InsufficientIterations(AuditError):
    """A game was asked to run with too few iterations to estimate anything."""
