"""Exception types raised across the package.

Every error that a caller is expected to branch on gets its own class so the
command line layer can map failures to stable categories and exit codes.
"""


class SurveycastError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SurveycastError):
    """A delimited-text input could not be parsed.

    Carries the offending line number when known.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InvalidResponseError(ParseError):
    """A binarized response value was not 0 or 1."""


class DuplicateKeyError(SurveycastError):
    """Two records share the same (respondent, variable, year) triple."""


class UnmappedOptionSetError(SurveycastError):
    """No binarization entry exists for the requested option set."""


class UnknownLabelError(SurveycastError):
    """A response label is absent from its option set's binarization entry."""


class EmptyQuestionError(SurveycastError):
    """A prompt was requested for an empty question text."""


class AlignmentError(SurveycastError):
    """An embedding file does not cover every question in the dataset."""


class CorruptEmbeddingError(SurveycastError):
    """An embedding payload contains NaN or infinite values."""


class FormatError(SurveycastError):
    """A serialized artifact violates its declared format."""


class VersionError(FormatError):
    """A serialized artifact declares an unsupported format version."""


class ChecksumError(FormatError):
    """A binary payload does not match its recorded checksum."""


class ConfigError(SurveycastError):
    """A configuration value is out of range or inconsistent."""


class CacheMismatchError(SurveycastError):
    """A forward cache does not match the parameters handed to backward."""


class NonFiniteError(SurveycastError):
    """A loss or gradient became NaN or infinite during training."""


class UndefinedMetricError(SurveycastError):
    """A metric is undefined for the given inputs (e.g. one-class AUC)."""


class SingularFitError(SurveycastError):
    """A least-squares fit is degenerate (no variance in the regressor)."""


class SingularDesignError(SurveycastError):
    """A regression design matrix is rank deficient."""


class DegenerateImportanceError(SurveycastError):
    """All cross-layer block norms are zero; importance shares are undefined."""


class MechanismInfeasibleError(SurveycastError):
    """A planted missingness mechanism has no usable predictor columns."""


class CoverageError(SurveycastError):
    """Auxiliary columns (weights, demographics) do not cover every row."""


class InsufficientDataError(SurveycastError):
    """Too few points for the requested computation."""


class DependencyError(SurveycastError):
    """A required input artifact is missing or unreadable."""


class LockError(SurveycastError):
    """An output directory is already locked by another run."""
