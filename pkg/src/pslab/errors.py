"""Exception hierarchy shared across the package."""


class PSLabError(Exception):
    """Base class for all package errors."""


class ConfigError(PSLabError, ValueError):
    """Invalid configuration: bad flag values, malformed files, unknown labels."""

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class FactorizationError(PSLabError, ValueError):
    """Correlation matrix could not be Cholesky-factorized."""

    def __init__(self, minor, message=None):
        self.minor = minor
        super().__init__(
            message or f"correlation matrix is not positive definite: leading minor {minor} fails"
        )


class EstimationError(PSLabError):
    """A model could not be estimated on the data at hand."""


class SeparationError(EstimationError):
    """No finite maximum-likelihood estimate exists (complete or quasi-complete separation)."""


class RankDeficiencyError(EstimationError):
    """The weighted design matrix is singular."""

    def __init__(self, term, message=None):
        self.term = term
        super().__init__(message or f"design is rank deficient: term {term!r} is collinear with earlier terms")


class NoMatchesError(EstimationError):
    """Matching produced no pairs."""


class UndefinedVarianceError(EstimationError):
    """A treatment arm is too small to compute a variance."""
