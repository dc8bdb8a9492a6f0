"""Exception hierarchy shared by all cvhar modules."""


class CvharError(Exception):
    """Base class for all cvhar errors."""


class DataError(CvharError):
    """Unusable input data: unreadable file, no parsable rows, too few observations."""


class DomainError(CvharError):
    """Argument outside its mathematical domain (parameter range, support, ...)."""


class FitError(CvharError):
    """Estimation failed: degenerate sample, rank deficiency, non-convergence."""
