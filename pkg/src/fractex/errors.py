"""Exception hierarchy shared across the package.

Data problems (unreadable or malformed inputs) and numeric problems
(singular systems, underdetermined fits) are kept on separate branches so
the CLI can map them to distinct exit codes.
"""


class FractexError(Exception):
    """Base class for all package-specific errors."""


class DataError(FractexError):
    """A problem with input data: files, formats, manifests."""


class FormatError(DataError):
    """Unsupported or unrecognized file format / bit depth."""


class ParseError(DataError):
    """Malformed file content; message carries the offending location."""


class ValidationError(DataError):
    """Structurally valid input that violates a documented constraint."""


class NumericError(FractexError):
    """A numerical failure in a fit or factorization."""


class ConditioningError(NumericError):
    """Singular or near-singular linear system."""


class UnderdeterminedError(NumericError):
    """Fewer samples than unknowns."""
