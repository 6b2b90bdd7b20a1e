"""Exception types shared across the toolkit."""


class GopCtcError(Exception):
    """Base class for all toolkit errors."""


class InputError(GopCtcError):
    """Invalid argument or value supplied by the caller."""


class FormatError(GopCtcError):
    """Malformed or truncated on-disk artifact."""


class VocabularyError(GopCtcError):
    """A character or token is not present in the vocabulary."""


class CompatibilityError(GopCtcError):
    """Model and features disagree on dimensionality or vocabulary."""


class NumericError(GopCtcError):
    """A numerical routine failed to reach the required accuracy."""


class SizeError(GopCtcError):
    """Problem size exceeds a hard guard."""
