class ExportError(Exception):
    """Base class for everything the exporter raises on purpose."""


class TokenAlignmentFailure(ExportError):
    """A word token is covered by no subword; offset alignment broke down."""
