"""Shared exception base for the seal toolkit."""


class SealError(Exception):
    """Base class for every error raised by this package."""
