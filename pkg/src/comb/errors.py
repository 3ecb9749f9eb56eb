"""Shared exception hierarchy.

Every domain error raised by this package derives from CombError so the
CLI can map failures to exit status 1 with the error name as diagnostic.
"""


class CombError(Exception):
    """Base class for all domain errors."""

    @property
    def name(self) -> str:
        return type(self).__name__
