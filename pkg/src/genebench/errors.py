"""Shared exception bases.

Concrete errors live in the module whose contract they belong to; the bases
here exist so the CLI can map whole families to exit codes without importing
every leaf class.
"""


class GenebenchError(Exception):
    """Base class for every error raised by this package."""


class UsageError(GenebenchError):
    """Bad flags or configuration. CLI exit code 1."""


class DataError(GenebenchError):
    """Invalid input data or a failed validation check. CLI exit code 2."""


class TrainingError(GenebenchError):
    """Optimization failure such as a non-finite loss. CLI exit code 3."""


class DuplicateToken(DataError):
    """A token was added to a vocabulary that already contains it."""
