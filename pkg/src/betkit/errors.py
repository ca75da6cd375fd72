"""Toolkit exception types, grouped by which CLI exit code they map to."""


class BetkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(BetkitError):
    """A data file could not be parsed (bad row, bad header, bad JSON)."""


class ValidationError(BetkitError):
    """Well-formed input that violates a documented contract."""


class ShortageError(ValidationError):
    """A sampling operation asked for more records than a class contains."""


class BackendError(BetkitError):
    """Translation backend failure after the retry budget is spent."""


class CapabilityError(BackendError):
    """The backend does not support the requested language pair."""


class TrainerError(BetkitError):
    """A trainer adapter violated the manifest-in / metrics-out protocol."""
