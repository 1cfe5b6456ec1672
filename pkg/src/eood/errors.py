"""Exception hierarchy shared across the engine.

Validation-style failures (bad arguments, malformed inputs) derive from
ValidationError and map to CLI exit code 2; I/O and runtime failures map
to exit code 1.
"""


class EoodError(Exception):
    """Base class for all engine errors."""


class ValidationError(EoodError):
    """Invalid arguments, values, or file contents."""


class DomainError(ValidationError):
    """Value outside an operation's mathematical domain (non-finite, pole, ...)."""


class AlignmentError(ValidationError):
    """Paired sample matrices disagree on sample count."""


class InsufficientSamplesError(ValidationError):
    """Too few samples for the requested k-nearest-neighbor estimate."""


class NoSignalError(ValidationError):
    """Every candidate block is degenerate; no block can be selected."""


class IngestError(EoodError):
    """Base class for dump/manifest I/O failures."""


class FormatError(IngestError, ValidationError):
    """Dump header does not match the expected magic/version/layout."""


class CorruptionError(IngestError, ValidationError):
    """Dump payload is truncated or inconsistent with its header."""


class ManifestError(IngestError, ValidationError):
    """Manifest JSON violates the schema."""
