"""
This module defines the exception hierarchy shared by every FadeMem package.

Classes:
    FadeMemError: Root of all engine errors.
    ConfigError: An EngineConfig invariant or a config file is invalid.
    ClockRegressionError: An operation was requested at a time before the store clock.
    EmbeddingError: A text could not be embedded.
    EmbeddingDimensionError: Two vectors of different length were compared; an EmbeddingError.
    SnapshotError: Base class for snapshot failures.
    SnapshotVersionError: The snapshot was written by another format version.
    SnapshotCorruptError: The snapshot is truncated or fails its checksum.
    SnapshotSchemaError: The snapshot decodes but its content is not a valid store.
    OracleError: Base class for relation/merge oracle failures.
    OracleTimeoutError: The oracle did not answer in time after all retries.
    OracleParseError: The oracle answered but no usable value could be parsed.
    OracleAuthError: The oracle endpoint rejected the credentials.
    OracleUnavailableError: The oracle is not configured or unreachable.
    TraceError: A benchmark trace is malformed or does not match the store config.
    UsageError: A command-line invocation is malformed.
"""


class FadeMemError(Exception):
    """Root of all engine errors."""


class ConfigError(FadeMemError, ValueError):
    """Raised when an EngineConfig violates one of its invariants."""


class ClockRegressionError(FadeMemError):
    """Raised when `now` is earlier than the store clock."""

    def __init__(self, now: float, clock: float) -> None:
        super().__init__(f"clock regression: requested t={now} but store clock is t={clock}")
        self.now = now
        self.clock = clock


class EmbeddingError(FadeMemError):
    """Raised when a text cannot be turned into an embedding."""


class EmbeddingDimensionError(EmbeddingError, ValueError):
    """Raised when vectors of different dimension are combined."""


class SnapshotError(FadeMemError):
    """Base class for snapshot failures."""


class SnapshotVersionError(SnapshotError):
    """Raised when the snapshot format version is not supported."""


class SnapshotCorruptError(SnapshotError):
    """Raised when the snapshot is truncated, mis-tagged or fails its checksum."""


class SnapshotSchemaError(SnapshotError):
    """Raised when the snapshot payload does not describe a valid store."""


class OracleError(FadeMemError):
    """Base class for oracle failures consumed by the conflict and fusion fallbacks."""


class OracleTimeoutError(OracleError):
    """Raised when the oracle timed out on every attempt."""


class OracleParseError(OracleError):
    """Raised when no label or score could be parsed from the oracle reply."""


class OracleAuthError(OracleError):
    """Raised when the oracle endpoint rejects the API key."""


class OracleUnavailableError(OracleError):
    """Raised when the oracle endpoint is not configured or unreachable."""


class TraceError(FadeMemError):
    """Raised when a trace is malformed or inconsistent with the store config."""


class UsageError(FadeMemError):
    """Raised for malformed command-line invocations."""
