"""Exception hierarchy shared across the toolkit.

Split into configuration errors (bad flags / config keys, CLI exit code 1)
and data errors (bad captures, bad matrices, cache corruption, CLI exit
code 2). Anything else escaping to the CLI is an internal error (exit 3).
"""


class IotIdentError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(IotIdentError):
    """Invalid configuration value or unknown key (usage error)."""


class DataError(IotIdentError):
    """Input data violates a contract."""


# capture / flow assembly

class MalformedCapture(DataError):
    """Capture file has a bad magic number or truncated global header."""


class NonPositiveWindow(DataError):
    """Observation window must be > 0 seconds."""


# feature extraction

class EmptyFlow(DataError):
    """Feature extraction requires at least one packet."""


class EmptyInput(DataError):
    """Entropy of an empty byte sequence is undefined."""


# feature validation (pruning)

class InsufficientRows(DataError):
    """Matrix has too few rows for the requested statistic."""


class SumMismatch(DataError):
    """A declared linear-combination column does not equal the sum of its parents."""


# preprocessing

class AllRowsDropped(DataError):
    """Null removal left no rows (pathological window / feature combination)."""


class InsufficientSessions(DataError):
    """A device needs at least two sessions to be split."""


class NotFitted(IotIdentError):
    """transform/predict called before fit."""


class EmptyClass(DataError):
    """Oversampling requires at least one row per class."""


# model

class EmptyData(DataError):
    """Training requires at least one row."""


class SingleClass(DataError):
    """One-vs-rest training requires at least two device labels."""


class SchemaMismatch(DataError):
    """Row does not conform to the schema the model was fitted on."""


class EmptySpace(ConfigError):
    """Randomized search space has no candidate values."""


# experiments

class LeakageDetected(DataError):
    """A session id appears on both sides of a train/test split."""


# session cache

class SchemaVersionMismatch(DataError):
    """Cache key or file carries a schema version this build does not support."""


class CorruptFile(DataError):
    """Cache file failed its checksum; distinct from a plain cache miss."""


class IoFailure(DataError):
    """Underlying I/O failed while writing or reading cache state."""


class DuplicateConflict(DataError):
    """A session id was re-registered with different metadata."""
