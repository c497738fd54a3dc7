"""Exception hierarchy shared by all modules.

Every error carries a short machine-parsable ``category`` so the CLI can
emit one-line diagnostics and map categories to exit codes.
"""


class StageTLError(Exception):
    category = "internal"


class ConfigError(StageTLError):
    """A configuration is inconsistent (shape mismatches, bad rates, ...)."""

    category = "config"


class DataError(StageTLError):
    """Input data violates its contract (bad manifest row, bad label, ...)."""

    category = "data"


class UsageError(StageTLError):
    """An API or CLI was called in the wrong order or with missing pieces."""

    category = "usage"


class ContractError(StageTLError):
    """A stage contract was violated (e.g. architecture edits during HoTL)."""

    category = "contract"


class NumericsError(StageTLError):
    """Non-finite values appeared where the numerics core forbids them."""

    category = "numerics"


class CheckpointError(StageTLError):
    """Base for checkpoint (de)serialization failures."""

    category = "format"


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


class ArchHashMismatchError(CheckpointError):
    pass
