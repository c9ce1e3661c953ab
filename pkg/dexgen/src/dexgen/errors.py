"""Structured errors carrying machine-readable context."""


class GenError(Exception):
    """Base error; keyword context lands in ``.context``."""

    code = "gen_error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        return {"error": self.code, "message": str(self), **self.context}


class ConfigError(GenError):
    code = "config_error"


class DimensionError(GenError):
    code = "dimension_error"


class ShardError(GenError):
    code = "shard_error"


class ShardChecksumError(ShardError):
    code = "shard_checksum_error"


class ShardVersionError(ShardError):
    code = "shard_version_error"


class CheckpointError(GenError):
    code = "checkpoint_error"
