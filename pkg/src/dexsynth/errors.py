"""Exception types raised across the engine.

Every error carries a short machine-readable ``code`` plus free-form
``details`` so CLI layers can serialize failures as JSON.
"""


class EngineError(Exception):
    """Base class for all structured engine errors."""

    code = "engine_error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {"code": self.code, "message": self.message, "details": self.details}


class MeshError(EngineError):
    code = "mesh_error"


class HandConfigError(EngineError):
    code = "hand_config_error"


class DimensionError(EngineError):
    code = "dimension_error"


class OptimizationError(EngineError):
    code = "optimization_error"


class PlanningError(EngineError):
    code = "planning_error"


class PipelineError(EngineError):
    code = "pipeline_error"


class ShardError(EngineError):
    code = "shard_error"


class ShardChecksumError(ShardError):
    code = "shard_checksum_error"


class ShardVersionError(ShardError):
    code = "shard_version_error"


class ConfigError(EngineError):
    code = "config_error"
