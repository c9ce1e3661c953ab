"""Generative grasp-proposal model over sharded demonstration datasets.

Trains a conditional VAE on demonstration records (point-cloud encoder
for object context, local point features for conditioning) and samples
new pose proposals back into the shared shard format.
"""

__version__ = "0.1.0"

from .cvae import LatentSample, PoseCVAE, extras_vector
from .encoder import PointEncoder, resample_cloud
from .errors import (CheckpointError, ConfigError, DimensionError, GenError,
                     ShardChecksumError, ShardError, ShardVersionError)
from .handkin import HandKinematics, euler_matrix
from .losses import (clearance_loss, contact_distance_loss, kl_loss,
                     mean_sphere_penetration, reconstruction_loss,
                     smoothness_loss)
from .records import (MAX_RECORDS, SHARD_MAGIC, SHARD_VERSION, STAGES, TASKS,
                      Metrics, PoseRecord, TrajectoryData, config_hash,
                      read_shard, read_shard_header, write_shard)
from .sample import sample_poses, sample_proposals
from .train import (Checkpoint, ProposalDataset, TrainConfig,
                    load_checkpoint, train)

__all__ = [
    "__version__",
    "LatentSample", "PoseCVAE", "extras_vector",
    "PointEncoder", "resample_cloud",
    "CheckpointError", "ConfigError", "DimensionError", "GenError",
    "ShardChecksumError", "ShardError", "ShardVersionError",
    "HandKinematics", "euler_matrix",
    "clearance_loss", "contact_distance_loss", "kl_loss",
    "mean_sphere_penetration", "reconstruction_loss", "smoothness_loss",
    "MAX_RECORDS", "SHARD_MAGIC", "SHARD_VERSION", "STAGES", "TASKS",
    "Metrics", "PoseRecord", "TrajectoryData", "config_hash",
    "read_shard", "read_shard_header", "write_shard",
    "sample_poses", "sample_proposals",
    "Checkpoint", "ProposalDataset", "TrainConfig", "load_checkpoint",
    "train",
]
