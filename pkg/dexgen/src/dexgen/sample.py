"""Conditioned proposal generation from a trained checkpoint.

Draws standard-normal latents, decodes them against the object feature
plus the local feature of each requested condition point, clamps joints
into their limits, and packages the poses as shard records.
"""

import numpy as np
import torch

from . import __version__
from .cvae import extras_vector
from .encoder import resample_cloud
from .errors import ConfigError, DimensionError
from .handkin import HandKinematics
from .records import PoseRecord
from .train import build_models, context_dim_for


def _load_models(checkpoint):
    encoder, cvae = build_models(checkpoint.pose_dim,
                                 checkpoint.context_dim)
    encoder.load_state_dict(checkpoint.encoder_state)
    cvae.load_state_dict(checkpoint.cvae_state)
    encoder.eval()
    cvae.eval()
    return encoder, cvae


def sample_poses(checkpoint, cloud, condition_indices, seed,
                 rotation=None, translation=None, joints=None):
    """Decode one pose vector per condition index; returns the (n,
    pose_dim) array with joints clamped into their limits."""
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.ndim != 2 or cloud.shape[1] != 3 or cloud.shape[0] == 0:
        raise DimensionError("cloud must be a nonempty (N, 3) array")
    indices = np.asarray(condition_indices, dtype=np.int64).reshape(-1)
    if indices.size == 0:
        return np.zeros((0, checkpoint.pose_dim))
    if indices.min() < 0 or indices.max() >= cloud.shape[0]:
        raise ConfigError(
            f"condition indices must lie in [0, {cloud.shape[0]})")

    hand = HandKinematics(checkpoint.hand_document)
    encoder, cvae = _load_models(checkpoint)
    n = indices.size
    with torch.no_grad():
        encoded = torch.from_numpy(resample_cloud(
            cloud, checkpoint.config.num_points, seed=seed))[None]
        f_obj, _, pooled = encoder(encoded)
        points = torch.from_numpy(cloud[indices])[None]
        f_p = encoder.point_features(pooled, points)[0]
        extras = extras_vector(n, checkpoint.dof, rotation=rotation,
                               translation=translation, joints=joints,
                               dtype=torch.float64)
        context = torch.cat(
            [f_obj.expand(n, -1), f_p, extras], dim=-1)
        draw = torch.Generator().manual_seed(seed)
        z = torch.randn(n, cvae.latent_dim, dtype=torch.float64,
                        generator=draw)
        decoded = cvae.decode(z, context)
        frames = decoded.reshape(n, -1, 6 + checkpoint.dof)
        clamped = torch.cat(
            [frames[:, :, :6],
             hand.clamp_joints(frames[:, :, 6:])], dim=-1)
    return clamped.reshape(n, -1).numpy()


def sample_proposals(checkpoint, cloud, condition_indices, n, seed,
                     object_path="object", object_scale=1.0, task="grasp"):
    """n proposal records conditioned on the given vocabulary indices
    (cycled to length n); deterministic per seed."""
    if n < 0:
        raise ConfigError("n must be nonnegative")
    indices = np.asarray(condition_indices, dtype=np.int64).reshape(-1)
    if n > 0 and indices.size == 0:
        raise ConfigError("no condition indices to sample from")
    indices = indices[np.arange(n) % indices.size] if n else indices[:0]
    poses = sample_poses(checkpoint, cloud, indices, seed)
    generator = f"gen-iter-{checkpoint.iteration}"
    records = []
    for i in range(n):
        keyframe = poses[i, :6 + checkpoint.dof]
        records.append(PoseRecord(
            task=task, object_path=object_path,
            object_scale=float(object_scale), keyframe=keyframe,
            dof=checkpoint.dof, condition_index=int(indices[i]),
            generator=generator, seed=int(seed),
            engine=f"dexgen {__version__}"))
    return records
