"""Permutation-invariant point cloud encoder.

A shared per-point MLP (3 -> 64 -> 128 -> 1024) followed by a max-pool
over points yields a global feature; separate linear heads project the
pooled vector to the 256-dim object feature and the concatenation of
per-point and pooled features to 256-dim local features. Max-pooling
makes the object feature exactly invariant to point order and to point
duplication.
"""

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, DimensionError

FEATURE_DIM = 256
TRUNK_DIMS = (3, 64, 128, 1024)


class PointEncoder(nn.Module):
    def __init__(self, feature_dim=FEATURE_DIM):
        super().__init__()
        layers = []
        for d_in, d_out in zip(TRUNK_DIMS[:-1], TRUNK_DIMS[1:]):
            layers.append(nn.Linear(d_in, d_out))
            layers.append(nn.ReLU())
        self.trunk = nn.Sequential(*layers[:-1])  # no ReLU before the pool
        self.global_head = nn.Linear(TRUNK_DIMS[-1], feature_dim)
        self.point_head = nn.Linear(2 * TRUNK_DIMS[-1], feature_dim)
        self.feature_dim = feature_dim

    def forward(self, cloud):
        """(B, N, 3) -> object features (B, 256), point features
        (B, N, 256), and the pooled trunk vector (B, 1024)."""
        if cloud.ndim != 3 or cloud.shape[-1] != 3:
            raise DimensionError(
                f"cloud shape {tuple(cloud.shape)} is not (B, N, 3)")
        if cloud.shape[1] == 0:
            raise DimensionError("cloud has no points")
        per_point = self.trunk(cloud)  # (B, N, 1024)
        pooled = per_point.amax(dim=1)  # (B, 1024)
        f_obj = self.global_head(pooled)
        expanded = pooled[:, None, :].expand_as(per_point)
        f_points = self.point_head(
            torch.cat([per_point, expanded], dim=-1))
        return f_obj, f_points, pooled

    def point_features(self, pooled, points):
        """Local features (B, P, 256) of arbitrary query points against
        an already-pooled trunk vector (B, 1024)."""
        per_point = self.trunk(points)
        expanded = pooled[:, None, :].expand(
            points.shape[0], points.shape[1], pooled.shape[-1])
        return self.point_head(torch.cat([per_point, expanded], dim=-1))


def resample_cloud(points, count, seed=0):
    """Deterministically resample a cloud to exactly ``count`` points
    (without replacement when possible, with replacement otherwise)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionError(
            f"cloud shape {points.shape} is not (N, 3)")
    if points.shape[0] == 0:
        raise DimensionError("cloud has no points")
    if count < 1:
        raise ConfigError("resample count must be positive")
    if points.shape[0] == count:
        return points.copy()
    rng = np.random.default_rng(seed)
    idx = rng.choice(points.shape[0], size=count,
                     replace=points.shape[0] < count)
    return points[idx]
