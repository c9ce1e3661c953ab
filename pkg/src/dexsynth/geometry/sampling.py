"""Point-cloud container and area-weighted surface sampling."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import MeshError


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise MeshError("point cloud must be a nonempty (n, 3) array")
        object.__setattr__(self, "points", points)
        if self.normals is not None:
            normals = np.ascontiguousarray(self.normals, dtype=np.float64)
            if normals.shape != points.shape:
                raise MeshError("normals must match points in shape")
            lengths = np.linalg.norm(normals, axis=1)
            if np.abs(lengths - 1.0).max() > 1e-6:
                raise MeshError("normals must be unit length")
            object.__setattr__(self, "normals", normals)

    def __len__(self):
        return len(self.points)


def sample_surface(mesh, count, seed):
    """Area-weighted uniform surface samples with outward face normals.

    Deterministic for a fixed seed; triangles are chosen proportionally
    to area and points uniformly inside each chosen triangle.
    """
    if count < 1:
        raise MeshError("sample count must be >= 1", count=count)
    if mesh.num_triangles == 0:
        raise MeshError("cannot sample an empty mesh", name=mesh.name)
    rng = np.random.default_rng(seed)
    weights = mesh.areas / mesh.areas.sum()
    tri_idx = rng.choice(mesh.num_triangles, size=count, p=weights)
    uv = rng.random((count, 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]
    tv = mesh.tri_verts[tri_idx]
    points = (tv[:, 0]
              + uv[:, :1] * (tv[:, 1] - tv[:, 0])
              + uv[:, 1:] * (tv[:, 2] - tv[:, 0]))
    normals = mesh.face_normals[tri_idx]
    return PointCloud(points=points, normals=normals)
