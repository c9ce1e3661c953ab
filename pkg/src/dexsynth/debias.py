"""Frequency-balanced condition sampling over object surface points.

Each generated pose is associated with one surface point of its target
object by casting the hand's heading ray from the palm center. Counts
over a fixed per-object point vocabulary then drive inverse-frequency
sampling, so rarely-hit regions and rarely-hit objects are proposed
more often in later generation rounds.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .geometry import PointCloud, sample_surface
from .hand import forward_kinematics, heading_direction

CONE_HALF_ANGLE = np.deg2rad(20.0)
DEFAULT_POINTS = 512
DEFAULT_ALPHA = 1.0


def _points_hash(points):
    return hashlib.sha256(
        np.ascontiguousarray(points, dtype=np.float64).tobytes()).hexdigest()


@dataclass
class ObjectStats:
    """Fixed surface-point vocabulary with hit counts."""

    points: np.ndarray  # (M, 3), immutable by convention
    counts: np.ndarray = None  # (M,) int64

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise DimensionError("object points must be a nonempty (M, 3) "
                                 "array")
        self.points = points
        if self.counts is None:
            self.counts = np.zeros(len(points), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64).copy()
            if self.counts.shape != (len(points),):
                raise DimensionError("counts length does not match points")
            if np.any(self.counts < 0):
                raise ConfigError("counts must be nonnegative")

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class DebiasStats:
    """Per-object association statistics with add-alpha smoothing."""

    alpha: float = DEFAULT_ALPHA
    objects: dict = field(default_factory=dict)  # id -> ObjectStats

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ConfigError("alpha must be nonnegative")

    def register_object(self, object_id, points):
        if object_id in self.objects:
            raise ConfigError(f"object {object_id!r} already registered")
        self.objects[object_id] = ObjectStats(points)

    def register_mesh(self, object_id, mesh, count=DEFAULT_POINTS, seed=0):
        cloud = sample_surface(mesh, count, seed)
        self.register_object(object_id, cloud.points)

    def require(self, object_id):
        if object_id not in self.objects:
            raise ConfigError(f"unknown object {object_id!r}")
        return self.objects[object_id]


def associate_point(pose, model, cloud):
    """Index of the surface point the pose's heading ray selects.

    Points within a 20 degree half-angle cone around the heading,
    looking out from the palm center, compete by distance along the
    ray; when no point falls inside the cone the point nearest to the
    ray itself wins.
    """
    if isinstance(cloud, PointCloud):
        points = cloud.points
    else:
        points = np.ascontiguousarray(cloud, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
        raise DimensionError("cloud must be a nonempty (n, 3) array")

    placed = forward_kinematics(model, pose)
    palm = placed.markers["palm_center"]
    heading = heading_direction(model, pose)

    rel = points - palm[None, :]
    dist = np.linalg.norm(rel, axis=1)
    along = rel @ heading
    cos_angle = np.where(dist > 1e-12, along / np.maximum(dist, 1e-12), 1.0)
    in_cone = cos_angle >= np.cos(CONE_HALF_ANGLE)
    if np.any(in_cone):
        candidates = np.where(in_cone)[0]
        return int(candidates[np.argmin(along[candidates])])
    # fall back to the point nearest the ray; behind the apex the
    # distance is taken to the apex itself
    radial = np.linalg.norm(rel - along[:, None] * heading[None, :], axis=1)
    ray_dist = np.where(along >= 0.0, radial, dist)
    return int(np.argmin(ray_dist))


def update_stats(stats, object_id, point_index):
    """Increment one point's hit count; returns the same stats object."""
    entry = stats.require(object_id)
    idx = int(point_index)
    if not 0 <= idx < len(entry.counts):
        raise ConfigError("point index out of range", index=idx,
                          size=len(entry.counts))
    entry.counts[idx] += 1
    return stats


def sample_conditions(stats, object_id, n, seed):
    """n point indices drawn with probability proportional to
    1/(count + alpha); deterministic per seed."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    entry = stats.require(object_id)
    with np.errstate(divide="ignore"):
        weights = 1.0 / (entry.counts + stats.alpha)
    if np.any(np.isinf(weights)):
        # alpha = 0 with untouched points: all mass on the untouched set
        weights = np.isinf(weights).astype(np.float64)
    total = weights.sum()
    if total <= 0.0:
        raise ConfigError("all sampling weights vanished; use alpha > 0")
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(weights), size=n, p=weights / total)
    return [int(i) for i in draws]


def object_budget(stats, n, seed):
    """Per-object sample budgets proportional to 1/(total + alpha),
    summing exactly to n via largest-remainder rounding."""
    if n < 0:
        raise ConfigError("n must be nonnegative")
    ids = sorted(stats.objects.keys())
    if not ids:
        raise ConfigError("no objects registered")
    with np.errstate(divide="ignore"):
        weights = np.array([1.0 / (stats.objects[i].total + stats.alpha)
                            for i in ids])
    if np.any(np.isinf(weights)):
        weights = np.isinf(weights).astype(np.float64)
    shares = n * weights / weights.sum()
    floors = np.floor(shares).astype(np.int64)
    remainder = int(n - floors.sum())
    fracs = shares - floors
    # seeded permutation breaks exact fractional ties without index bias
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    ranked = sorted(range(len(ids)),
                    key=lambda k: (-fracs[k], int(np.where(order == k)[0][0])))
    budgets = floors.copy()
    for k in ranked[:remainder]:
        budgets[k] += 1
    return {ids[k]: int(budgets[k]) for k in range(len(ids))}


def save_stats(stats, path):
    """Persist counts, point sets, and their hashes as JSON."""
    doc = {"alpha": stats.alpha, "objects": {}}
    for object_id, entry in sorted(stats.objects.items()):
        doc["objects"][object_id] = {
            "points": entry.points.tolist(),
            "points_hash": _points_hash(entry.points),
            "counts": entry.counts.tolist(),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_stats(path):
    """Inverse of save_stats; verifies each point set against its hash."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    stats = DebiasStats(alpha=float(doc["alpha"]))
    for object_id, entry in doc["objects"].items():
        points = np.asarray(entry["points"], dtype=np.float64)
        if _points_hash(points) != entry["points_hash"]:
            raise ConfigError(
                "stats point set does not match its recorded hash",
                object_id=object_id)
        stats.objects[object_id] = ObjectStats(points,
                                               np.asarray(entry["counts"]))
    return stats
