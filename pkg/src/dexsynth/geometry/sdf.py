"""Signed-distance and closest-point queries against a BVH-indexed mesh."""

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class SdfResult:
    """One signed-distance query: inside is negative, gradient points
    toward increasing distance and is unit length away from the surface."""

    distance: float
    closest_point: np.ndarray
    gradient: np.ndarray


def signed_distance_batch(tree, points):
    """Signed distances for an (n, 3) query array.

    Returns (distances, closest_points, gradients) as arrays.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    squeeze = points.ndim == 1
    if squeeze:
        points = points[None]
    mesh = tree.mesh
    dist, cps, grads = _kernels.bvh_signed_distance_batch(
        points, mesh.tri_verts, mesh.triangles, mesh.face_normals,
        mesh.edge_pseudonormals, mesh.vertex_pseudonormals,
        *tree.query_args())
    if squeeze:
        return dist[0], cps[0], grads[0]
    return dist, cps, grads


def signed_distance(tree, query):
    """Signed distance from one point to the mesh surface."""
    d, cp, g = signed_distance_batch(tree, np.asarray(query, dtype=np.float64))
    return SdfResult(distance=float(d), closest_point=cp, gradient=g)


def closest_point_batch(tree, points):
    """Unsigned distance and closest surface point for an (n, 3) array."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _kernels.bvh_closest_point_batch(points, tree.mesh.tri_verts,
                                            *tree.query_args())


def sphere_penetration(tree, center, radius):
    """Depth by which a sphere overlaps the mesh interior region.

    max(radius - SDF(center), 0): zero when the surface stays farther
    than one radius away from the center.
    """
    if radius <= 0.0:
        raise ValueError("sphere radius must be positive")
    res = signed_distance(tree, center)
    return max(radius - res.distance, 0.0)


def sphere_penetration_batch(tree, centers, radii):
    """Clamped per-sphere penetrations plus SDF gradients for reuse."""
    dist, _, grads = signed_distance_batch(tree, centers)
    pen = np.maximum(np.asarray(radii, dtype=np.float64) - dist, 0.0)
    return pen, dist, grads
