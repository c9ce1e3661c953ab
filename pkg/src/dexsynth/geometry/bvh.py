"""Axis-aligned bounding-volume hierarchy over mesh triangles."""

import numpy as np

from ..errors import MeshError

_LEAF_SIZE = 4


class BvhTree:
    """Binary AABB tree stored as flat arrays for the query kernels.

    ``node_count[i] > 0`` marks a leaf whose triangles are
    ``prim_idx[node_start[i] : node_start[i] + node_count[i]]``.
    """

    def __init__(self, mesh):
        if mesh.num_triangles == 0:
            raise MeshError("cannot build a BVH over an empty mesh",
                            name=mesh.name)
        self.mesh = mesh

        tri_lo = mesh.tri_verts.min(axis=1)
        tri_hi = mesh.tri_verts.max(axis=1)
        centroids = mesh.tri_verts.mean(axis=1)

        node_min, node_max = [], []
        node_left, node_right = [], []
        node_start, node_count = [], []
        order = []

        def emit(indices):
            ni = len(node_min)
            node_min.append(tri_lo[indices].min(axis=0))
            node_max.append(tri_hi[indices].max(axis=0))
            node_left.append(-1)
            node_right.append(-1)
            node_start.append(-1)
            node_count.append(0)
            if len(indices) <= _LEAF_SIZE:
                node_start[ni] = len(order)
                node_count[ni] = len(indices)
                order.extend(indices.tolist())
                return ni
            cent = centroids[indices]
            axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
            split = np.argsort(cent[:, axis], kind="stable")
            half = len(indices) // 2
            left_idx = indices[split[:half]]
            right_idx = indices[split[half:]]
            node_left[ni] = emit(left_idx)
            node_right[ni] = emit(right_idx)
            return ni

        import sys
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 10000))
        try:
            emit(np.arange(mesh.num_triangles))
        finally:
            sys.setrecursionlimit(old_limit)

        self.node_min = np.ascontiguousarray(node_min, dtype=np.float64)
        self.node_max = np.ascontiguousarray(node_max, dtype=np.float64)
        self.node_left = np.ascontiguousarray(node_left, dtype=np.int64)
        self.node_right = np.ascontiguousarray(node_right, dtype=np.int64)
        self.node_start = np.ascontiguousarray(node_start, dtype=np.int64)
        self.node_count = np.ascontiguousarray(node_count, dtype=np.int64)
        self.prim_idx = np.ascontiguousarray(order, dtype=np.int64)

    @property
    def num_nodes(self):
        return len(self.node_min)

    def query_args(self):
        """Array bundle consumed by the numba kernels."""
        return (self.node_min, self.node_max, self.node_left, self.node_right,
                self.node_start, self.node_count, self.prim_idx)


def build_bvh(mesh):
    """Build the acceleration tree for ``mesh``."""
    return BvhTree(mesh)
