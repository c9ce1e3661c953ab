"""Numba kernels for point-triangle and BVH closest-point queries.

All kernels operate on flat float64/int64 arrays so the mesh and tree
objects stay plain numpy containers. Feature codes returned by the
closest-point routine: 0..2 = vertex slot, 3..5 = edge slot (3 is the
edge v0-v1, 4 is v1-v2, 5 is v2-v0), 6 = face interior.
"""

import numpy as np
from numba import njit

FEATURE_FACE = 6


@njit(cache=True)
def closest_point_triangle(a, b, c, p):
    """Closest point on triangle (a, b, c) to p, with the feature hit.

    Returns (point, feature_code). Region tests follow Ericson,
    "Real-Time Collision Detection", 5.1.5.
    """
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = ab[0] * ap[0] + ab[1] * ap[1] + ab[2] * ap[2]
    d2 = ac[0] * ap[0] + ac[1] * ap[1] + ac[2] * ap[2]
    if d1 <= 0.0 and d2 <= 0.0:
        return a.copy(), 0

    bp = p - b
    d3 = ab[0] * bp[0] + ab[1] * bp[1] + ab[2] * bp[2]
    d4 = ac[0] * bp[0] + ac[1] * bp[1] + ac[2] * bp[2]
    if d3 >= 0.0 and d4 <= d3:
        return b.copy(), 1

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        denom = d1 - d3
        if denom != 0.0:
            v = d1 / denom
        else:
            v = 0.0
        return a + v * ab, 3

    cp = p - c
    d5 = ab[0] * cp[0] + ab[1] * cp[1] + ab[2] * cp[2]
    d6 = ac[0] * cp[0] + ac[1] * cp[1] + ac[2] * cp[2]
    if d6 >= 0.0 and d5 <= d6:
        return c.copy(), 2

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        denom = d2 - d6
        if denom != 0.0:
            w = d2 / denom
        else:
            w = 0.0
        return a + w * ac, 5

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        if denom != 0.0:
            w = (d4 - d3) / denom
        else:
            w = 0.0
        return b + w * (c - b), 4

    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return a + ab * v + ac * w, FEATURE_FACE


@njit(cache=True)
def _box_dist2(lo, hi, p):
    d2 = 0.0
    for k in range(3):
        if p[k] < lo[k]:
            d = lo[k] - p[k]
            d2 += d * d
        elif p[k] > hi[k]:
            d = p[k] - hi[k]
            d2 += d * d
    return d2


@njit(cache=True)
def bvh_closest_point(
    point,
    tri_verts,
    node_min,
    node_max,
    node_left,
    node_right,
    node_start,
    node_count,
    prim_idx,
):
    """Nearest surface point on the mesh behind a BVH.

    Returns (dist2, closest_point, tri_index, feature_code).
    """
    best_d2 = np.inf
    best_cp = np.zeros(3)
    best_tri = -1
    best_feat = -1

    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1

    while top > 0:
        top -= 1
        ni = stack[top]
        if _box_dist2(node_min[ni], node_max[ni], point) >= best_d2:
            continue
        cnt = node_count[ni]
        if cnt > 0:
            start = node_start[ni]
            for k in range(start, start + cnt):
                t = prim_idx[k]
                cp, feat = closest_point_triangle(
                    tri_verts[t, 0], tri_verts[t, 1], tri_verts[t, 2], point
                )
                dx = point[0] - cp[0]
                dy = point[1] - cp[1]
                dz = point[2] - cp[2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best_d2:
                    best_d2 = d2
                    best_cp = cp
                    best_tri = t
                    best_feat = feat
        else:
            l = node_left[ni]
            r = node_right[ni]
            dl = _box_dist2(node_min[l], node_max[l], point)
            dr = _box_dist2(node_min[r], node_max[r], point)
            # push the farther child first so the nearer is popped first
            if dl <= dr:
                if dr < best_d2:
                    stack[top] = r
                    top += 1
                if dl < best_d2:
                    stack[top] = l
                    top += 1
            else:
                if dl < best_d2:
                    stack[top] = l
                    top += 1
                if dr < best_d2:
                    stack[top] = r
                    top += 1

    return best_d2, best_cp, best_tri, best_feat


@njit(cache=True)
def bvh_signed_distance_batch(
    points,
    tri_verts,
    triangles,
    face_normals,
    edge_normals,
    vertex_normals,
    node_min,
    node_max,
    node_left,
    node_right,
    node_start,
    node_count,
    prim_idx,
):
    """Signed distance, closest point, and gradient for many query points.

    The sign comes from the angle-weighted pseudonormal of the closest
    feature; the gradient points in the direction of increasing distance
    and falls back to that pseudonormal for on-surface queries.
    """
    n = points.shape[0]
    dist = np.empty(n)
    cps = np.empty((n, 3))
    grads = np.empty((n, 3))
    for i in range(n):
        p = points[i]
        d2, cp, tri, feat = bvh_closest_point(
            p, tri_verts, node_min, node_max, node_left, node_right,
            node_start, node_count, prim_idx,
        )
        if feat < 3:
            nrm = vertex_normals[triangles[tri, feat]]
        elif feat < 6:
            nrm = edge_normals[tri, feat - 3]
        else:
            nrm = face_normals[tri]
        dx = p[0] - cp[0]
        dy = p[1] - cp[1]
        dz = p[2] - cp[2]
        d = np.sqrt(d2)
        inside = dx * nrm[0] + dy * nrm[1] + dz * nrm[2] < 0.0
        if d > 0.0:
            if inside:
                dist[i] = -d
                grads[i, 0] = -dx / d
                grads[i, 1] = -dy / d
                grads[i, 2] = -dz / d
            else:
                dist[i] = d
                grads[i, 0] = dx / d
                grads[i, 1] = dy / d
                grads[i, 2] = dz / d
        else:
            dist[i] = 0.0
            grads[i, 0] = nrm[0]
            grads[i, 1] = nrm[1]
            grads[i, 2] = nrm[2]
        cps[i, 0] = cp[0]
        cps[i, 1] = cp[1]
        cps[i, 2] = cp[2]
    return dist, cps, grads


@njit(cache=True)
def bvh_closest_point_batch(
    points,
    tri_verts,
    node_min,
    node_max,
    node_left,
    node_right,
    node_start,
    node_count,
    prim_idx,
):
    """Unsigned closest-point query for many points: (dist, cp, tri)."""
    n = points.shape[0]
    dist = np.empty(n)
    cps = np.empty((n, 3))
    tris = np.empty(n, dtype=np.int64)
    for i in range(n):
        d2, cp, tri, feat = bvh_closest_point(
            points[i], tri_verts, node_min, node_max, node_left, node_right,
            node_start, node_count, prim_idx,
        )
        dist[i] = np.sqrt(d2)
        cps[i, 0] = cp[0]
        cps[i, 1] = cp[1]
        cps[i, 2] = cp[2]
        tris[i] = tri
    return dist, cps, tris
