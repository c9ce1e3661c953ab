"""Rotation helpers shared by the hand model, optimizer, and planner.

The root orientation convention everywhere in this package is intrinsic
x-y-z Euler angles: ``R = Rx(a) @ Ry(b) @ Rz(c)``, matching a simulator
root built from three revolute joints stacked x, then y, then z.
"""

import numpy as np


def euler_to_matrix(euler):
    """Rotation matrix for intrinsic x-y-z Euler angles ``(a, b, c)``."""
    a, b, c = float(euler[0]), float(euler[1]), float(euler[2])
    sa, ca = np.sin(a), np.cos(a)
    sb, cb = np.sin(b), np.cos(b)
    sc, cc = np.sin(c), np.cos(c)
    return np.array([
        [cb * cc, -cb * sc, sb],
        [sa * sb * cc + ca * sc, -sa * sb * sc + ca * cc, -sa * cb],
        [-ca * sb * cc + sa * sc, ca * sb * sc + sa * cc, ca * cb],
    ])


def matrix_to_euler(R):
    """Intrinsic x-y-z Euler angles of ``R``; pitch folded into [-pi/2, pi/2].

    At the gimbal singularity (|R[0,2]| = 1) the roll is set to zero and
    the yaw absorbs the remaining rotation.
    """
    R = np.asarray(R, dtype=float)
    sb = np.clip(R[0, 2], -1.0, 1.0)
    b = np.arcsin(sb)
    if abs(sb) < 1.0 - 1e-10:
        a = np.arctan2(-R[1, 2], R[2, 2])
        c = np.arctan2(-R[0, 1], R[0, 0])
    else:
        a = 0.0
        c = np.arctan2(R[1, 0], R[1, 1])
        if sb < 0.0:
            c = -c
    return np.array([a, b, c])


def euler_to_matrix_batch(eulers):
    """Vectorized :func:`euler_to_matrix` for an (N, 3) array."""
    e = np.asarray(eulers, dtype=float)
    sa, ca = np.sin(e[:, 0]), np.cos(e[:, 0])
    sb, cb = np.sin(e[:, 1]), np.cos(e[:, 1])
    sc, cc = np.sin(e[:, 2]), np.cos(e[:, 2])
    R = np.empty((e.shape[0], 3, 3))
    R[:, 0, 0] = cb * cc
    R[:, 0, 1] = -cb * sc
    R[:, 0, 2] = sb
    R[:, 1, 0] = sa * sb * cc + ca * sc
    R[:, 1, 1] = -sa * sb * sc + ca * cc
    R[:, 1, 2] = -sa * cb
    R[:, 2, 0] = -ca * sb * cc + sa * sc
    R[:, 2, 1] = ca * sb * sc + sa * cc
    R[:, 2, 2] = ca * cb
    return R


def euler_derivatives_batch(eulers):
    """Per-angle derivative matrices dR/da, dR/db, dR/dc for (N, 3) input.

    Returns an (N, 3, 3, 3) array indexed [sample, angle, row, col].
    """
    e = np.asarray(eulers, dtype=float)
    n = e.shape[0]
    sa, ca = np.sin(e[:, 0]), np.cos(e[:, 0])
    sb, cb = np.sin(e[:, 1]), np.cos(e[:, 1])
    sc, cc = np.sin(e[:, 2]), np.cos(e[:, 2])
    d = np.zeros((n, 3, 3, 3))
    # dR/da: only rows 1 and 2 depend on a
    d[:, 0, 1, 0] = ca * sb * cc - sa * sc
    d[:, 0, 1, 1] = -ca * sb * sc - sa * cc
    d[:, 0, 1, 2] = -ca * cb
    d[:, 0, 2, 0] = sa * sb * cc + ca * sc
    d[:, 0, 2, 1] = -sa * sb * sc + ca * cc
    d[:, 0, 2, 2] = -sa * cb
    # dR/db
    d[:, 1, 0, 0] = -sb * cc
    d[:, 1, 0, 1] = sb * sc
    d[:, 1, 0, 2] = cb
    d[:, 1, 1, 0] = sa * cb * cc
    d[:, 1, 1, 1] = -sa * cb * sc
    d[:, 1, 1, 2] = sa * sb
    d[:, 1, 2, 0] = -ca * cb * cc
    d[:, 1, 2, 1] = ca * cb * sc
    d[:, 1, 2, 2] = -ca * sb
    # dR/dc
    d[:, 2, 0, 0] = -cb * sc
    d[:, 2, 0, 1] = -cb * cc
    d[:, 2, 1, 0] = -sa * sb * sc + ca * cc
    d[:, 2, 1, 1] = -sa * sb * cc - ca * sc
    d[:, 2, 2, 0] = ca * sb * sc + sa * cc
    d[:, 2, 2, 1] = ca * sb * cc - sa * sc
    return d


def axis_angle_matrix(axis, angle):
    """Rodrigues rotation about a unit ``axis`` by ``angle`` radians."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = axis / n
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def align_vectors(a, b):
    """Smallest rotation carrying unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        ortho = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            ortho = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, ortho)
        return axis_angle_matrix(axis, np.pi)
    K = np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])
    return np.eye(3) + K + K @ K / (1.0 + c)


def rotation_angle(R):
    """Rotation angle of ``R`` in [0, pi]."""
    tr = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    return float(np.arccos(tr))


def is_rotation_matrix(R, tol=1e-6):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def cross_matrix(x):
    """Skew-symmetric matrix [x]_x with [x]_x @ y = x cross y."""
    return np.array([
        [0.0, -x[2], x[1]],
        [x[2], 0.0, -x[0]],
        [-x[1], x[0], 0.0],
    ])
