"""Grasp quality and dataset diversity metrics.

Q1 is estimated by sampling unit directions in wrench space and taking
the smallest support value of the contact wrench hull, clamped to zero
when the origin is not inside the hull. The inside test is an
accelerated projected-gradient least-squares feasibility check over the
simplex: when the origin lies outside by more than the tolerance, every
iterate's residual exceeds it, so the verdict is reliable; within the
tolerance the clamped support minimum already lands near zero.
"""

from dataclasses import dataclass

import numpy as np

from .energy import ContactSet, wrench_basis
from .errors import ConfigError, DimensionError
from .geometry import signed_distance_batch, sphere_penetration_batch
from .hand import forward_kinematics

FEASIBLE_MAX_PENETRATION = 0.005
FEASIBLE_MIN_CONTACTS = 2


@dataclass(frozen=True)
class MetricReport:
    """Per-pose quality numbers plus the analytic feasibility proxy.

    ``feasible`` is max_penetration <= 5 mm with at least 2 contacts; it
    is a geometric stand-in, not a simulated success rate.
    """

    q1: float
    max_penetration: float
    contact_count: int
    feasible: bool


def detect_contacts(pose, model, tree, threshold=0.01):
    """Contact candidates within ``threshold`` of the object surface,
    reported at their closest surface points with outward normals."""
    if threshold <= 0.0:
        raise ConfigError("contact threshold must be positive")
    placed = forward_kinematics(model, pose)
    return detect_contacts_from_points(placed.contact_points, tree, threshold)


def detect_contacts_from_points(points, tree, threshold=0.01):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        return ContactSet(np.zeros((0, 3)), np.zeros((0, 3)),
                          np.zeros(0, dtype=np.int64))
    dist, cps, grads = signed_distance_batch(tree, points)
    dist = np.atleast_1d(dist)
    cps = cps.reshape(-1, 3)
    grads = grads.reshape(-1, 3)
    keep = np.abs(dist) <= threshold
    idx = np.where(keep)[0]
    normals = grads[idx]
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.maximum(norms, 1e-12)
    return ContactSet(cps[idx], normals, idx)


def _simplex_project(v):
    """Euclidean projection of one vector onto {x >= 0, sum(x) = 1}."""
    srt = np.sort(v)[::-1]
    css = np.cumsum(srt) - 1.0
    j = np.arange(1, len(v) + 1)
    rho = np.count_nonzero(srt * j > css)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _hull_distance_residual(points, iterations=1500):
    """Approximate min ||sum_j lambda_j p_j|| over the simplex via
    accelerated projected gradient. The result never undershoots the
    true distance from the origin to the hull."""
    J = points.shape[0]
    G = points @ points.T
    lip = max(float(np.linalg.norm(G, 2)), 1e-12)
    step = 1.0 / lip
    lam = np.full(J, 1.0 / J)
    mom = lam.copy()
    t_prev = 1.0
    best = float(np.linalg.norm(points.T @ lam))
    for _ in range(iterations):
        grad = G @ mom
        nxt = _simplex_project(mom - step * grad)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        mom = nxt + ((t_prev - 1.0) / t_next) * (nxt - lam)
        lam, t_prev = nxt, t_next
        val = float(np.linalg.norm(points.T @ lam))
        if val < best:
            best = val
    return best


def q1_estimate(contacts, friction=0.5, edges=8, directions=4096, seed=0,
                origin=None, inside_tolerance=1e-2):
    """Largest-inscribed-ball estimate of the grasp wrench hull.

    Sampled support minimum over unit 6D directions, zero when the
    origin-in-hull feasibility check fails. Random directions alone miss
    thin or flat hulls, so the principal axes of a friction-independent
    reference wrench cloud are always evaluated too; keeping those axes
    independent of the friction coefficient preserves monotonicity of
    the estimate in friction. Deterministic per seed.
    """
    if friction <= 0.0:
        raise ConfigError("friction must be positive")
    if len(contacts) == 0:
        return 0.0
    basis = wrench_basis(contacts, friction=friction, edges=edges,
                         origin=origin)
    W = basis.edge_wrenches.T  # (J, 6) wrench points

    if _hull_distance_residual(W) > inside_tolerance:
        return 0.0

    ref = wrench_basis(contacts, friction=1.0, edges=edges,
                       origin=origin).edge_wrenches.T
    _, _, vt = np.linalg.svd(ref - ref.mean(axis=0), full_matrices=True)
    axes = np.concatenate([vt, -vt])  # (12, 6), unit rows

    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(directions, 6))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    support = (np.concatenate([axes, dirs]) @ W.T).max(axis=1)
    value = float(max(support.min(), 0.0))
    return value if value > 1e-9 else 0.0


def max_penetration(pose, model, tree):
    """Deepest sphere-into-mesh overlap for one pose, in meters."""
    placed = forward_kinematics(model, pose)
    return max_penetration_from_centers(placed.sphere_centers,
                                        model.sphere_radius, tree)


def max_penetration_from_centers(centers, radii, tree):
    pen, _, _ = sphere_penetration_batch(tree, centers, radii)
    return float(pen.max()) if pen.size else 0.0


def joint_entropy(joint_matrix, model, bins=10000):
    """Per-joint natural-log histogram entropy over the joint limits.

    ``joint_matrix`` is (N, d); out-of-limit values clamp into the edge
    bins. Returns (per-joint H, h_mean, h_std).
    """
    if bins < 2:
        raise ConfigError("bins must be at least 2")
    joint_matrix = np.asarray(joint_matrix, dtype=np.float64)
    if joint_matrix.ndim != 2 or joint_matrix.shape[0] == 0:
        raise DimensionError("joint matrix must be (N, d) with N >= 1")
    d = model.dof
    if joint_matrix.shape[1] != d:
        raise DimensionError(
            f"joint matrix has {joint_matrix.shape[1]} columns, expected {d}")
    ent = np.zeros(d)
    for j in range(d):
        lo, hi = model.joint_lower[j], model.joint_upper[j]
        t = (joint_matrix[:, j] - lo) / (hi - lo)
        b = np.clip((t * bins).astype(np.int64), 0, bins - 1)
        counts = np.bincount(b, minlength=bins)
        p = counts / counts.sum()
        nz = p[p > 0]
        ent[j] = float(-(nz * np.log(nz)).sum())
    return ent, float(ent.mean()), float(ent.std())


def entropy_of_poses(poses, model, bins=10000):
    """joint_entropy over a list of HandPose."""
    if not poses:
        raise DimensionError("need at least one pose")
    return joint_entropy(np.stack([p.joints for p in poses]), model, bins)


def evaluate_pose(pose, model, tree, weights_friction=0.5, edges=8,
                  directions=4096, seed=0, contact_threshold=0.01):
    """Full per-pose metric report against one object."""
    contacts = detect_contacts(pose, model, tree, contact_threshold)
    q1 = q1_estimate(contacts, friction=weights_friction, edges=edges,
                     directions=directions, seed=seed)
    pen = max_penetration(pose, model, tree)
    feasible = (pen <= FEASIBLE_MAX_PENETRATION
                and len(contacts) >= FEASIBLE_MIN_CONTACTS)
    return MetricReport(q1=q1, max_penetration=pen,
                        contact_count=len(contacts), feasible=feasible)
