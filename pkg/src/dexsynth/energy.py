"""Differentiable energies for grasp synthesis and their analytic gradients.

Terms: force closure ||Gc||, task-wrench residual, contact distance,
sphere penetration, joint-limit hinges, self-collision hinges, and
trajectory smoothness. Gradients are with respect to the pose layout
(translation, Euler angles, joints) used by HandPose.as_vector().

Committed interpretation of the task-wrench term: K target wrenches are
sampled from the articulation spec and each is approximated by a
nonnegative combination (coefficients summing to at most 1) of
friction-cone edge wrenches at the contacts; the energy is the mean
residual norm. The solver is projected gradient descent with a fixed
iteration count, so the term is deterministic for a fixed seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, PlanningError
from .geometry import signed_distance_batch, sphere_penetration_batch
from .hand import forward_kinematics_batch, pose_jacobians_batch

TASKS = ("grasp", "articulation", "post")


@dataclass(frozen=True)
class EnergyWeights:
    """Term weights and contact-model constants."""

    w_sdf: float = 100.0
    w_dis: float = 100.0
    w_joint: float = 1.0
    w_self: float = 10.0
    w_smooth: float = 1.0
    self_margin: float = 0.02
    friction: float = 0.5
    n_contacts: int = 4
    cone_half_angle: float = math.pi / 12.0
    tws_targets: int = 32
    cone_edges: int = 8
    tws_iterations: int = 60

    def __post_init__(self):
        for name in ("w_sdf", "w_dis", "w_joint", "w_self", "w_smooth"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.self_margin <= 0.0:
            raise ConfigError("self_margin must be positive")
        if self.friction <= 0.0:
            raise ConfigError("friction must be positive")
        if self.n_contacts < 1:
            raise ConfigError("n_contacts must be at least 1")


@dataclass(frozen=True)
class ContactSet:
    """Contact points with outward object normals at their closest
    surface points, plus indices into the hand's candidate list."""

    points: np.ndarray  # (n, 3)
    normals: np.ndarray  # (n, 3) unit
    indices: np.ndarray  # (n,)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if pts.shape[0] != nrm.shape[0] or pts.shape[0] != idx.shape[0]:
            raise DimensionError("contact arrays must have matching lengths")
        lengths = np.linalg.norm(nrm, axis=1)
        if pts.shape[0] and np.any(np.abs(lengths - 1.0) > 1e-6):
            raise DimensionError("contact normals must be unit length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class ArticulationSpec:
    """Target motion of an articulated part: one joint axis in world
    coordinates. ``cone_half_angle`` shapes prismatic target forces."""

    kind: str  # "revolute" or "prismatic"
    axis: np.ndarray
    origin: np.ndarray
    cone_half_angle: float = math.pi / 12.0

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise ConfigError(f"unknown articulation kind '{self.kind}'")
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            raise ConfigError("articulation axis has zero length")
        object.__setattr__(self, "axis", axis / norm)
        object.__setattr__(self, "origin",
                           np.asarray(self.origin, dtype=np.float64).reshape(3))
        if not 0.0 < self.cone_half_angle < math.pi / 2.0:
            raise ConfigError("cone_half_angle must be in (0, pi/2)")


@dataclass(frozen=True)
class Scene:
    """Grasp target plus optional obstacles. The first tree is the
    object: contacts and distances are measured against it, while
    penetration sums over every mesh in the scene."""

    object_tree: object  # BvhTree
    obstacle_trees: tuple = ()
    articulation: ArticulationSpec = None

    @property
    def trees(self):
        return (self.object_tree,) + tuple(self.obstacle_trees)


@dataclass(frozen=True)
class EnergyReport:
    """Weighted total, raw per-term values, and the pose gradient."""

    total: float
    terms: dict
    gradient: np.ndarray
    contacts: ContactSet


@dataclass(frozen=True)
class WrenchBasis:
    """Grasp matrix G = [I ... ; [x_1]x ...] plus the wrench images of
    friction-cone edge directions (torques about ``origin``)."""

    grasp_matrix: np.ndarray  # (6, 3n)
    edge_forces: np.ndarray  # (n, m, 3)
    edge_wrenches: np.ndarray  # (6, n*m)
    origin: np.ndarray


def _tangent_basis(normals):
    """Orthonormal (u, v) pairs spanning each normal's tangent plane."""
    n = normals
    helper = np.zeros_like(n)
    smallest = np.argmin(np.abs(n), axis=1)
    helper[np.arange(len(n)), smallest] = 1.0
    u = np.cross(n, helper)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(n, u)
    return u, v


def wrench_basis(contacts, friction=0.5, edges=8, origin=None):
    """Build the grasp matrix and friction-cone edge wrenches."""
    pts = contacts.points
    nrm = contacts.normals
    n = len(contacts)
    origin = (np.zeros(3) if origin is None
              else np.asarray(origin, dtype=np.float64).reshape(3))

    G = np.zeros((6, 3 * n))
    for i, x in enumerate(pts):
        G[:3, 3 * i:3 * i + 3] = np.eye(3)
        G[3:, 3 * i:3 * i + 3] = np.array([
            [0.0, -x[2], x[1]],
            [x[2], 0.0, -x[0]],
            [-x[1], x[0], 0.0],
        ])

    u, v = _tangent_basis(nrm)
    ang = 2.0 * np.pi * np.arange(edges) / edges
    tang = (np.cos(ang)[None, :, None] * u[:, None, :]
            + np.sin(ang)[None, :, None] * v[:, None, :])  # (n, m, 3)
    forces = -nrm[:, None, :] + friction * tang  # pushing into the surface
    arms = pts - origin
    torques = np.cross(np.broadcast_to(arms[:, None, :], forces.shape), forces)
    wrenches = np.concatenate([forces, torques], axis=2)  # (n, m, 6)
    return WrenchBasis(G, forces, wrenches.reshape(-1, 6).T, origin)


def force_closure(contacts):
    """||Gc||_2 and its gradient with respect to the contact points.

    Normals are treated as constants; the gradient flows through the
    torque rows only.
    """
    vals, grads = force_closure_batch(contacts.points[None],
                                      contacts.normals[None])
    return float(vals[0]), grads[0]


def force_closure_batch(points, normals):
    """Force-closure values (B,) and point gradients (B, n, 3)."""
    f = normals.sum(axis=1)  # (B, 3)
    tau = np.cross(points, normals).sum(axis=1)  # (B, 3)
    val = np.sqrt((f * f).sum(axis=1) + (tau * tau).sum(axis=1))
    safe = np.maximum(val, 1e-12)[:, None]
    grads = np.cross(normals, (tau / safe)[:, None, :])
    grads[val < 1e-12] = 0.0
    return val, grads


def sample_target_wrenches(spec, count, rng):
    """Target wrenches (count, 6) for an articulation move.

    Revolute: unit torque along the axis, force uniform in the unit
    ball. Prismatic: unit force uniform in the cone about the axis,
    zero torque. Torques are about the spec origin.
    """
    out = np.zeros((count, 6))
    if spec.kind == "revolute":
        raw = rng.normal(size=(count, 3))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        radii = rng.uniform(0.0, 1.0, size=count) ** (1.0 / 3.0)
        out[:, :3] = raw * radii[:, None]
        out[:, 3:] = spec.axis
    else:
        cos_min = math.cos(spec.cone_half_angle)
        cos_t = rng.uniform(cos_min, 1.0, size=count)
        sin_t = np.sqrt(np.maximum(1.0 - cos_t ** 2, 0.0))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
        u, v = _tangent_basis(spec.axis[None])
        out[:, :3] = (cos_t[:, None] * spec.axis[None]
                      + sin_t[:, None] * (np.cos(phi)[:, None] * u
                                          + np.sin(phi)[:, None] * v))
    return out


def _project_capped_simplex(lam):
    """Euclidean projection of each row onto {x >= 0, sum(x) <= 1}."""
    clipped = np.maximum(lam, 0.0)
    over = clipped.sum(axis=1) > 1.0
    if np.any(over):
        rows = lam[over]
        srt = np.sort(rows, axis=1)[:, ::-1]
        css = np.cumsum(srt, axis=1) - 1.0
        j = np.arange(1, rows.shape[1] + 1)
        rho = np.count_nonzero(srt * j > css, axis=1)
        theta = css[np.arange(len(rows)), rho - 1] / rho
        clipped[over] = np.maximum(rows - theta[:, None], 0.0)
    return clipped


def _nnls_capped(columns, targets, iterations):
    """Projected-gradient least squares: min ||A x - w|| over the capped
    simplex. ``columns`` is (6, J), ``targets`` is (K, 6). Returns
    coefficients (K, J) and residuals (K, 6)."""
    A = columns
    K = targets.shape[0]
    J = A.shape[1]
    AtA = A.T @ A
    Atw = targets @ A  # (K, J)
    lip = np.linalg.norm(A, 2) ** 2
    step = 1.0 / max(lip, 1e-12)
    lam = np.zeros((K, J))
    for _ in range(iterations):
        grad = lam @ AtA - Atw
        lam = _project_capped_simplex(lam - step * grad)
    resid = lam @ A.T - targets
    return lam, resid


def task_wrench(contacts, spec, weights, seed, targets=None):
    """Mean residual of approximating sampled target wrenches with the
    contacts' friction-cone edge wrenches. Returns (value, point_grads).

    ``targets`` overrides sampling so batched callers can share one
    draw across poses.
    """
    if len(contacts) < 1:
        raise DimensionError("task wrench needs at least one contact")
    if targets is None:
        rng = np.random.default_rng(seed)
        targets = sample_target_wrenches(spec, weights.tws_targets, rng)
    basis = wrench_basis(contacts, friction=weights.friction,
                         edges=weights.cone_edges, origin=spec.origin)
    lam, resid = _nnls_capped(basis.edge_wrenches, targets,
                              weights.tws_iterations)
    K = targets.shape[0]
    norms = np.linalg.norm(resid, axis=1)
    value = float(norms.mean())

    # d||r||/dx_i through the torque rows, coefficients held fixed.
    safe = np.maximum(norms, 1e-12)[:, None]
    rhat_tau = np.where(norms[:, None] < 1e-12, 0.0, resid[:, 3:] / safe)
    n, m = basis.edge_forces.shape[:2]
    lam = lam.reshape(K, n, m)
    cross = np.cross(basis.edge_forces[None], rhat_tau[:, None, None, :])
    grads = (lam[..., None] * cross).sum(axis=(0, 2)) / K
    return value, grads


def contact_distance(points, tree):
    """Sum of unsigned distances from points to the mesh surface."""
    vals, grads, _ = _contact_distance_full(points, tree)
    return float(vals.sum()), grads


def _contact_distance_full(points, tree):
    dist, cps, sgrad = signed_distance_batch(tree, points)
    dist = np.atleast_1d(dist)
    unsigned = np.abs(dist)
    diff = points.reshape(-1, 3) - cps.reshape(-1, 3)
    safe = np.maximum(unsigned, 1e-12)
    grads = diff / safe.reshape(-1, 1)
    grads[unsigned < 1e-12] = 0.0
    return unsigned, grads, sgrad


def penetration_energy(centers, radii, trees):
    """Sphere-into-mesh depth, summed over spheres and meshes."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    radii = np.asarray(radii, dtype=np.float64).ravel()
    total = 0.0
    grads = np.zeros_like(centers)
    for tree in trees:
        pen, _, sgrad = sphere_penetration_batch(tree, centers, radii)
        total += float(pen.sum())
        active = pen > 0.0
        grads[active] -= sgrad[active]
    return total, grads


def joint_limit_energy(theta, model):
    """Hinge penalty on interior joint limits."""
    theta = np.asarray(theta, dtype=np.float64)
    over = np.maximum(theta - model.joint_upper, 0.0)
    under = np.maximum(model.joint_lower - theta, 0.0)
    grad = np.where(theta > model.joint_upper, 1.0, 0.0)
    grad -= np.where(theta < model.joint_lower, 1.0, 0.0)
    return float((over + under).sum()), grad


def self_collision_energy(spheres_world, model, margin=0.02):
    """Hinge penalty when sphere surfaces on non-adjacent links come
    closer than ``margin``."""
    value, grads = _self_collision_batch(spheres_world[None], model, margin)
    return float(value[0]), grads[0]


def _self_collision_batch(spheres, model, margin):
    B, S = spheres.shape[:2]
    grads = np.zeros((B, S, 3))
    if len(model.pair_i) == 0:
        return np.zeros(B), grads
    p = spheres[:, model.pair_i]  # (B, P, 3)
    q = spheres[:, model.pair_j]
    diff = p - q
    dist = np.linalg.norm(diff, axis=2)
    gap = dist - model.pair_radius_sum[None, :]
    viol = np.maximum(margin - gap, 0.0)
    value = viol.sum(axis=1)
    active = viol > 0.0
    if np.any(active):
        unit = diff / np.maximum(dist, 1e-12)[:, :, None]
        contrib = np.where(active[:, :, None], -unit, 0.0)
        flat = grads.reshape(-1, 3)
        offs = np.arange(B)[:, None] * S
        np.add.at(flat, (offs + model.pair_i[None, :]).ravel(),
                  contrib.reshape(-1, 3))
        np.add.at(flat, (offs + model.pair_j[None, :]).ravel(),
                  -contrib.reshape(-1, 3))
    return value, grads


def smoothness_energy(poses, dt=1.0):
    """Sum of squared finite-difference velocities of stacked pose rows."""
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[0] < 2:
        raise PlanningError("smoothness needs at least two trajectory frames")
    if dt <= 0.0:
        raise PlanningError("dt must be positive")
    vel = (poses[1:] - poses[:-1]) / dt
    value = float((vel * vel).sum())
    grad = np.zeros_like(poses)
    grad[1:] += 2.0 * vel / dt
    grad[:-1] -= 2.0 * vel / dt
    return value, grad


def _draw_contact_indices(rng, batch, available, wanted):
    """Per-pose candidate subsets, without replacement when possible."""
    if available == wanted:
        return np.tile(np.arange(wanted, dtype=np.int64), (batch, 1))
    if available > wanted:
        idx = np.empty((batch, wanted), dtype=np.int64)
        for b in range(batch):
            idx[b] = rng.choice(available, size=wanted, replace=False)
        return idx
    return rng.integers(0, available, size=(batch, wanted))


@dataclass(frozen=True)
class BatchEnergy:
    totals: np.ndarray  # (B,)
    gradients: np.ndarray  # (B, 6 + d)
    terms: dict  # name -> (B,) raw unweighted values
    contact_indices: np.ndarray  # (B, n)


def batch_total_energy(model, scene, task, weights, translations, eulers,
                       joints, rng, contact_indices=None):
    """Task energy and pose gradient for B poses given as arrays.

    ``rng`` drives the per-iteration contact subset draw and, for the
    articulation task, the target-wrench sample. Passing a sequence of
    generators (one per pose) keeps restart streams independent;
    ``contact_indices`` overrides the subset draw entirely.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}', expected one of {TASKS}")
    if task == "articulation" and scene.articulation is None:
        raise ConfigError("articulation task requires scene.articulation")

    translations = np.asarray(translations, dtype=np.float64)
    eulers = np.asarray(eulers, dtype=np.float64)
    joints = np.asarray(joints, dtype=np.float64)
    B = translations.shape[0]
    d = model.dof

    placed = forward_kinematics_batch(model, translations, eulers, joints)
    sphere_jac, cand_jac = pose_jacobians_batch(
        model, translations, eulers, joints, placed)

    S = model.num_spheres
    sphere_grads = np.zeros((B, S, 3))
    cand_grads = np.zeros((B, model.num_candidates, 3))
    terms = {}

    # Penetration against every mesh in the scene.
    flat_centers = placed.sphere_centers.reshape(-1, 3)
    radii = np.tile(model.sphere_radius, B)
    e_sdf = np.zeros(B)
    for tree in scene.trees:
        pen, _, sgrad = sphere_penetration_batch(tree, flat_centers, radii)
        e_sdf += pen.reshape(B, S).sum(axis=1)
        active = (pen > 0.0)[:, None]
        sphere_grads -= np.where(active, sgrad, 0.0).reshape(B, S, 3)
    terms["sdf"] = e_sdf

    e_self, self_grads = _self_collision_batch(
        placed.sphere_centers, model, weights.self_margin)
    terms["self"] = e_self

    over = np.maximum(joints - model.joint_upper[None], 0.0)
    under = np.maximum(model.joint_lower[None] - joints, 0.0)
    terms["joint"] = (over + under).sum(axis=1)
    joint_grad = (np.where(joints > model.joint_upper[None], 1.0, 0.0)
                  - np.where(joints < model.joint_lower[None], 1.0, 0.0))

    # Contact subset for this evaluation.
    C = model.num_candidates
    n = min(weights.n_contacts, max(C, 1))
    if C == 0:
        raise ConfigError("hand model declares no contact candidates")
    per_pose_rngs = None
    if not isinstance(rng, np.random.Generator) and rng is not None:
        per_pose_rngs = list(rng)
        if len(per_pose_rngs) != B:
            raise DimensionError(
                f"got {len(per_pose_rngs)} generators for batch of {B}")
    if contact_indices is not None:
        idx = np.asarray(contact_indices, dtype=np.int64).reshape(B, -1)
        n = idx.shape[1]
    elif per_pose_rngs is not None:
        idx = np.stack([_draw_contact_indices(g, 1, C, n)[0]
                        for g in per_pose_rngs])
    else:
        idx = _draw_contact_indices(rng, B, C, n)
    rows = np.arange(B)[:, None]
    sel_points = placed.contact_points[rows, idx]  # (B, n, 3)

    sdist, cps, sgrad = signed_distance_batch(
        scene.object_tree, sel_points.reshape(-1, 3))
    unsigned = np.abs(sdist).reshape(B, n)
    terms["dis"] = unsigned.sum(axis=1)
    diff = sel_points.reshape(-1, 3) - cps
    dsafe = np.maximum(np.abs(sdist), 1e-12)[:, None]
    dis_grads = np.where(np.abs(sdist)[:, None] < 1e-12, 0.0, diff / dsafe)
    dis_grads = dis_grads.reshape(B, n, 3)

    sel_grads = weights.w_dis * dis_grads

    if task == "grasp":
        normals = sgrad.reshape(B, n, 3)
        fc_vals, fc_grads = force_closure_batch(sel_points, normals)
        terms["fc"] = fc_vals
        sel_grads += fc_grads
    elif task == "articulation":
        spec = scene.articulation
        shared_targets = None
        if per_pose_rngs is None:
            shared_targets = sample_target_wrenches(
                spec, weights.tws_targets, rng)
        normals = sgrad.reshape(B, n, 3)
        tws_vals = np.zeros(B)
        for b in range(B):
            targets = (shared_targets if shared_targets is not None else
                       sample_target_wrenches(spec, weights.tws_targets,
                                              per_pose_rngs[b]))
            contacts = ContactSet(sel_points[b], normals[b], idx[b])
            val, grad = task_wrench(contacts, spec, weights, seed=None,
                                    targets=targets)
            tws_vals[b] = val
            sel_grads[b] += grad
        terms["tws"] = tws_vals

    # Scatter selected-candidate gradients back to the full candidate set.
    flat_idx = (np.arange(B)[:, None] * C + idx).ravel()
    np.add.at(cand_grads.reshape(-1, 3), flat_idx, sel_grads.reshape(-1, 3))

    point_grads = weights.w_sdf * sphere_grads + weights.w_self * self_grads
    gradients = np.einsum("bpi,bpik->bk", point_grads, sphere_jac)
    gradients += np.einsum("bpi,bpik->bk", cand_grads, cand_jac)
    gradients[:, 6:] += weights.w_joint * joint_grad

    totals = (weights.w_sdf * terms["sdf"] + weights.w_dis * terms["dis"]
              + weights.w_joint * terms["joint"]
              + weights.w_self * terms["self"])
    if task == "grasp":
        totals = totals + terms["fc"]
    elif task == "articulation":
        totals = totals + terms["tws"]
    return BatchEnergy(totals, gradients, terms, idx)


def total_energy(model, pose, scene, task, weights=None, seed=0):
    """Energy report for a single pose. The seed fixes the contact
    subset draw and articulation targets."""
    weights = weights or EnergyWeights()
    if pose.dof != model.dof:
        raise DimensionError(
            f"pose has {pose.dof} joints, model has {model.dof}")
    rng = np.random.default_rng(seed)
    batch = batch_total_energy(model, scene, task, weights,
                               pose.translation[None], pose.rotation[None],
                               pose.joints[None], rng)
    placed = forward_kinematics_batch(
        model, pose.translation[None], pose.rotation[None], pose.joints[None])
    idx = batch.contact_indices[0]
    pts = placed.contact_points[0, idx]
    _, _, sgrad = signed_distance_batch(scene.object_tree, pts)
    sgrad = sgrad.reshape(-1, 3)
    norms = np.linalg.norm(sgrad, axis=1, keepdims=True)
    sgrad = sgrad / np.maximum(norms, 1e-12)
    contacts = ContactSet(pts, sgrad, idx)
    terms = {k: float(v[0]) for k, v in batch.terms.items()}
    return EnergyReport(total=float(batch.totals[0]), terms=terms,
                        gradient=batch.gradients[0], contacts=contacts)
