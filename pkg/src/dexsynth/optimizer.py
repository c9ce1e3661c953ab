"""Batch gradient-descent minimization of the grasp energies.

Plain gradient descent with cosine step decay and additive Gaussian
exploration noise that decays linearly, reaching zero at 80% of the
iteration budget; the best pose seen over the run is tracked and
returned. Restarts are independent and each owns an RNG stream derived
from (seed, restart index), so results do not depend on batch
composition or merge order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .energy import EnergyWeights, batch_total_energy, total_energy
from .errors import ConfigError, DimensionError, MeshError, OptimizationError
from .hand import HandPose, forward_kinematics
from . import rotations


@dataclass(frozen=True)
class OptimSettings:
    """Iteration budget and update scales.

    ``step_size`` follows a cosine decay over the run; ``noise_scale``
    decays linearly and is zero for the final fifth of the run.
    Per-block multipliers balance meter and radian units.
    """

    steps: int = 6000
    step_size: float = 2e-5
    noise_scale: float = 2e-3
    restarts: int = 64
    seed: int = 0
    resample_contacts_every: int = 1
    translation_scale: float = 1.0
    rotation_scale: float = 0.5
    joint_scale: float = 1.0
    trace_every: int = 50

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.step_size <= 0.0:
            raise ConfigError("step_size must be positive")
        if self.noise_scale < 0.0:
            raise ConfigError("noise_scale must be nonnegative")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.resample_contacts_every < 1:
            raise ConfigError("resample_contacts_every must be at least 1")
        if self.trace_every < 1:
            raise ConfigError("trace_every must be at least 1")
        for name in ("translation_scale", "rotation_scale", "joint_scale"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")


POST_SETTINGS = OptimSettings(steps=100, step_size=2e-4, noise_scale=0.0,
                              trace_every=10)


@dataclass(frozen=True)
class OptimResult:
    """Best-so-far pose with its energy, a decimated trace, and
    provenance (restart index and master seed)."""

    pose: HandPose
    energy: float
    report: object  # EnergyReport at the returned pose
    trace_steps: np.ndarray
    trace_totals: np.ndarray
    init_index: int
    seed: int


def sample_initializations(model, scene, count, seed):
    """Poses with the palm on the object's inflated bounding sphere
    (radius x 1.25), heading aimed at the centroid, joints mid-range,
    and a random roll about the approach direction.

    Approach direction and roll are rejection-sampled so no hand sphere
    starts inside an obstacle mesh (starts embedded in a wall or table
    cannot recover). After 200 rejected draws per pose the last draw is
    kept regardless, so heavily occluded scenes still terminate.
    """
    if count < 1:
        raise ConfigError("count must be at least 1")
    mesh = scene.object_tree.mesh
    center, radius = mesh.bounding_sphere()
    if radius < 1e-9:
        raise MeshError("object bounding sphere is degenerate",
                        radius=float(radius))

    mid = model.mid_joints()
    rest = HandPose(np.zeros(3), np.zeros(3), mid)
    placed = forward_kinematics(model, rest)
    palm0 = placed.markers["palm_center"]
    tip_mid = 0.5 * (placed.markers["thumb_tip"]
                     + placed.markers["middle_tip"])
    h0 = tip_mid - palm0
    n0 = np.linalg.norm(h0)
    if n0 < 1e-12:
        raise MeshError("hand heading is degenerate at the rest pose")
    h0 = h0 / n0

    from .geometry import sphere_penetration_batch

    def clear_of_obstacles(pose):
        if not scene.obstacle_trees:
            return True
        centers = forward_kinematics(model, pose).sphere_centers
        for tree in scene.obstacle_trees:
            pen, _, _ = sphere_penetration_batch(tree, centers,
                                                 model.sphere_radius)
            if pen.max() > 0.0:
                return False
        return True

    rng = np.random.default_rng(seed)
    stand_off = 1.25 * radius
    poses = []
    for _ in range(count):
        pose = None
        for _attempt in range(200):
            direction = rng.normal(size=3)
            norm = np.linalg.norm(direction)
            if norm < 1e-9:
                continue
            direction = direction / norm
            roll = rng.uniform(0.0, 2.0 * np.pi)
            aim = -direction  # palm looks back at the centroid
            R = rotations.axis_angle_matrix(aim, roll) @ \
                rotations.align_vectors(h0, aim)
            t = center + direction * stand_off - R @ palm0
            pose = HandPose(t, rotations.matrix_to_euler(R), mid.copy())
            if clear_of_obstacles(pose):
                break
        poses.append(pose)
    return poses


def _block_scales(model, settings):
    return np.concatenate([
        np.full(3, settings.translation_scale),
        np.full(3, settings.rotation_scale),
        np.full(model.dof, settings.joint_scale),
    ])


def optimize_batch(model, scene, task, inits, weights=None, settings=None):
    """Minimize the task energy from each initialization; one result per
    restart, ordered by restart index."""
    weights = weights or EnergyWeights()
    settings = settings or OptimSettings()
    if not inits:
        return []
    B = len(inits)
    d = model.dof
    for pose in inits:
        if pose.dof != d:
            raise DimensionError(
                f"initialization has {pose.dof} joints, model has {d}")

    vecs = np.stack([p.as_vector() for p in inits])
    rngs = [np.random.default_rng([settings.seed, i]) for i in range(B)]
    scales = _block_scales(model, settings)

    best_vecs = vecs.copy()
    best_totals = np.full(B, np.inf)
    steps = settings.steps
    trace_steps = []
    trace_totals = []

    contact_idx = None

    def evaluate(step):
        nonlocal contact_idx
        if (contact_idx is None
                or step % settings.resample_contacts_every == 0):
            contact_idx = None  # force a fresh draw inside the evaluation
            out = batch_total_energy(model, scene, task, weights,
                                     vecs[:, :3], vecs[:, 3:6], vecs[:, 6:],
                                     rngs)
            contact_idx = out.contact_indices
            return out
        return batch_total_energy(model, scene, task, weights,
                                  vecs[:, :3], vecs[:, 3:6], vecs[:, 6:],
                                  rngs, contact_indices=contact_idx)

    for step in range(steps + 1):
        out = evaluate(step)
        totals = out.totals
        if step == 0 and not np.all(np.isfinite(totals)):
            bad = np.where(~np.isfinite(totals))[0]
            raise OptimizationError(
                "non-finite energy at initialization",
                restart_indices=bad.tolist())
        improved = totals < best_totals
        best_totals = np.where(improved, totals, best_totals)
        best_vecs[improved] = vecs[improved]
        if step % settings.trace_every == 0 or step == steps:
            trace_steps.append(step)
            trace_totals.append(totals.copy())
        if step == steps:
            break

        lr = settings.step_size * 0.5 * (1.0 + math.cos(math.pi * step / steps))
        # Noise reaches zero at 80% of the run so the tail is pure descent;
        # with noise alive until the last step the vanishing learning rate
        # cannot cancel the random walk and contacts never settle.
        sigma = settings.noise_scale * max(0.0, 1.0 - step / (0.8 * steps))
        vecs -= lr * scales[None, :] * out.gradients
        if sigma > 0.0:
            noise = np.stack([g.normal(size=6 + d) for g in rngs])
            vecs += sigma * scales[None, :] * noise
        if not np.all(np.isfinite(vecs)):
            raise OptimizationError("pose diverged to non-finite values",
                                    step=step)

    trace_steps = np.array(trace_steps)
    trace_matrix = np.stack(trace_totals, axis=0)  # (K, B)
    results = []
    for i in range(B):
        pose = HandPose.from_vector(best_vecs[i], d)
        report = total_energy(model, pose, scene, task, weights,
                              seed=settings.seed)
        results.append(OptimResult(
            pose=pose, energy=float(best_totals[i]), report=report,
            trace_steps=trace_steps, trace_totals=trace_matrix[:, i].copy(),
            init_index=i, seed=settings.seed))
    return results


def optimize_grasp(init, task, scene, model, weights=None, settings=None):
    """Single-restart minimization; equivalent to a batch of one."""
    settings = settings or OptimSettings()
    return optimize_batch(model, scene, task, [init], weights, settings)[0]


def post_optimize(proposal, scene, model, weights=None, settings=None):
    """Refine a proposal under the post energy with the root damped to
    0.1x of the joint step so the adjustment stays slight."""
    settings = settings or POST_SETTINGS
    damped = OptimSettings(
        steps=settings.steps, step_size=settings.step_size,
        noise_scale=settings.noise_scale, restarts=settings.restarts,
        seed=settings.seed,
        resample_contacts_every=settings.resample_contacts_every,
        translation_scale=settings.translation_scale * 0.1,
        rotation_scale=settings.rotation_scale * 0.1,
        joint_scale=settings.joint_scale,
        trace_every=settings.trace_every)
    return optimize_batch(model, scene, "post", [proposal], weights,
                          damped)[0]


def post_optimize_batch(proposals, scene, model, weights=None, settings=None):
    """Batched post refinement; one result per proposal."""
    settings = settings or POST_SETTINGS
    damped = OptimSettings(
        steps=settings.steps, step_size=settings.step_size,
        noise_scale=settings.noise_scale, restarts=settings.restarts,
        seed=settings.seed,
        resample_contacts_every=settings.resample_contacts_every,
        translation_scale=settings.translation_scale * 0.1,
        rotation_scale=settings.rotation_scale * 0.1,
        joint_scale=settings.joint_scale,
        trace_every=settings.trace_every)
    return optimize_batch(model, scene, "post", proposals, weights, damped)
