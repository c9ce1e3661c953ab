"""Reach-stage trajectory optimization and post-grasp trajectory
generation.

The reach planner linearly interpolates between a start pose and a
grasp keyframe in pose-vector space and gradient-descends the interior
waypoints on a smoothness-plus-collision energy; the endpoints are
never touched. Post-grasp trajectories are generated in closed form:
an over-shoot squeeze followed by a vertical lift, or rigid transport
of the hand along an articulation screw. Euler angles along generated
sequences are kept continuous by unwrapped decomposition plus a short
descent polish.
"""

import math
from dataclasses import dataclass

import numpy as np

from .energy import ArticulationSpec, penetration_energy
from .errors import ConfigError, DimensionError, PlanningError
from .hand import HandPose, forward_kinematics_batch, pose_jacobians_batch
from . import rotations

STAGES = ("reach", "grasp", "post")


@dataclass(frozen=True)
class Trajectory:
    """Ordered pose sequence with per-frame stage tags."""

    frames: tuple  # of HandPose
    dt: float
    stages: tuple  # of str, one per frame

    def __post_init__(self):
        if len(self.frames) < 2:
            raise PlanningError("a trajectory needs at least 2 frames")
        if not self.dt > 0.0:
            raise PlanningError("dt must be positive")
        if len(self.stages) != len(self.frames):
            raise PlanningError("one stage tag per frame required")
        for tag in self.stages:
            if tag not in STAGES:
                raise PlanningError(f"unknown stage tag {tag!r}")
        dof = self.frames[0].dof
        for f in self.frames:
            if f.dof != dof:
                raise PlanningError("frames mix hand dimensions")

    def __len__(self):
        return len(self.frames)

    def as_matrix(self):
        """Frames stacked as (F, 6 + d) pose vectors."""
        return np.stack([f.as_vector() for f in self.frames])


@dataclass(frozen=True)
class PlanSettings:
    """Waypoint count, energy weights, and task magnitudes."""

    waypoints: int = 32
    dt: float = 0.04
    w_smooth: float = 1.0
    w_sdf: float = 100.0
    iterations: int = 300
    step_size: float = 1e-4
    tolerance: float = 1e-4  # accumulated penetration depth per frame
    lift_height: float = 0.4
    articulation_delta: float = 0.5
    overshoot_fraction: float = 0.1

    def __post_init__(self):
        if self.waypoints < 2:
            raise ConfigError("waypoints must be at least 2")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if self.w_smooth < 0.0 or self.w_sdf < 0.0:
            raise ConfigError("weights must be nonnegative")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if not self.step_size > 0.0:
            raise ConfigError("step_size must be positive")
        if self.tolerance < 0.0:
            raise ConfigError("tolerance must be nonnegative")
        if not 0.0 <= self.overshoot_fraction <= 1.0:
            raise ConfigError("overshoot_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class PlanResult:
    """Best trajectory found, its feasibility, and the collision
    residual (max per-frame accumulated penetration depth)."""

    trajectory: Trajectory
    feasible: bool
    residual: float
    energy: float


def _frame_penetrations(model, trees, vecs):
    """Per-frame penetration depth and its pose-vector gradient."""
    F = vecs.shape[0]
    d = model.dof
    placed = forward_kinematics_batch(model, vecs[:, :3], vecs[:, 3:6],
                                      vecs[:, 6:])
    sphere_jac, _ = pose_jacobians_batch(model, vecs[:, :3], vecs[:, 3:6],
                                         vecs[:, 6:], placed)
    values = np.zeros(F)
    grads = np.zeros((F, 6 + d))
    for f in range(F):
        val, cgrads = penetration_energy(placed.sphere_centers[f],
                                         model.sphere_radius, trees)
        values[f] = val
        grads[f] = np.einsum("pi,pik->k", cgrads, sphere_jac[f])
    return values, grads


def plan_reach(start, goal, scene, model, settings=None):
    """Optimize interior waypoints between two poses.

    The energy is w_smooth * sum ||g_i - g_{i-1}||^2 plus w_sdf times
    the per-frame penetration depth against every scene mesh. The
    endpoints stay bitwise fixed; the best interior configuration seen
    (including the straight-line initialization) is returned, so the
    output never scores worse than the interpolation. Feasibility means
    every frame's accumulated penetration depth is at or below
    ``settings.tolerance``; otherwise the result reports the residual.
    """
    settings = settings or PlanSettings()
    if start.dof != model.dof or goal.dof != model.dof:
        raise DimensionError("start/goal joint dimension does not match model")
    N = settings.waypoints
    trees = scene.trees

    s, g = start.as_vector(), goal.as_vector()
    alphas = np.linspace(0.0, 1.0, N)[:, None]
    vecs = (1.0 - alphas) * s[None, :] + alphas * g[None, :]
    vecs[0], vecs[-1] = s, g

    def total(v):
        diffs = v[1:] - v[:-1]
        smooth = settings.w_smooth * float((diffs * diffs).sum())
        pens, pgrads = _frame_penetrations(model, trees, v)
        energy = smooth + settings.w_sdf * float(pens.sum())
        grad = np.zeros_like(v)
        grad[1:] += 2.0 * settings.w_smooth * diffs
        grad[:-1] -= 2.0 * settings.w_smooth * diffs
        grad += settings.w_sdf * pgrads
        return energy, grad, float(pens.max())

    energy, grad, residual = total(vecs)
    best = (energy, vecs.copy(), residual)
    for step in range(settings.iterations):
        if residual == 0.0 and step > 0:
            # collision-free trajectories only trade smoothness; the
            # interpolation already minimizes it, so stop early
            if energy <= best[0]:
                best = (energy, vecs.copy(), residual)
            break
        vecs[1:-1] -= settings.step_size * grad[1:-1]
        energy, grad, residual = total(vecs)
        if energy < best[0]:
            best = (energy, vecs.copy(), residual)
        if not math.isfinite(energy):
            raise PlanningError("reach energy diverged", step=step)

    energy, vecs, residual = best
    frames = tuple(HandPose.from_vector(v, model.dof) for v in vecs)
    stages = ("reach",) * (N - 1) + ("grasp",)
    trajectory = Trajectory(frames, settings.dt, stages)
    return PlanResult(trajectory=trajectory,
                      feasible=residual <= settings.tolerance,
                      residual=residual, energy=energy)


def generate_post_grasp(keyframe, task, model, spec=None, settings=None):
    """Closed-form trajectory after the grasp keyframe.

    ``lift``: one over-shoot frame (interior joints squeezed toward
    their flexion limit by ``overshoot_fraction`` of the range) then a
    linear root ascent ending at exactly ``lift_height``. ``articulation``:
    the hand root is rigidly transported along the joint screw through
    ``articulation_delta`` with interior joints held.
    """
    settings = settings or PlanSettings()
    if keyframe.dof != model.dof:
        raise DimensionError("keyframe joint dimension does not match model")
    N = settings.waypoints

    if task == "lift":
        squeeze = settings.overshoot_fraction * (model.joint_upper
                                                 - model.joint_lower)
        over = model.clamp_joints(keyframe.joints + squeeze)
        # the over-shoot squeeze holds through the ascent; linspace puts
        # the final frame at lift_height exactly
        heights = np.linspace(keyframe.translation[2], settings.lift_height,
                              N - 1)
        frames = [keyframe]
        for z in heights:
            t = keyframe.translation.copy()
            t[2] = z
            frames.append(HandPose(t, keyframe.rotation.copy(), over.copy()))
        stages = ("grasp",) + ("post",) * (len(frames) - 1)
        return Trajectory(tuple(frames), settings.dt, stages)

    if task == "articulation":
        if spec is None:
            raise PlanningError("articulation task requires an articulation "
                                "spec")
        if not isinstance(spec, ArticulationSpec):
            raise PlanningError("spec must be an ArticulationSpec")
        R0 = keyframe.rotation_matrix()
        t0 = keyframe.translation
        svals = np.linspace(0.0, settings.articulation_delta, N)
        mats, trans = [], []
        for sv in svals:
            if spec.kind == "revolute":
                Rs = rotations.axis_angle_matrix(spec.axis, sv)
                mats.append(Rs @ R0)
                trans.append(Rs @ (t0 - spec.origin) + spec.origin)
            else:
                mats.append(R0)
                trans.append(t0 + spec.axis * sv)
        eulers = _unwrap_euler_sequence(np.stack(mats),
                                        anchor=keyframe.rotation)
        frames = [keyframe]
        for k in range(1, N):
            frames.append(HandPose(trans[k], eulers[k],
                                   keyframe.joints.copy()))
        stages = ("grasp",) + ("post",) * (N - 1)
        return Trajectory(tuple(frames), settings.dt, stages)

    raise PlanningError(f"unknown post-grasp task {task!r}")


_EULER_SMOOTH_WEIGHT = 1e-6
_EULER_ITERATIONS = 100
_EULER_STEP = 1e-3


def _nearest_mod_2pi(value, anchor):
    """Shift value by multiples of 2*pi to land nearest the anchor."""
    return value + 2.0 * np.pi * np.round((anchor - value) / (2.0 * np.pi))


def _unwrap_euler_sequence(mats, anchor=None):
    """Per-frame Euler triples chosen for continuity.

    Each rotation has two Euler decompositions, (a, b, c) and
    (a + pi, pi - b, c + pi), each representative modulo 2*pi per
    component; the branch and shifts closest to the previous frame are
    kept. ``anchor`` fixes the first triple (it must decompose
    ``mats[0]``) so continuity holds against a caller-supplied
    representation.
    """
    F = mats.shape[0]
    out = np.zeros((F, 3))
    out[0] = rotations.matrix_to_euler(mats[0]) if anchor is None else anchor
    for t in range(1, F):
        a, b, c = rotations.matrix_to_euler(mats[t])
        candidates = np.array([
            [a, b, c],
            [a + np.pi, np.pi - b, c + np.pi],
        ])
        prev = out[t - 1]
        shifted = np.stack([_nearest_mod_2pi(cand, prev)
                            for cand in candidates])
        errs = np.abs(shifted - prev[None, :]).max(axis=1)
        out[t] = shifted[int(np.argmin(errs))]
    return out


def continuous_euler(matrices, dt):
    """Euler triples tracking a rotation sequence without wrap jumps.

    Starts from the unwrapped closed-form decomposition (already exact)
    and descends w_smooth * E_smooth + sum angle(R(e_t), R_t)^2 for a
    short budget with a tiny smoothness weight, returning the best
    objective seen. Raises on inputs that are not rotations.
    """
    mats = np.asarray(matrices, dtype=np.float64)
    if mats.ndim != 3 or mats.shape[1:] != (3, 3):
        raise PlanningError("expected an (F, 3, 3) rotation sequence")
    if not dt > 0.0:
        raise PlanningError("dt must be positive")
    for i, M in enumerate(mats):
        if not rotations.is_rotation_matrix(M, tol=1e-6):
            raise PlanningError("frame is not a rotation matrix", frame=i)
    F = mats.shape[0]
    if F == 1:
        return rotations.matrix_to_euler(mats[0])[None, :]

    eulers = _unwrap_euler_sequence(mats)

    def objective(E):
        Rs = rotations.euler_to_matrix_batch(E)
        dR = rotations.euler_derivatives_batch(E)
        # angle between reconstruction and target via the relative trace
        traces = np.einsum("fij,fij->f", Rs, mats)
        cosang = np.clip((traces - 1.0) / 2.0, -1.0, 1.0)
        ang = np.arccos(cosang)
        sin = np.sin(ang)
        # d(angle^2)/dtrace = -angle / sin(angle); series limit 1 at 0
        ratio = np.where(sin > 1e-8, ang / np.where(sin > 1e-8, sin, 1.0),
                         1.0 + ang * ang / 6.0)
        dtrace = np.einsum("fkij,fij->fk", dR, mats)
        grad = -ratio[:, None] * dtrace
        diffs = (E[1:] - E[:-1]) / dt
        smooth = _EULER_SMOOTH_WEIGHT * float((diffs * diffs).sum())
        grad_s = np.zeros_like(E)
        grad_s[1:] += 2.0 * _EULER_SMOOTH_WEIGHT * diffs / dt
        grad_s[:-1] -= 2.0 * _EULER_SMOOTH_WEIGHT * diffs / dt
        total = smooth + float((ang * ang).sum())
        return total, grad + grad_s

    value, grad = objective(eulers)
    best_value, best = value, eulers.copy()
    for _ in range(_EULER_ITERATIONS):
        eulers -= _EULER_STEP * grad
        value, grad = objective(eulers)
        if value < best_value:
            best_value, best = value, eulers.copy()
    return best
