import numpy as np
import pytest

from dexsynth import (
    ArticulationSpec,
    Scene,
    build_bvh,
    contact_distance,
    joint_limit_energy,
    make_icosphere,
    penetration_energy,
    self_collision_energy,
)
from dexsynth.hand import forward_kinematics

from conftest import random_pose
from gradcheck import fd_gradient, run_suite

TOL = 1e-4


@pytest.fixture(scope="module")
def bumpy_tree(lumpy_mesh):
    return build_bvh(lumpy_mesh)


def _filtered_points(tree, rng, count, radii, kink_tol=1e-3):
    """Sphere centers clear of the penetration hinge and the surface."""
    out = []
    while len(out) < count:
        p = rng.uniform(-0.09, 0.09, 3)
        from dexsynth import signed_distance
        d = signed_distance(tree, p).distance
        if np.all(np.abs(d - radii) > kink_tol) and abs(d) > kink_tol:
            out.append(p)
    return np.asarray(out)


def test_penetration_point_gradient(bumpy_tree):
    rng = np.random.default_rng(0)
    radii = np.array([0.012])
    pts = _filtered_points(bumpy_tree, rng, 40, radii)
    for p in pts:
        _, grads = penetration_energy(p[None], radii, (bumpy_tree,))

        def value(q):
            return penetration_energy(q.reshape(1, 3), radii,
                                      (bumpy_tree,))[0]

        fd = fd_gradient(value, p.copy())
        np.testing.assert_allclose(grads[0], fd, atol=TOL)


def test_contact_distance_point_gradient(bumpy_tree):
    rng = np.random.default_rng(1)
    pts = _filtered_points(bumpy_tree, rng, 40, np.array([np.inf]))
    for p in pts:
        _, grads = contact_distance(p[None], bumpy_tree)

        def value(q):
            return contact_distance(q.reshape(1, 3), bumpy_tree)[0]

        fd = fd_gradient(value, p.copy())
        np.testing.assert_allclose(grads[0], fd, atol=TOL)


def test_self_collision_point_gradient(toy_hand):
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 20:
        pose = random_pose(toy_hand, rng)
        world = forward_kinematics(toy_hand, pose).sphere_centers
        p = world[toy_hand.pair_i]
        q = world[toy_hand.pair_j]
        gap = np.linalg.norm(p - q, axis=1) - toy_hand.pair_radius_sum
        if np.any(np.abs(0.02 - gap) < 1e-3):
            continue
        value, grads = self_collision_energy(world, toy_hand, margin=0.02)
        flat = world.ravel()

        def fn(v):
            return self_collision_energy(v.reshape(-1, 3), toy_hand,
                                         margin=0.02)[0]

        fd = fd_gradient(fn, flat.copy()).reshape(-1, 3)
        np.testing.assert_allclose(grads, fd, atol=TOL)
        checked += 1


def test_joint_limit_gradient(toy_hand):
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 20:
        theta = rng.uniform(-1.2, 1.2, toy_hand.dof)
        near = (np.abs(theta - toy_hand.joint_upper) < 1e-3) | (
            np.abs(theta - toy_hand.joint_lower) < 1e-3)
        if near.any():
            continue
        _, grad = joint_limit_energy(theta, toy_hand)

        def fn(t):
            return joint_limit_energy(t, toy_hand)[0]

        fd = fd_gradient(fn, theta.copy())
        np.testing.assert_allclose(grad, fd, atol=TOL)
        checked += 1


def test_chain_gradient_suite(toy_hand, small_sphere_tree):
    spec = ArticulationSpec("revolute", np.array([0.0, 0.0, 1.0]),
                            np.zeros(3))
    scene = Scene(small_sphere_tree, (), spec)
    worst, used, _ = run_suite(toy_hand, scene, 30, seed=7)
    assert used == 30
    assert worst["smooth"] < TOL
    assert worst["fc"] < TOL
    assert worst["tws"] < TOL


def test_chain_gradient_suite_with_obstacle(toy_hand, grasp_scene):
    # Obstacle trees route through the same penetration accumulation.
    worst, used, _ = run_suite(toy_hand, grasp_scene, 15, seed=8)
    assert used == 15
    assert worst["smooth"] < TOL
    assert worst["fc"] < TOL
