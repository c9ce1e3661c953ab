import numpy as np
import pytest

from dexsynth import (
    HandPose,
    Scene,
    assets,
    build_bvh,
    make_icosphere,
    make_table_slab,
)


@pytest.fixture(scope="session")
def toy_hand():
    return assets.load_toy_hand()


@pytest.fixture(scope="session")
def small_sphere_tree():
    # 7 cm diameter, matched to the toy hand's finger span.
    return build_bvh(assets.load_unit_sphere(scale=0.07))


@pytest.fixture(scope="session")
def grasp_scene(small_sphere_tree):
    table = build_bvh(make_table_slab(top_z=-0.035))
    return Scene(small_sphere_tree, (table,), None)


@pytest.fixture(scope="session")
def free_scene(small_sphere_tree):
    return Scene(small_sphere_tree, (), None)


def random_pose(model, rng, spread=0.2):
    translation = rng.uniform(-spread, spread, 3)
    euler = rng.uniform(-np.pi, np.pi, 3)
    joints = rng.uniform(model.joint_lower, model.joint_upper)
    return HandPose(translation, euler, joints)


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-np.pi, np.pi)
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@pytest.fixture(scope="session")
def lumpy_mesh():
    # Icosphere with vertex noise: no symmetry left to hide sign errors.
    mesh = make_icosphere(subdivisions=2, radius=0.05)
    rng = np.random.default_rng(17)
    verts = mesh.vertices * (1.0 + 0.15 * rng.standard_normal((len(mesh.vertices), 1)))
    return type(mesh)(verts, mesh.triangles, name="lumpy")
