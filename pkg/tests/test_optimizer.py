"""Optimizer tests: initialization geometry, descent bookkeeping, and the
post-refinement stage."""

import numpy as np
import pytest

from dexsynth import (
    ConfigError,
    DimensionError,
    EnergyWeights,
    HandPose,
    OptimSettings,
    Scene,
    assets,
    build_bvh,
    forward_kinematics,
    heading_direction,
    load_hand,
    make_table_slab,
    max_penetration,
    optimize_batch,
    optimize_grasp,
    post_optimize,
    post_optimize_batch,
    sample_initializations,
    total_energy,
)

from conftest import random_pose

SMALL = OptimSettings(steps=120, restarts=4, seed=3, trace_every=20)


# ---------------------------------------------------------------------------
# initialization sampling


def test_inits_palm_on_inflated_bounding_sphere(toy_hand):
    # Unit-scale sphere: bounding radius 0.5, stand-off 1.25x puts the
    # palm marker at 0.625 from the centroid.
    tree = build_bvh(assets.load_unit_sphere(scale=1.0))
    scene = Scene(tree, (), None)
    inits = sample_initializations(toy_hand, scene, 16, seed=0)
    assert len(inits) == 16
    center = tree.mesh.bounding_sphere()[0]
    for pose in inits:
        placed = forward_kinematics(toy_hand, pose)
        palm = placed.markers["palm_center"]
        assert np.linalg.norm(palm - center) == pytest.approx(0.625, abs=1e-9)


def test_inits_heading_aims_at_centroid(toy_hand, grasp_scene):
    center = grasp_scene.object_tree.mesh.bounding_sphere()[0]
    for pose in sample_initializations(toy_hand, grasp_scene, 12, seed=1):
        placed = forward_kinematics(toy_hand, pose)
        palm = placed.markers["palm_center"]
        toward = center - palm
        toward /= np.linalg.norm(toward)
        h = heading_direction(toy_hand, pose)
        assert np.dot(h, toward) == pytest.approx(1.0, abs=1e-9)


def test_inits_joints_at_midrange(toy_hand, grasp_scene):
    mid = toy_hand.mid_joints()
    for pose in sample_initializations(toy_hand, grasp_scene, 8, seed=2):
        np.testing.assert_array_equal(pose.joints, mid)


def test_inits_deterministic(toy_hand, grasp_scene):
    a = sample_initializations(toy_hand, grasp_scene, 10, seed=9)
    b = sample_initializations(toy_hand, grasp_scene, 10, seed=9)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa.as_vector(), pb.as_vector())
    c = sample_initializations(toy_hand, grasp_scene, 10, seed=10)
    assert any(not np.array_equal(pa.as_vector(), pc.as_vector())
               for pa, pc in zip(a, c))


def test_inits_clear_of_obstacles(toy_hand, small_sphere_tree):
    # A slab just under the object: downward approaches would embed the
    # hand, so accepted draws must start penetration-free.
    from dexsynth import sphere_penetration_batch

    slab = build_bvh(make_table_slab(top_z=-0.035))
    scene = Scene(small_sphere_tree, (slab,), None)
    for pose in sample_initializations(toy_hand, scene, 24, seed=4):
        placed = forward_kinematics(toy_hand, pose)
        pen, _, _ = sphere_penetration_batch(
            slab, placed.sphere_centers, toy_hand.sphere_radius)
        assert np.all(pen == 0.0)


def test_inits_count_validation(toy_hand, free_scene):
    with pytest.raises(ConfigError):
        sample_initializations(toy_hand, free_scene, 0, seed=0)


# ---------------------------------------------------------------------------
# settings validation


@pytest.mark.parametrize("kwargs", [
    {"steps": -1},
    {"step_size": 0.0},
    {"noise_scale": -1e-9},
    {"restarts": 0},
    {"resample_contacts_every": 0},
    {"trace_every": 0},
    {"translation_scale": 0.0},
    {"rotation_scale": -0.5},
    {"joint_scale": 0.0},
])
def test_settings_validation(kwargs):
    with pytest.raises(ConfigError):
        OptimSettings(**kwargs)


# ---------------------------------------------------------------------------
# descent bookkeeping


def test_optimize_deterministic(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 4, seed=3)
    a = optimize_batch(toy_hand, grasp_scene, "grasp", inits, settings=SMALL)
    b = optimize_batch(toy_hand, grasp_scene, "grasp", inits, settings=SMALL)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.pose.as_vector(), rb.pose.as_vector())
        assert ra.energy == rb.energy
        np.testing.assert_array_equal(ra.trace_totals, rb.trace_totals)


def test_optimize_never_worse_than_init(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 4, seed=5)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=SMALL)
    for res in results:
        assert res.trace_steps[0] == 0
        # trace_totals[0] is the energy of the untouched initialization.
        assert res.energy <= res.trace_totals[0] + 1e-12


def test_optimize_improves_energy(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 4, seed=6)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=SMALL)
    assert any(res.energy < res.trace_totals[0] for res in results)


def test_zero_steps_is_identity(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 3, seed=7)
    settings = OptimSettings(steps=0, restarts=3, seed=7)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=settings)
    for init, res in zip(inits, results):
        np.testing.assert_array_equal(res.pose.as_vector(), init.as_vector())
        assert res.trace_steps.tolist() == [0]
        assert res.trace_totals.shape == (1,)


def test_trace_shapes_and_endpoints(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 2, seed=8)
    settings = OptimSettings(steps=90, restarts=2, seed=8, trace_every=40)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=settings)
    for res in results:
        # Steps 0, 40, 80 plus the forced final entry at 90.
        assert res.trace_steps.tolist() == [0, 40, 80, 90]
        assert res.trace_totals.shape == (4,)
        assert np.all(np.isfinite(res.trace_totals))


def test_result_metadata(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 3, seed=11)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=SMALL)
    for i, res in enumerate(results):
        assert res.init_index == i
        assert res.seed == SMALL.seed
        assert res.energy == pytest.approx(res.report.total, rel=1e-9)
        assert set(res.report.terms) >= {"fc", "sdf", "dis", "self", "joint"}


def test_optimize_grasp_matches_batch_of_one(toy_hand, grasp_scene):
    init = sample_initializations(toy_hand, grasp_scene, 1, seed=12)[0]
    single = optimize_grasp(init, "grasp", grasp_scene, toy_hand,
                            settings=SMALL)
    batched = optimize_batch(toy_hand, grasp_scene, "grasp", [init],
                             settings=SMALL)[0]
    np.testing.assert_array_equal(single.pose.as_vector(),
                                  batched.pose.as_vector())
    assert single.energy == batched.energy


def test_empty_inits(toy_hand, grasp_scene):
    assert optimize_batch(toy_hand, grasp_scene, "grasp", [],
                          settings=SMALL) == []


def test_mismatched_dof_rejected(toy_hand, grasp_scene):
    bad = HandPose(np.zeros(3), np.zeros(3), np.zeros(toy_hand.dof + 2))
    with pytest.raises(DimensionError):
        optimize_batch(toy_hand, grasp_scene, "grasp", [bad], settings=SMALL)


def test_unknown_task_rejected(toy_hand, grasp_scene):
    init = sample_initializations(toy_hand, grasp_scene, 1, seed=0)[0]
    with pytest.raises(ConfigError):
        optimize_batch(toy_hand, grasp_scene, "lift", [init], settings=SMALL)


# ---------------------------------------------------------------------------
# post refinement


def _squeeze(pose, delta, model):
    joints = model.clamp_joints(pose.joints + delta)
    return HandPose(pose.translation.copy(), pose.rotation.copy(), joints)


def test_post_optimize_reduces_penetration(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 4, seed=13)
    results = optimize_batch(toy_hand, grasp_scene, "grasp", inits,
                             settings=OptimSettings(steps=800, restarts=4,
                                                    seed=13))
    best = min(results, key=lambda r: r.energy)
    # Drive the fingers inward until the grasp visibly penetrates, then
    # let the post stage relax it.
    squeezed = _squeeze(best.pose, 0.35, toy_hand)
    before = max_penetration(squeezed, toy_hand, grasp_scene.object_tree)
    assert before > 1e-4
    refined = post_optimize(squeezed, grasp_scene, toy_hand)
    after = max_penetration(refined.pose, toy_hand, grasp_scene.object_tree)
    assert after < before


def test_post_optimize_batch_matches_single(toy_hand, grasp_scene):
    inits = sample_initializations(toy_hand, grasp_scene, 2, seed=14)
    singles = [post_optimize(p, grasp_scene, toy_hand) for p in inits]
    batched = post_optimize_batch(inits, grasp_scene, toy_hand)
    for s, b in zip(singles, batched):
        np.testing.assert_array_equal(s.pose.as_vector(), b.pose.as_vector())


def test_post_energy_excludes_task_terms(toy_hand, grasp_scene):
    init = sample_initializations(toy_hand, grasp_scene, 1, seed=15)[0]
    res = post_optimize(init, grasp_scene, toy_hand)
    assert "fc" not in res.report.terms
    assert "tws" not in res.report.terms


def test_diverged_pose_raises(toy_hand, grasp_scene):
    import warnings

    from dexsynth import OptimizationError

    init = sample_initializations(toy_hand, grasp_scene, 1, seed=16)[0]
    # A step size near the float ceiling overflows the pose within a few
    # updates, which must surface as a structured error, not NaN output.
    settings = OptimSettings(steps=50, restarts=1, seed=16, step_size=1e307)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(OptimizationError):
            optimize_batch(toy_hand, grasp_scene, "grasp", [init],
                           settings=settings)
