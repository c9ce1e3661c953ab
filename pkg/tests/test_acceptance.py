"""End-to-end acceptance gate.

One test per acceptance criterion, each printing a single
``[criterion N] PASS/FAIL`` line with its measured numbers and runtime
budget. The synthesis run backing criteria 4 and 5 is shared through a
module fixture; its wall time is charged to criterion 4.
"""

import json
import time

import numpy as np
import pytest

from dexsynth import (
    ArticulationSpec,
    ContactSet,
    HandPose,
    OptimSettings,
    Scene,
    ShardChecksumError,
    assets,
    axis_angle_matrix,
    build_bvh,
    continuous_euler,
    euler_to_matrix,
    evaluate_pose,
    force_closure,
    forward_kinematics,
    generate_post_grasp,
    joint_entropy,
    make_icosphere,
    make_table_slab,
    max_penetration,
    optimize_batch,
    plan_reach,
    post_optimize_batch,
    read_shard,
    rotation_angle,
    run_pipeline,
    sample_conditions,
    sample_initializations,
    update_stats,
    write_shard,
)
from dexsynth.debias import DebiasStats
from dexsynth.planner import PlanSettings

from gradcheck import run_suite
from test_geometry import brute_closest_point, brute_signed_distance


def _report(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. analytic force closure


def test_criterion_1_force_closure():
    start = time.perf_counter()
    pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    nrm = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    antipodal, _ = force_closure(ContactSet(pts, nrm, np.arange(2)))
    single, _ = force_closure(
        ContactSet(pts[:1], nrm[:1], np.arange(1)))
    elapsed = time.perf_counter() - start
    ok = antipodal <= 1e-9 and abs(single - 1.0) <= 1e-9 and elapsed < 1.0
    _report(1, ok, f"force closure: antipodal={antipodal:.2e} "
                   f"single={single:.12f} ({elapsed:.3f} s < 1 s)")


# ---------------------------------------------------------------------------
# 2. SDF oracle equivalence


def _random_test_mesh(rng):
    mesh = make_icosphere(subdivisions=2, radius=1.0)  # 320 triangles
    verts = mesh.vertices * rng.uniform(0.5, 1.5)
    verts *= 1.0 + 0.12 * rng.normal(size=(len(verts), 1))
    verts += rng.uniform(-0.5, 0.5, 3)
    return type(mesh)(verts, mesh.triangles, name="random")


def test_criterion_2_sdf_oracle():
    from dexsynth import closest_point_batch, signed_distance_batch

    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_sdf = 0.0
    worst_cp = 0.0
    queries_run = 0
    for _ in range(20):
        mesh = _random_test_mesh(rng)
        tree = build_bvh(mesh)
        lo = mesh.vertices.min(axis=0) - 0.5
        hi = mesh.vertices.max(axis=0) + 0.5
        queries = rng.uniform(lo, hi, size=(50, 3))
        dist, cps, _ = signed_distance_batch(tree, queries)
        _, cps2, _ = closest_point_batch(tree, queries)
        for q, d, cp, cp2 in zip(queries, dist, cps, cps2):
            ref_d = brute_signed_distance(mesh, q)
            ref_cp, _ = brute_closest_point(mesh, q)
            worst_sdf = max(worst_sdf, abs(d - ref_d))
            worst_cp = max(worst_cp,
                           float(np.abs(cp - ref_cp).max()),
                           float(np.abs(cp2 - ref_cp).max()))
            queries_run += 1
    elapsed = time.perf_counter() - start
    ok = (queries_run == 1000 and worst_sdf <= 1e-6 and worst_cp <= 1e-9
          and elapsed < 60.0)
    _report(2, ok, f"sdf oracle: {queries_run} queries, worst signed "
                   f"distance err={worst_sdf:.2e} (<=1e-6), worst closest "
                   f"point err={worst_cp:.2e} (<=1e-9) "
                   f"({elapsed:.1f} s < 60 s)")


# ---------------------------------------------------------------------------
# 3. gradient suite


def test_criterion_3_gradients(toy_hand, small_sphere_tree):
    start = time.perf_counter()
    spec = ArticulationSpec("revolute", np.array([0.0, 0.0, 1.0]),
                            np.zeros(3))
    scene = Scene(small_sphere_tree, (), spec)
    worst, used, skipped = run_suite(toy_hand, scene, 100, seed=3)
    elapsed = time.perf_counter() - start
    worst_all = max(worst.values())
    ok = used == 100 and worst_all < 1e-4 and elapsed < 120.0
    detail = ", ".join(f"{k}={v:.2e}" for k, v in sorted(worst.items()))
    _report(3, ok, f"gradients: 100 poses ({skipped} kink-adjacent draws "
                   f"excluded), worst rel err {detail} (<1e-4) "
                   f"({elapsed:.1f} s < 120 s)")


# ---------------------------------------------------------------------------
# 4 + 5. optimization efficacy and post-optimization (shared synthesis)


@pytest.fixture(scope="module")
def synthesis(toy_hand):
    scene = Scene(
        build_bvh(assets.load_unit_sphere(scale=0.07)),
        (build_bvh(make_table_slab(top_z=-0.035)),), None)
    settings = OptimSettings(steps=6000, restarts=64, seed=0)
    start = time.perf_counter()
    inits = sample_initializations(toy_hand, scene, 64, seed=0)
    results = optimize_batch(toy_hand, scene, "grasp", inits,
                             settings=settings)
    elapsed = time.perf_counter() - start
    return scene, results, elapsed


def test_criterion_4_optimization_efficacy(toy_hand, synthesis):
    scene, results, elapsed = synthesis
    start = time.perf_counter()
    tree = scene.object_tree
    successes = 0
    for res in results:
        report = evaluate_pose(res.pose, toy_hand, tree)
        if (report.max_penetration <= 1e-3 and report.contact_count >= 2
                and report.q1 > 0.0):
            successes += 1
    elapsed += time.perf_counter() - start
    rate = successes / len(results)
    ok = len(results) == 64 and rate >= 0.5 and elapsed < 600.0
    _report(4, ok, f"optimization: {successes}/64 restarts with "
                   f"penetration<=1mm, >=2 contacts, q1>0 (>=50% needed) "
                   f"({elapsed:.0f} s < 600 s)")


def _inject_penetration(pose, model, tree, target=0.005):
    """Squeeze the fingers until the grasp penetrates by >= target."""
    lo, hi = 0.0, 0.6
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        squeezed = HandPose(pose.translation, pose.rotation,
                            model.clamp_joints(pose.joints + mid))
        if max_penetration(squeezed, model, tree) >= target:
            hi = mid
        else:
            lo = mid
    return HandPose(pose.translation, pose.rotation,
                    model.clamp_joints(pose.joints + hi))


def test_criterion_5_post_optimization(toy_hand, synthesis):
    scene, results, _ = synthesis
    start = time.perf_counter()
    tree = scene.object_tree
    feasible = [r.pose for r in results
                if evaluate_pose(r.pose, toy_hand, tree).feasible]
    assert len(feasible) >= 32
    base = [feasible[i % len(feasible)] for i in range(64)]
    perturbed = [_inject_penetration(p, toy_hand, tree) for p in base]

    before = np.array([max_penetration(p, toy_hand, tree)
                       for p in perturbed])
    refined = post_optimize_batch(perturbed, scene, toy_hand)
    after = np.array([max_penetration(r.pose, toy_hand, tree)
                      for r in refined])
    reduction = 1.0 - after.mean() / before.mean()
    elapsed = time.perf_counter() - start
    ok = (np.all(before >= 0.005) and reduction >= 0.80
          and elapsed < 120.0)
    _report(5, ok, f"post-optimization: mean max_penetration "
                   f"{before.mean()*1000:.2f} mm -> {after.mean()*1000:.2f} "
                   f"mm, reduction {reduction:.1%} (>=80%) "
                   f"({elapsed:.1f} s < 120 s)")


# ---------------------------------------------------------------------------
# 6. motion planning


def test_criterion_6_motion_planning(toy_hand, small_sphere_tree):
    start = time.perf_counter()
    mid = toy_hand.mid_joints()

    # empty scene: the plan is the straight-line interpolation
    sphere = assets.load_unit_sphere(scale=0.07)
    far = type(sphere)(sphere.vertices + np.array([0.0, 0.0, 10.0]),
                       sphere.triangles, name="far")
    empty = Scene(build_bvh(far), (), None)
    s = HandPose(np.array([-0.2, 0.0, 0.1]), np.zeros(3), mid)
    g = HandPose(np.array([0.2, 0.1, 0.0]), np.array([0.3, -0.2, 0.5]), mid)
    result = plan_reach(s, g, empty, toy_hand)
    alphas = np.linspace(0.0, 1.0, len(result.trajectory))[:, None]
    lerp = (1.0 - alphas) * s.as_vector() + alphas * g.as_vector()
    lerp_err = float(np.abs(result.trajectory.as_matrix() - lerp).max())

    # obstacle scene: endpoints fixed, penetration reduced
    obst = Scene(small_sphere_tree, (), None)
    s2 = HandPose(np.array([-0.12, 0.0, 0.0]), np.zeros(3), mid)
    g2 = HandPose(np.array([0.12, 0.0, 0.0]), np.zeros(3), mid)
    settings = PlanSettings(iterations=400)

    def worst_pen(vecs):
        from dexsynth import penetration_energy

        worst = 0.0
        for v in vecs:
            placed = forward_kinematics(
                toy_hand, HandPose.from_vector(v, toy_hand.dof))
            val, _ = penetration_energy(placed.sphere_centers,
                                        toy_hand.sphere_radius, obst.trees)
            worst = max(worst, val)
        return worst

    alphas = np.linspace(0.0, 1.0, settings.waypoints)[:, None]
    init_pen = worst_pen((1.0 - alphas) * s2.as_vector()
                         + alphas * g2.as_vector())
    plan = plan_reach(s2, g2, obst, toy_hand, settings)
    final_pen = worst_pen(plan.trajectory.as_matrix())
    endpoints_fixed = (
        np.array_equal(plan.trajectory.frames[0].as_vector(), s2.as_vector())
        and np.array_equal(plan.trajectory.frames[-1].as_vector(),
                           g2.as_vector()))

    # lift: final root height exactly 0.4
    keyframe = HandPose(np.array([0.05, -0.02, 0.0]), np.zeros(3), mid)
    lift = generate_post_grasp(keyframe, "lift", toy_hand)
    lift_z = lift.frames[-1].translation[2]

    # articulation: screw coordinate advances by 0.5
    spec = ArticulationSpec("revolute", np.array([0.0, 0.0, 1.0]),
                            np.zeros(3))
    key2 = HandPose(np.array([0.3, 0.1, 0.05]), np.array([0.2, -0.1, 0.4]),
                    mid)
    arti = generate_post_grasp(key2, "articulation", toy_hand, spec=spec)
    palm0 = forward_kinematics(toy_hand, arti.frames[0]).markers["palm_center"]
    palm1 = forward_kinematics(toy_hand,
                               arti.frames[-1]).markers["palm_center"]
    screw_err = float(np.abs(
        palm1 - axis_angle_matrix(np.array([0.0, 0.0, 1.0]), 0.5)
        @ palm0).max())

    elapsed = time.perf_counter() - start
    ok = (lerp_err <= 1e-6 and endpoints_fixed and init_pen > 0.0
          and final_pen < init_pen and lift_z == 0.4 and screw_err <= 1e-9
          and elapsed < 120.0)
    _report(6, ok, f"planning: lerp err={lerp_err:.1e} (<=1e-6), obstacle "
                   f"penetration {init_pen:.2e}->{final_pen:.2e}, endpoints "
                   f"fixed={endpoints_fixed}, lift z={lift_z}, screw "
                   f"err={screw_err:.1e} (<=1e-9) ({elapsed:.1f} s < 120 s)")


# ---------------------------------------------------------------------------
# 7. continuous Euler


def test_criterion_7_continuous_euler():
    start = time.perf_counter()
    angles = np.linspace(0.0, 1.5 * np.pi, 64)
    mats = np.stack([axis_angle_matrix(np.array([0.0, 0.0, 1.0]), a)
                     for a in angles])
    eulers = continuous_euler(mats, dt=0.04)
    recon = max(rotation_angle(euler_to_matrix(e).T @ M)
                for e, M in zip(eulers, mats))
    jump = float(np.abs(np.diff(eulers, axis=0)).max())
    elapsed = time.perf_counter() - start
    ok = recon <= 1e-3 and jump < np.pi and elapsed < 10.0
    _report(7, ok, f"continuous euler: 64-frame z-sweep, worst "
                   f"reconstruction {recon:.2e} rad (<=1e-3), max jump "
                   f"{jump:.3f} (<pi) ({elapsed:.2f} s < 10 s)")


# ---------------------------------------------------------------------------
# 8. entropy


def test_criterion_8_entropy(toy_hand):
    start = time.perf_counter()
    delta = np.tile(np.array([0.1, -0.2, 0.3, 0.0]), (100, 1))
    ent_delta, _, _ = joint_entropy(delta, toy_hand)

    bins = 10000
    t = (np.arange(bins) + 0.5) / bins
    uniform = (toy_hand.joint_lower[None, :]
               + t[:, None] * (toy_hand.joint_upper
                               - toy_hand.joint_lower)[None, :])
    ent_uniform, _, _ = joint_entropy(uniform, toy_hand, bins=bins)
    uniform_err = float(np.abs(ent_uniform - np.log(bins)).max())
    elapsed = time.perf_counter() - start
    ok = (np.all(ent_delta == 0.0) and uniform_err <= 1e-9
          and elapsed < 10.0)
    _report(8, ok, f"entropy: delta H={ent_delta.max():.1e} (=0), uniform "
                   f"|H-ln(10000)|={uniform_err:.1e} (<=1e-9) "
                   f"({elapsed:.2f} s < 10 s)")


# ---------------------------------------------------------------------------
# 9. debias


def test_criterion_9_debias():
    start = time.perf_counter()

    # 10 sample/update rounds from a 90/10 skew
    stats = DebiasStats(alpha=1.0)
    stats.register_object("obj", np.array([[0.0, 0.0, 0.0],
                                           [1.0, 0.0, 0.0]]))
    counts = stats.objects["obj"].counts
    counts[:] = [90, 10]

    def tv():
        p = counts / counts.sum()
        return 0.5 * float(np.abs(p - 0.5).sum())

    initial_tv = tv()
    for round_id in range(10):
        for idx in sample_conditions(stats, "obj", 100, seed=round_id):
            update_stats(stats, "obj", idx)
    final_tv = tv()

    # inverse-frequency sampling on counts [9, 1] with alpha = 0
    freq_stats = DebiasStats(alpha=0.0)
    freq_stats.register_object("obj", np.array([[0.0, 0.0, 0.0],
                                                [1.0, 0.0, 0.0]]))
    freq_stats.objects["obj"].counts[:] = [9, 1]
    draws = sample_conditions(freq_stats, "obj", 100_000, seed=0)
    freq = np.bincount(draws, minlength=2) / 100_000.0
    freq_err = float(np.abs(freq - np.array([0.1, 0.9])).max())

    elapsed = time.perf_counter() - start
    ok = final_tv < initial_tv and freq_err <= 0.01 and elapsed < 30.0
    _report(9, ok, f"debias: TV {initial_tv:.3f}->{final_tv:.3f} (strict "
                   f"decrease), [9,1] sampling freq={freq.round(3).tolist()} "
                   f"err={freq_err:.4f} (<=0.01) ({elapsed:.1f} s < 30 s)")


# ---------------------------------------------------------------------------
# 10. dataset format


def test_criterion_10_dataset_format(toy_hand, tmp_path):
    from test_dataset import _random_record

    start = time.perf_counter()
    rng = np.random.default_rng(10)
    records = [_random_record(toy_hand, rng, k) for k in range(1000)]
    path = tmp_path / "demo.shard"
    write_shard(records, path, toy_hand.config_hash)
    loaded = read_shard(path, expected_hand_hash=toy_hand.config_hash)
    roundtrip_ok = len(loaded) == 1000 and all(
        a == b for a, b in zip(records, loaded))

    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x10
    corrupt = tmp_path / "corrupt.shard"
    corrupt.write_bytes(bytes(blob))
    try:
        read_shard(corrupt)
        corruption_ok = False
    except ShardChecksumError:
        corruption_ok = True

    config = {
        "hand": "toy",
        "objects": [{"id": "sphere", "builtin": "unit_sphere",
                     "scale": 0.07}],
        "optim": {"steps": 120, "restarts": 3},
        "stages": ["synthesize", "export"],
    }
    manifest_a, _ = run_pipeline(dict(config), tmp_path / "run_a", seed=11)
    manifest_b, _ = run_pipeline(dict(config), tmp_path / "run_b", seed=11)
    checks_a = [s["checksum"] for s in manifest_a.shards]
    checks_b = [s["checksum"] for s in manifest_b.shards]
    determinism_ok = checks_a == checks_b and len(checks_a) > 0

    elapsed = time.perf_counter() - start
    ok = (roundtrip_ok and corruption_ok and determinism_ok
          and elapsed < 30.0)
    _report(10, ok, f"dataset: 1000-record roundtrip bit-exact="
                    f"{roundtrip_ok}, corruption rejected={corruption_ok}, "
                    f"pipeline checksums deterministic={determinism_ok} "
                    f"({elapsed:.1f} s < 30 s)")
