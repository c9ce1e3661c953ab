"""Synthesize grasps on a sphere resting above a table and score them.

Runs a small batch of randomized descents, then prints the quality
metrics for each result. Takes about half a minute on one core.
"""

import numpy as np

from dexsynth import (
    OptimSettings,
    Scene,
    assets,
    build_bvh,
    evaluate_pose,
    make_table_slab,
    optimize_batch,
    sample_initializations,
)

def main():
    hand = assets.load_toy_hand()
    obj = assets.load_unit_sphere(scale=0.07)
    scene = Scene(build_bvh(obj),
                  (build_bvh(make_table_slab(top_z=-0.035)),))

    settings = OptimSettings(steps=2000, restarts=8, seed=0)
    inits = sample_initializations(hand, scene, settings.restarts,
                                   seed=settings.seed)
    print(f"optimizing {len(inits)} restarts x {settings.steps} steps ...")
    results = optimize_batch(hand, scene, "grasp", inits, settings=settings)

    feasible = 0
    for res in results:
        report = evaluate_pose(res.pose, hand, scene.object_tree)
        feasible += report.feasible
        print(f"  restart {res.init_index}: energy={res.energy:9.4f}  "
              f"q1={report.q1:.4f}  contacts={report.contact_count}  "
              f"max_pen={report.max_penetration * 1000:6.3f} mm  "
              f"{'ok' if report.feasible else 'rejected'}")

    energies = np.array([r.energy for r in results])
    print(f"\n{feasible}/{len(results)} feasible, "
          f"best energy {energies.min():.4f}, "
          f"median {np.median(energies):.4f}")

if __name__ == "__main__":
    main()
