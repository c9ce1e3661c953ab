"""Plan a reach into a cluttered scene, then lift the object.

Builds the combined reach + grasp + post trajectory around one synthesized
grasp keyframe and prints a per-stage summary, including the penetration
profile before and after trajectory refinement.
"""

import numpy as np

from dexsynth import (
    HandPose,
    OptimSettings,
    Scene,
    assets,
    build_bvh,
    forward_kinematics,
    generate_post_grasp,
    make_table_slab,
    optimize_batch,
    penetration_energy,
    plan_reach,
    sample_initializations,
)
from dexsynth.planner import PlanSettings


def worst_penetration(model, scene, frames):
    worst = 0.0
    for pose in frames:
        placed = forward_kinematics(model, pose)
        val, _ = penetration_energy(placed.sphere_centers,
                                    model.sphere_radius, scene.trees)
        worst = max(worst, val)
    return worst

def main():
    hand = assets.load_toy_hand()
    obj = assets.load_unit_sphere(scale=0.07)
    scene = Scene(build_bvh(obj),
                  (build_bvh(make_table_slab(top_z=-0.035)),))

    print("synthesizing a grasp keyframe ...")
    inits = sample_initializations(hand, scene, 4, seed=1)
    results = optimize_batch(hand, scene, "grasp", inits,
                             settings=OptimSettings(steps=2000, restarts=4,
                                                    seed=1))
    keyframe = min(results, key=lambda r: r.energy).pose

    start = HandPose(np.array([-0.35, 0.0, 0.25]), np.zeros(3),
                     hand.mid_joints())
    settings = PlanSettings(waypoints=24, iterations=300)
    reach = plan_reach(start, keyframe, scene, hand, settings)

    alphas = np.linspace(0.0, 1.0, settings.waypoints)[:, None]
    straight = [HandPose.from_vector(v, hand.dof) for v in
                (1 - alphas) * start.as_vector()
                + alphas * keyframe.as_vector()]
    print(f"reach: {len(reach.trajectory)} waypoints, "
          f"feasible={reach.feasible}, residual={reach.residual:.3e}")
    print(f"  straight-line worst penetration "
          f"{worst_penetration(hand, scene, straight):.3e}")
    print(f"  refined       worst penetration "
          f"{worst_penetration(hand, scene, reach.trajectory.frames):.3e}")

    lift = generate_post_grasp(keyframe, "lift", hand, settings=settings)
    z = [f.translation[2] for f in lift.frames]
    print(f"lift: {len(lift)} frames, root z {z[0]:.3f} -> {z[-1]:.3f}")

    full = list(reach.trajectory.frames) + list(lift.frames[1:])
    stages = list(reach.trajectory.stages) + list(lift.stages[1:])
    print(f"combined trajectory: {len(full)} frames, stages "
          + " -> ".join(sorted(set(stages), key=stages.index)))

if __name__ == "__main__":
    main()
