"""Dexterous grasp synthesis: energy-based optimization, planning, datasets."""

__version__ = "0.1.0"

from .errors import (
    EngineError,
    MeshError,
    HandConfigError,
    DimensionError,
    OptimizationError,
    PlanningError,
    PipelineError,
    ShardError,
    ShardChecksumError,
    ShardVersionError,
    ConfigError,
)
from .geometry import (
    TriMesh,
    load_mesh,
    BvhTree,
    build_bvh,
    SdfResult,
    signed_distance,
    signed_distance_batch,
    closest_point_batch,
    sphere_penetration,
    sphere_penetration_batch,
    PointCloud,
    sample_surface,
    make_box,
    make_unit_cube,
    make_icosphere,
    make_table_slab,
    write_obj,
)
from .rotations import (
    euler_to_matrix,
    matrix_to_euler,
    euler_to_matrix_batch,
    axis_angle_matrix,
    align_vectors,
    rotation_angle,
    is_rotation_matrix,
)
from .hand import (
    HandPose,
    HandModel,
    Placements,
    load_hand,
    hand_config_hash,
    forward_kinematics,
    forward_kinematics_batch,
    pose_jacobians,
    heading_direction,
)
from .energy import (
    TASKS,
    EnergyWeights,
    ContactSet,
    ArticulationSpec,
    Scene,
    EnergyReport,
    wrench_basis,
    force_closure,
    task_wrench,
    contact_distance,
    penetration_energy,
    joint_limit_energy,
    self_collision_energy,
    smoothness_energy,
    total_energy,
)
from .optimizer import (
    OptimSettings,
    OptimResult,
    sample_initializations,
    optimize_grasp,
    optimize_batch,
    post_optimize,
    post_optimize_batch,
)
from .metrics import (
    MetricReport,
    detect_contacts,
    q1_estimate,
    max_penetration,
    joint_entropy,
    entropy_of_poses,
    evaluate_pose,
)
from .planner import (
    Trajectory,
    PlanSettings,
    PlanResult,
    plan_reach,
    generate_post_grasp,
    continuous_euler,
)
from .debias import (
    ObjectStats,
    DebiasStats,
    associate_point,
    update_stats,
    sample_conditions,
    object_budget,
    save_stats,
    load_stats,
)
from .dataset import (
    DemoRecord,
    Manifest,
    write_shard,
    read_shard,
    read_shard_header,
    save_manifest,
    load_manifest,
    verify_manifest,
)
from .pipeline import PipelineConfig, parse_config, run_pipeline
from . import assets

__all__ = [
    "EngineError",
    "MeshError",
    "HandConfigError",
    "DimensionError",
    "OptimizationError",
    "PlanningError",
    "PipelineError",
    "ShardError",
    "ShardChecksumError",
    "ShardVersionError",
    "ConfigError",
    "TriMesh",
    "load_mesh",
    "BvhTree",
    "build_bvh",
    "SdfResult",
    "signed_distance",
    "signed_distance_batch",
    "closest_point_batch",
    "sphere_penetration",
    "sphere_penetration_batch",
    "PointCloud",
    "sample_surface",
    "make_box",
    "make_unit_cube",
    "make_icosphere",
    "make_table_slab",
    "write_obj",
    "euler_to_matrix",
    "matrix_to_euler",
    "euler_to_matrix_batch",
    "axis_angle_matrix",
    "align_vectors",
    "rotation_angle",
    "is_rotation_matrix",
    "HandPose",
    "HandModel",
    "Placements",
    "load_hand",
    "hand_config_hash",
    "forward_kinematics",
    "forward_kinematics_batch",
    "pose_jacobians",
    "heading_direction",
    "TASKS",
    "EnergyWeights",
    "ContactSet",
    "ArticulationSpec",
    "Scene",
    "EnergyReport",
    "wrench_basis",
    "force_closure",
    "task_wrench",
    "contact_distance",
    "penetration_energy",
    "joint_limit_energy",
    "self_collision_energy",
    "smoothness_energy",
    "total_energy",
    "OptimSettings",
    "OptimResult",
    "sample_initializations",
    "optimize_grasp",
    "optimize_batch",
    "post_optimize",
    "post_optimize_batch",
    "MetricReport",
    "detect_contacts",
    "q1_estimate",
    "max_penetration",
    "joint_entropy",
    "entropy_of_poses",
    "evaluate_pose",
    "Trajectory",
    "PlanSettings",
    "PlanResult",
    "plan_reach",
    "generate_post_grasp",
    "continuous_euler",
    "ObjectStats",
    "DebiasStats",
    "associate_point",
    "update_stats",
    "sample_conditions",
    "object_budget",
    "save_stats",
    "load_stats",
    "DemoRecord",
    "Manifest",
    "write_shard",
    "read_shard",
    "read_shard_header",
    "save_manifest",
    "load_manifest",
    "verify_manifest",
    "PipelineConfig",
    "parse_config",
    "run_pipeline",
    "assets",
    "__version__",
]
