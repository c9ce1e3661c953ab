"""Triangle-mesh geometry: loading, BVH queries, signed distance, sampling."""

from .trimesh import TriMesh, load_mesh
from .bvh import BvhTree, build_bvh
from .sdf import (
    SdfResult,
    signed_distance,
    signed_distance_batch,
    closest_point_batch,
    sphere_penetration,
    sphere_penetration_batch,
)
from .sampling import PointCloud, sample_surface
from .primitives import (
    make_box,
    make_unit_cube,
    make_icosphere,
    make_table_slab,
    write_obj,
)

__all__ = [
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
]
