"""Bundled fixtures: a toy two-finger hand and simple object meshes."""

import importlib.resources as _resources

from ..geometry import load_mesh
from ..hand import load_hand


def asset_path(name):
    """Filesystem path of a bundled asset file."""
    return str(_resources.files(__package__) / name)


def load_toy_hand():
    """Two-finger test hand with four revolute joints."""
    return load_hand(asset_path("toy_hand.json"))


def load_unit_sphere(scale=1.0):
    """Unit-diameter icosphere; ``scale`` is the object diameter in meters."""
    return load_mesh(asset_path("unit_sphere.obj"), scale=scale,
                     name="unit_sphere")


def load_unit_cube(scale=1.0):
    """Unit cube centered at the origin; ``scale`` is the edge in meters."""
    return load_mesh(asset_path("unit_cube.obj"), scale=scale,
                     name="unit_cube")


def load_table_slab(scale=1.0):
    """Slab whose top face is the z = 0 plane (0.8 x 0.8 x 0.04 at scale 1)."""
    return load_mesh(asset_path("table_slab.obj"), scale=scale, name="table")
