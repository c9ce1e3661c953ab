"""Procedural watertight meshes used as fixtures and bundled assets."""

import numpy as np

from .trimesh import TriMesh


def make_box(size_x=1.0, size_y=1.0, size_z=1.0, center=(0.0, 0.0, 0.0),
             scale=1.0, name="box"):
    """Axis-aligned box as 12 outward-oriented triangles."""
    hx, hy, hz = size_x / 2.0, size_y / 2.0, size_z / 2.0
    cx, cy, cz = center
    v = np.array([
        [cx - hx, cy - hy, cz - hz],
        [cx + hx, cy - hy, cz - hz],
        [cx + hx, cy + hy, cz - hz],
        [cx - hx, cy + hy, cz - hz],
        [cx - hx, cy - hy, cz + hz],
        [cx + hx, cy - hy, cz + hz],
        [cx + hx, cy + hy, cz + hz],
        [cx - hx, cy + hy, cz + hz],
    ])
    f = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom (-z)
        [4, 5, 6], [4, 6, 7],  # top (+z)
        [0, 1, 5], [0, 5, 4],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [1, 2, 6], [1, 6, 5],  # +x
        [3, 0, 4], [3, 4, 7],  # -x
    ])
    return TriMesh(v, f, scale=scale, name=name)


def make_unit_cube(scale=1.0, name="unit_cube"):
    """Unit cube centered at the origin."""
    return make_box(1.0, 1.0, 1.0, scale=scale, name=name)


def make_icosphere(subdivisions=2, radius=0.5, center=(0.0, 0.0, 0.0),
                   scale=1.0, name="sphere"):
    """Subdivided icosahedron; subdivisions=2 gives 320 triangles.

    The default radius of 0.5 makes a unit-diameter sphere so load-time
    scale factors read directly as object diameters in meters.
    """
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [v for v in verts]
    cache = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key in cache:
            return cache[key]
        m = verts[i] + verts[j]
        m /= np.linalg.norm(m)
        verts.append(m)
        cache[key] = len(verts) - 1
        return cache[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces

    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(v, np.array(faces, dtype=np.int64), scale=scale, name=name)


def make_table_slab(width=0.8, depth=0.8, thickness=0.04, top_z=0.0,
                    scale=1.0, name="table"):
    """Table modeled as a slab whose top face sits at ``top_z``."""
    return make_box(width, depth, thickness,
                    center=(0.0, 0.0, top_z - thickness / 2.0),
                    scale=scale, name=name)


def write_obj(mesh, path):
    """Write a mesh to an ASCII OBJ file (unscaled coordinates as stored)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {mesh.name}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
