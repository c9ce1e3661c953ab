"""Triangle-mesh container, OBJ/STL loading, and pseudonormal setup."""

import struct
import warnings

import numpy as np

from ..errors import MeshError

_MIN_TRIANGLE_AREA = 1e-12  # m^2, after load-time scaling


class TriMesh:
    """Immutable triangle mesh in meters.

    Vertices are scaled once at construction; the angle-weighted
    pseudonormals needed for signed-distance queries are precomputed
    here so both the BVH path and brute-force checks share them.
    """

    def __init__(self, vertices, triangles, scale=1.0, name="mesh"):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array", name=name)
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (m, 3) array", name=name)
        if not np.isfinite(vertices).all():
            raise MeshError("vertices contain non-finite coordinates", name=name)
        if scale <= 0.0 or not np.isfinite(scale):
            raise MeshError("scale must be a positive finite scalar",
                            name=name, scale=scale)
        if triangles.size and (triangles.min() < 0
                               or triangles.max() >= len(vertices)):
            raise MeshError("triangle indices out of range", name=name)

        self.name = name
        self.scale = float(scale)
        self.vertices = vertices * self.scale
        self.triangles = triangles
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

        self.tri_verts = self.vertices[self.triangles]  # (F, 3, 3)
        e1 = self.tri_verts[:, 1] - self.tri_verts[:, 0]
        e2 = self.tri_verts[:, 2] - self.tri_verts[:, 0]
        cross = np.cross(e1, e2)
        double_area = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * double_area
        if triangles.size:
            bad = np.nonzero(self.areas <= _MIN_TRIANGLE_AREA)[0]
            if bad.size:
                raise MeshError("zero-area triangle after scaling",
                                name=name, triangle=int(bad[0]))
            self.face_normals = cross / double_area[:, None]
        else:
            self.face_normals = np.zeros((0, 3))

        self._build_pseudonormals()

    # -- derived geometry ------------------------------------------------

    def _build_pseudonormals(self):
        nf = len(self.triangles)
        nv = len(self.vertices)
        vertex_normals = np.zeros((nv, 3))
        edge_accum = {}
        edge_count = {}

        for f in range(nf):
            i0, i1, i2 = self.triangles[f]
            v0, v1, v2 = self.tri_verts[f]
            n = self.face_normals[f]
            for vi, a, b, c in ((i0, v0, v1, v2), (i1, v1, v2, v0),
                                (i2, v2, v0, v1)):
                u = b - a
                w = c - a
                cosang = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
                ang = np.arccos(np.clip(cosang, -1.0, 1.0))
                vertex_normals[vi] += ang * n
            for a, b in ((i0, i1), (i1, i2), (i2, i0)):
                key = (a, b) if a < b else (b, a)
                edge_accum[key] = edge_accum.get(key, 0.0) + n
                edge_count[key] = edge_count.get(key, 0) + 1

        norms = np.linalg.norm(vertex_normals, axis=1)
        nonzero = norms > 0.0
        vertex_normals[nonzero] /= norms[nonzero, None]
        self.vertex_pseudonormals = vertex_normals

        edge_normals = np.zeros((nf, 3, 3))
        for f in range(nf):
            i0, i1, i2 = self.triangles[f]
            for slot, (a, b) in enumerate(((i0, i1), (i1, i2), (i2, i0))):
                key = (a, b) if a < b else (b, a)
                n = edge_accum[key]
                ln = np.linalg.norm(n)
                edge_normals[f, slot] = n / ln if ln > 0.0 else self.face_normals[f]
        self.edge_pseudonormals = edge_normals

        self.watertight = bool(nf) and all(c == 2 for c in edge_count.values())
        if nf and not self.watertight:
            warnings.warn(
                f"mesh '{self.name}' is not watertight; signed-distance sign "
                "uses the pseudonormal heuristic", stacklevel=3)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def bounds(self):
        """(min, max) corners of the axis-aligned bounding box."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_sphere(self):
        """Center and radius of the AABB-centered bounding sphere."""
        lo, hi = self.bounds()
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max())
        return center, radius

    def __repr__(self):
        return (f"TriMesh(name={self.name!r}, vertices={len(self.vertices)}, "
                f"triangles={len(self.triangles)}, scale={self.scale})")


# -- loaders -------------------------------------------------------------

def load_mesh(path, scale=1.0, name=None):
    """Load an OBJ or STL file (ASCII or binary) into a TriMesh."""
    path = str(path)
    if name is None:
        name = path.rsplit("/", 1)[-1]
    lower = path.lower()
    if lower.endswith(".obj"):
        vertices, triangles = _parse_obj(path)
    elif lower.endswith(".stl"):
        vertices, triangles = _parse_stl(path)
    else:
        raise MeshError("unsupported mesh format", path=path)
    return TriMesh(vertices, triangles, scale=scale, name=name)


def _parse_obj(path):
    vertices = []
    triangles = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError("malformed vertex record",
                                    path=path, line=lineno)
                vertices.append([float(parts[1]), float(parts[2]),
                                 float(parts[3])])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                if len(idx) != 3:
                    raise MeshError("only triangular faces are supported",
                                    path=path, line=lineno, face_size=len(idx))
                tri = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                triangles.append(tri)
            # all other records (vt, vn, usemtl, ...) are ignored
    if not vertices:
        raise MeshError("OBJ file contains no vertices", path=path)
    return np.array(vertices, dtype=np.float64), np.array(triangles, dtype=np.int64)


def _parse_stl(path):
    with open(path, "rb") as fh:
        head = fh.read(5)
        fh.seek(0)
        data = fh.read()
    if head == b"solid" and b"facet" in data[:1024]:
        return _parse_stl_ascii(data.decode("utf-8", errors="replace"), path)
    return _parse_stl_binary(data, path)


def _parse_stl_ascii(text, path):
    raw = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            raw.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if not raw or len(raw) % 3 != 0:
        raise MeshError("malformed ASCII STL", path=path, vertices=len(raw))
    return _weld(np.array(raw, dtype=np.float64))


def _parse_stl_binary(data, path):
    if len(data) < 84:
        raise MeshError("binary STL too short", path=path)
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    if len(data) < expected:
        raise MeshError("binary STL truncated", path=path,
                        expected_bytes=expected, actual_bytes=len(data))
    tris = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84)
    tris = tris.reshape(count, 50)
    coords = tris[:, 12:48].copy().view("<f4").reshape(count, 3, 3)
    return _weld(coords.reshape(-1, 3).astype(np.float64))


def _weld(raw_vertices):
    """Merge exactly repeated vertices so facets share topology."""
    uniq, inverse = np.unique(raw_vertices, axis=0, return_inverse=True)
    triangles = inverse.reshape(-1, 3)
    return uniq, triangles.astype(np.int64)
