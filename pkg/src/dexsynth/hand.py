"""Hand kinematics: config loading, forward kinematics, pose Jacobians.

A hand is a rooted tree of links. Each link carries collision spheres
and optional contact candidate points in link-local coordinates. The
root placement is parameterized as Trans(T) * Rx(a) * Ry(b) * Rz(c)
with intrinsic x-y-z Euler angles; interior joints are revolute or
prismatic with one scalar coordinate each.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import rotations
from .errors import DimensionError, HandConfigError

MARKER_NAMES = ("palm_center", "thumb_tip", "middle_tip")


@dataclass(frozen=True)
class HandPose:
    """Pose tuple (T, R, theta): translation in meters, rotation as
    intrinsic x-y-z Euler angles in radians, joint coordinates."""

    translation: np.ndarray
    rotation: np.ndarray
    joints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3)
        j = np.asarray(self.joints, dtype=np.float64).ravel()
        for arr, label in ((t, "translation"), (r, "rotation"), (j, "joints")):
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"pose {label} contains non-finite values")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "joints", j)

    @property
    def dof(self):
        return self.joints.shape[0]

    def rotation_matrix(self):
        return rotations.euler_to_matrix(self.rotation)

    def as_vector(self):
        """Flat (6 + d,) layout: translation, Euler angles, joints."""
        return np.concatenate([self.translation, self.rotation, self.joints])

    @classmethod
    def from_vector(cls, vector, dof):
        vector = np.asarray(vector, dtype=np.float64).ravel()
        if vector.shape[0] != 6 + dof:
            raise DimensionError(
                f"pose vector has {vector.shape[0]} entries, expected {6 + dof}")
        return cls(vector[:3], vector[3:6], vector[6:])


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str
    child: str
    kind: str  # "revolute" or "prismatic"
    axis: np.ndarray  # unit, in the joint frame
    origin_xyz: np.ndarray
    origin_rot: np.ndarray  # 3x3, fixed offset from parent link frame
    lower: float
    upper: float


@dataclass(frozen=True)
class Link:
    name: str
    sphere_centers: np.ndarray  # (s, 3) local
    sphere_radii: np.ndarray  # (s,)
    contact_candidates: np.ndarray  # (c, 3) local


class HandModel:
    """Immutable kinematic description plus flattened arrays for batch
    evaluation. Joint order follows the config document and defines the
    canonical theta ordering."""

    def __init__(self, links, joints, markers, name="hand"):
        self.name = name
        self.config_hash = None  # set by load_hand for config-backed models
        self.links = list(links)
        self.joints = list(joints)
        self.link_index = {l.name: i for i, l in enumerate(self.links)}
        if len(self.link_index) != len(self.links):
            raise HandConfigError("duplicate link names in hand config")
        self.dof = len(self.joints)

        self._validate_tree()
        self._flatten()

        self.markers = {}
        for mname in MARKER_NAMES:
            if mname not in markers:
                raise HandConfigError(f"missing marker '{mname}'")
            link_name, point = markers[mname]
            if link_name not in self.link_index:
                raise HandConfigError(
                    f"marker '{mname}' references unknown link '{link_name}'")
            self.markers[mname] = (self.link_index[link_name],
                                   np.asarray(point, dtype=np.float64).reshape(3))
        self.marker_links = np.array(
            [self.markers[m][0] for m in MARKER_NAMES], dtype=np.int64)
        self.marker_local = np.stack(
            [self.markers[m][1] for m in MARKER_NAMES])

    def _validate_tree(self):
        child_joint = {}
        for j_idx, j in enumerate(self.joints):
            for end, role in ((j.parent, "parent"), (j.child, "child")):
                if end not in self.link_index:
                    raise HandConfigError(
                        f"joint '{j.name}' references unknown {role} link '{end}'")
            if j.child in child_joint:
                raise HandConfigError(
                    f"link '{j.child}' is the child of more than one joint")
            if not j.lower < j.upper:
                raise HandConfigError(
                    f"joint '{j.name}' limits must satisfy lower < upper")
            child_joint[j.child] = j_idx

        roots = [l.name for l in self.links if l.name not in child_joint]
        if len(roots) != 1:
            raise HandConfigError(
                f"hand must have exactly one root link, found {roots}")
        self.root_link = roots[0]

        # Peel joints whose parent is already placed; leftovers mean a cycle.
        order = []
        placed = {self.root_link}
        pending = list(range(len(self.joints)))
        while pending:
            progressed = False
            remaining = []
            for idx in pending:
                if self.joints[idx].parent in placed:
                    placed.add(self.joints[idx].child)
                    order.append(idx)
                    progressed = True
                else:
                    remaining.append(idx)
            if not progressed:
                names = sorted(self.joints[i].child for i in remaining)
                raise HandConfigError(
                    f"links not reachable from root (cycle or orphan): {names}")
            pending = remaining
        self.topo_joint_indices = order  # parents always precede children

    def _flatten(self):
        L = len(self.links)
        d = self.dof

        sphere_link, sphere_local, sphere_radius = [], [], []
        cand_link, cand_local = [], []
        for idx, link in enumerate(self.links):
            for c, r in zip(link.sphere_centers, link.sphere_radii):
                if r <= 0.0:
                    raise HandConfigError(
                        f"link '{link.name}' has a sphere with radius {r}")
                sphere_link.append(idx)
                sphere_local.append(c)
                sphere_radius.append(r)
            for c in link.contact_candidates:
                cand_link.append(idx)
                cand_local.append(c)
        self.sphere_link = np.array(sphere_link, dtype=np.int64)
        self.sphere_local = (np.array(sphere_local, dtype=np.float64)
                             if sphere_local else np.zeros((0, 3)))
        self.sphere_radius = np.array(sphere_radius, dtype=np.float64)
        self.candidate_link = np.array(cand_link, dtype=np.int64)
        self.candidate_local = (np.array(cand_local, dtype=np.float64)
                                if cand_local else np.zeros((0, 3)))

        self.joint_lower = np.array([j.lower for j in self.joints])
        self.joint_upper = np.array([j.upper for j in self.joints])
        self.joint_is_revolute = np.array(
            [j.kind == "revolute" for j in self.joints], dtype=bool)

        # ancestor[l, j] is True when joint j lies on the path root -> link l.
        parent_of = {j.child: (j.parent, idx) for idx, j in enumerate(self.joints)}
        self.ancestor = np.zeros((L, d), dtype=bool)
        for link in self.links:
            l_idx = self.link_index[link.name]
            cur = link.name
            while cur in parent_of:
                cur, j_idx = parent_of[cur]
                self.ancestor[l_idx, j_idx] = True

        # Sphere pairs for self-collision: links that are neither identical
        # nor directly connected by a joint.
        adjacent = {(self.link_index[j.parent], self.link_index[j.child])
                    for j in self.joints}
        adjacent |= {(b, a) for a, b in adjacent}
        pair_i, pair_j = [], []
        S = len(self.sphere_link)
        for i in range(S):
            for k in range(i + 1, S):
                li, lk = self.sphere_link[i], self.sphere_link[k]
                if li == lk or (li, lk) in adjacent:
                    continue
                pair_i.append(i)
                pair_j.append(k)
        self.pair_i = np.array(pair_i, dtype=np.int64)
        self.pair_j = np.array(pair_j, dtype=np.int64)
        self.pair_radius_sum = (self.sphere_radius[self.pair_i]
                                + self.sphere_radius[self.pair_j]
                                if len(pair_i) else np.zeros(0))

    @property
    def num_spheres(self):
        return self.sphere_link.shape[0]

    @property
    def num_candidates(self):
        return self.candidate_link.shape[0]

    def mid_joints(self):
        return 0.5 * (self.joint_lower + self.joint_upper)

    def clamp_joints(self, theta):
        return np.clip(theta, self.joint_lower, self.joint_upper)

    def __repr__(self):
        return (f"HandModel({self.name!r}, links={len(self.links)}, "
                f"dof={self.dof}, spheres={self.num_spheres}, "
                f"candidates={self.num_candidates})")


def _as_unit(vec, what):
    v = np.asarray(vec, dtype=np.float64).reshape(3)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise HandConfigError(f"{what} axis has zero length")
    return v / n


def load_hand(source):
    """Build a HandModel from a config document.

    ``source`` is a path to a JSON file or an already-parsed dict. Schema:
    links (name, spheres [{center, radius}], contact_candidates [[x,y,z]]),
    joints (name, parent, child, type, axis, origin {xyz, rpy}, limits),
    markers ({palm_center|thumb_tip|middle_tip: {link, point}}). Origin
    rpy uses the same intrinsic x-y-z convention as the root rotation.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        default_name = str(source)
    else:
        doc = source
        default_name = "hand"
    if not isinstance(doc, dict):
        raise HandConfigError("hand config must be a JSON object")
    for key in ("links", "joints", "markers"):
        if key not in doc:
            raise HandConfigError(f"hand config missing '{key}'")

    links = []
    for entry in doc["links"]:
        try:
            name = entry["name"]
            spheres = entry.get("spheres", [])
            centers = np.array([s["center"] for s in spheres],
                               dtype=np.float64).reshape(-1, 3)
            radii = np.array([s["radius"] for s in spheres], dtype=np.float64)
            cands = np.array(entry.get("contact_candidates", []),
                             dtype=np.float64).reshape(-1, 3)
        except (KeyError, TypeError, ValueError) as exc:
            raise HandConfigError(f"malformed link entry: {entry!r}") from exc
        links.append(Link(name, centers, radii, cands))

    joints = []
    for entry in doc["joints"]:
        try:
            kind = entry["type"]
            if kind not in ("revolute", "prismatic"):
                raise HandConfigError(
                    f"joint '{entry.get('name')}' has unknown type '{kind}'")
            origin = entry.get("origin", {})
            xyz = np.asarray(origin.get("xyz", (0.0, 0.0, 0.0)),
                             dtype=np.float64).reshape(3)
            rpy = np.asarray(origin.get("rpy", (0.0, 0.0, 0.0)),
                             dtype=np.float64).reshape(3)
            lo, hi = entry["limits"]
            joints.append(Joint(
                name=entry["name"], parent=entry["parent"],
                child=entry["child"], kind=kind,
                axis=_as_unit(entry["axis"], f"joint '{entry['name']}'"),
                origin_xyz=xyz, origin_rot=rotations.euler_to_matrix(rpy),
                lower=float(lo), upper=float(hi)))
        except HandConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise HandConfigError(f"malformed joint entry: {entry!r}") from exc

    markers = {}
    for mname, m in doc["markers"].items():
        try:
            markers[mname] = (m["link"], m["point"])
        except (KeyError, TypeError) as exc:
            raise HandConfigError(f"malformed marker '{mname}'") from exc

    model = HandModel(links, joints, markers,
                      name=doc.get("name", default_name))
    model.config_hash = hand_config_hash(doc)
    return model


def hand_config_hash(config):
    """SHA-256 over the canonical JSON form of a hand config document.

    Canonical form = sorted keys, compact separators, UTF-8. Stable
    across writers regardless of formatting, so dataset shards from
    different components agree on the hand they reference.
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Placements:
    """World-frame results of forward kinematics for one pose."""

    link_rotations: np.ndarray  # (L, 3, 3)
    link_translations: np.ndarray  # (L, 3)
    sphere_centers: np.ndarray  # (S, 3)
    contact_points: np.ndarray  # (C, 3)
    markers: dict  # name -> (3,)


@dataclass(frozen=True)
class BatchPlacements:
    link_rotations: np.ndarray  # (B, L, 3, 3)
    link_translations: np.ndarray  # (B, L, 3)
    sphere_centers: np.ndarray  # (B, S, 3)
    contact_points: np.ndarray  # (B, C, 3)
    marker_points: np.ndarray  # (B, 3, 3) ordered palm_center, thumb, middle
    joint_axes: np.ndarray  # (B, d, 3) world joint axes
    joint_origins: np.ndarray  # (B, d, 3) world joint anchor points


def _axis_rotation_batch(axis, angles):
    """Rodrigues rotations (B, 3, 3) about one fixed unit axis."""
    K = rotations.cross_matrix(axis)
    K2 = K @ K
    s = np.sin(angles)[:, None, None]
    c = (1.0 - np.cos(angles))[:, None, None]
    return np.eye(3)[None] + s * K[None] + c * K2[None]


def forward_kinematics_batch(model, translations, eulers, joint_values):
    """Vectorized FK over B poses given as (B,3), (B,3), (B,d) arrays."""
    translations = np.asarray(translations, dtype=np.float64)
    eulers = np.asarray(eulers, dtype=np.float64)
    joint_values = np.asarray(joint_values, dtype=np.float64)
    B = translations.shape[0]
    if joint_values.shape != (B, model.dof):
        raise DimensionError(
            f"joint array shape {joint_values.shape} does not match "
            f"(batch {B}, dof {model.dof})")

    L = len(model.links)
    rot = np.zeros((B, L, 3, 3))
    trans = np.zeros((B, L, 3))
    root = model.link_index[model.root_link]
    rot[:, root] = rotations.euler_to_matrix_batch(eulers)
    trans[:, root] = translations

    joint_axes = np.zeros((B, model.dof, 3))
    joint_origins = np.zeros((B, model.dof, 3))

    for j_idx in model.topo_joint_indices:
        joint = model.joints[j_idx]
        p = model.link_index[joint.parent]
        c = model.link_index[joint.child]
        Rp = rot[:, p]
        tp = trans[:, p]
        R_origin = Rp @ joint.origin_rot
        t_origin = tp + Rp @ joint.origin_xyz
        axis_world = R_origin @ joint.axis
        q = joint_values[:, j_idx]
        if joint.kind == "revolute":
            rot[:, c] = R_origin @ _axis_rotation_batch(joint.axis, q)
            trans[:, c] = t_origin
        else:
            rot[:, c] = R_origin
            trans[:, c] = t_origin + axis_world * q[:, None]
        joint_axes[:, j_idx] = axis_world
        joint_origins[:, j_idx] = t_origin

    def place(link_ids, local):
        if len(link_ids) == 0:
            return np.zeros((B, 0, 3))
        R = rot[:, link_ids]  # (B, P, 3, 3)
        t = trans[:, link_ids]  # (B, P, 3)
        return np.einsum("bpij,pj->bpi", R, local) + t

    spheres = place(model.sphere_link, model.sphere_local)
    cands = place(model.candidate_link, model.candidate_local)
    marks = place(model.marker_links, model.marker_local)
    return BatchPlacements(rot, trans, spheres, cands, marks,
                           joint_axes, joint_origins)


def forward_kinematics(model, pose):
    """World placements of one pose."""
    if pose.dof != model.dof:
        raise DimensionError(
            f"pose has {pose.dof} joints, model has {model.dof}")
    b = forward_kinematics_batch(model, pose.translation[None],
                                 pose.rotation[None], pose.joints[None])
    markers = {name: b.marker_points[0, i]
               for i, name in enumerate(MARKER_NAMES)}
    return Placements(b.link_rotations[0], b.link_translations[0],
                      b.sphere_centers[0], b.contact_points[0], markers)


def _point_jacobians(model, translations, eulers, points, point_links,
                     placements):
    """Derivative blocks (B, P, 3, 6 + d) of world points w.r.t. the pose."""
    B, P = points.shape[0], points.shape[1]
    d = model.dof
    out = np.zeros((B, P, 3, 6 + d))
    out[:, :, :, :3] = np.eye(3)

    # Points expressed in the root frame do not depend on T or R.
    R_root = placements.link_rotations[:, model.link_index[model.root_link]]
    rel = np.einsum("bji,bpj->bpi", R_root, points - translations[:, None, :])
    dR = rotations.euler_derivatives_batch(eulers)  # (B, 3, 3, 3)
    out[:, :, :, 3:6] = np.einsum("bkij,bpj->bpik", dR, rel)

    if d:
        mask = model.ancestor[point_links]  # (P, d)
        arm = points[:, :, None, :] - placements.joint_origins[:, None, :, :]
        omega = placements.joint_axes[:, None, :, :]  # (B, 1, d, 3)
        col = np.where(model.joint_is_revolute[None, None, :, None],
                       np.cross(np.broadcast_to(omega, arm.shape), arm),
                       np.broadcast_to(omega, arm.shape))
        col = col * mask[None, :, :, None]
        out[:, :, :, 6:] = np.transpose(col, (0, 1, 3, 2))
    return out


def pose_jacobians_batch(model, translations, eulers, joint_values,
                         placements=None):
    """Jacobians of all sphere centers and contact candidates, batched.

    Returns (sphere_jac, candidate_jac) with shapes (B, S, 3, 6+d) and
    (B, C, 3, 6+d); columns are ordered translation, Euler angles, joints.
    """
    if placements is None:
        placements = forward_kinematics_batch(model, translations, eulers,
                                              joint_values)
    translations = np.asarray(translations, dtype=np.float64)
    eulers = np.asarray(eulers, dtype=np.float64)
    sj = _point_jacobians(model, translations, eulers,
                          placements.sphere_centers, model.sphere_link,
                          placements)
    cj = _point_jacobians(model, translations, eulers,
                          placements.contact_points, model.candidate_link,
                          placements)
    return sj, cj


@dataclass(frozen=True)
class PoseJacobians:
    spheres: np.ndarray  # (S, 3, 6 + d)
    candidates: np.ndarray  # (C, 3, 6 + d)


def pose_jacobians(model, pose):
    """Analytic derivatives of world points for a single pose."""
    if pose.dof != model.dof:
        raise DimensionError(
            f"pose has {pose.dof} joints, model has {model.dof}")
    sj, cj = pose_jacobians_batch(model, pose.translation[None],
                                  pose.rotation[None], pose.joints[None])
    return PoseJacobians(sj[0], cj[0])


def heading_direction(model, pose):
    """Unit vector from the palm center toward the midpoint of the thumb
    and middle fingertips."""
    placed = forward_kinematics(model, pose)
    mid = 0.5 * (placed.markers["thumb_tip"] + placed.markers["middle_tip"])
    vec = mid - placed.markers["palm_center"]
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise HandConfigError(
            "heading is undefined: fingertip midpoint coincides with palm center")
    return vec / norm


def heading_direction_batch(model, marker_points):
    """Headings (B, 3) from stacked marker points (B, 3, 3)."""
    mid = 0.5 * (marker_points[:, 1] + marker_points[:, 2])
    vec = mid - marker_points[:, 0]
    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    if np.any(norm < 1e-12):
        raise HandConfigError(
            "heading is undefined: fingertip midpoint coincides with palm center")
    return vec / norm
