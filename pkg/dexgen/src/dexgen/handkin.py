"""Differentiable hand kinematics from a hand config document.

Parses the JSON hand schema (links with collision spheres and contact
candidates, revolute/prismatic joints with origins and limits, named
markers) and evaluates batched forward kinematics in torch, so losses on
sphere placements can backpropagate into generated pose vectors.

Pose vectors are ``(translation xyz, intrinsic x-y-z Euler angles,
joint values)`` of length ``6 + dof``.
"""

import json

import numpy as np
import torch

from .errors import ConfigError, DimensionError
from .records import config_hash

MARKER_NAMES = ("palm_center", "thumb_tip", "middle_tip")


def euler_matrix(eulers):
    """Batched intrinsic x-y-z rotation matrices: (B, 3) -> (B, 3, 3)."""
    a, b, c = eulers[:, 0], eulers[:, 1], eulers[:, 2]
    sa, ca = torch.sin(a), torch.cos(a)
    sb, cb = torch.sin(b), torch.cos(b)
    sc, cc = torch.sin(c), torch.cos(c)
    rows = [
        torch.stack([cb * cc, -cb * sc, sb], dim=-1),
        torch.stack([sa * sb * cc + ca * sc,
                     -sa * sb * sc + ca * cc, -sa * cb], dim=-1),
        torch.stack([-ca * sb * cc + sa * sc,
                     ca * sb * sc + sa * cc, ca * cb], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def _axis_rotation(axis, angles):
    """Rodrigues rotations (B, 3, 3) about one fixed unit axis."""
    K = torch.zeros(3, 3, dtype=angles.dtype, device=angles.device)
    x, y, z = axis
    K[0, 1], K[0, 2] = -z, y
    K[1, 0], K[1, 2] = z, -x
    K[2, 0], K[2, 1] = -y, x
    K2 = K @ K
    s = torch.sin(angles)[:, None, None]
    c = (1.0 - torch.cos(angles))[:, None, None]
    eye = torch.eye(3, dtype=angles.dtype, device=angles.device)
    return eye[None] + s * K[None] + c * K2[None]


def _unit(vec, what):
    v = np.asarray(vec, dtype=np.float64).reshape(3)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ConfigError(f"{what} axis has zero length")
    return v / n


class HandKinematics:
    """Immutable chain description with torch buffers for batched FK."""

    def __init__(self, document):
        if not isinstance(document, dict):
            raise ConfigError("hand config must be a JSON object")
        for key in ("links", "joints", "markers"):
            if key not in document:
                raise ConfigError(f"hand config missing '{key}'")
        self.name = document.get("name", "hand")
        self.document = document
        self.hash = config_hash(document)

        link_names = [entry["name"] for entry in document["links"]]
        if len(set(link_names)) != len(link_names):
            raise ConfigError("duplicate link names in hand config")
        link_index = {name: i for i, name in enumerate(link_names)}

        sphere_link, sphere_local, sphere_radius = [], [], []
        cand_link, cand_local = [], []
        for idx, entry in enumerate(document["links"]):
            for sphere in entry.get("spheres", ()):
                radius = float(sphere["radius"])
                if radius <= 0.0:
                    raise ConfigError(
                        f"link '{entry['name']}' has a sphere with "
                        f"radius {radius}")
                sphere_link.append(idx)
                sphere_local.append([float(v) for v in sphere["center"]])
                sphere_radius.append(radius)
            for point in entry.get("contact_candidates", ()):
                cand_link.append(idx)
                cand_local.append([float(v) for v in point])

        joints = []
        child_seen = set()
        for entry in document["joints"]:
            kind = entry["type"]
            if kind not in ("revolute", "prismatic"):
                raise ConfigError(f"unknown joint type {kind!r}")
            for end in (entry["parent"], entry["child"]):
                if end not in link_index:
                    raise ConfigError(
                        f"joint '{entry['name']}' references unknown "
                        f"link '{end}'")
            if entry["child"] in child_seen:
                raise ConfigError(
                    f"link '{entry['child']}' is the child of more than "
                    f"one joint")
            child_seen.add(entry["child"])
            lo, hi = entry["limits"]
            if not float(lo) < float(hi):
                raise ConfigError(
                    f"joint '{entry['name']}' limits must satisfy "
                    f"lower < upper")
            origin = entry["origin"]
            rpy = np.asarray(origin["rpy"], dtype=np.float64)
            origin_rot = euler_matrix(
                torch.from_numpy(rpy[None]))[0].to(torch.float64)
            joints.append({
                "parent": link_index[entry["parent"]],
                "child": link_index[entry["child"]],
                "kind": kind,
                "axis": _unit(entry["axis"], f"joint '{entry['name']}'"),
                "origin_xyz": np.asarray(origin["xyz"], dtype=np.float64),
                "origin_rot": origin_rot,
                "lower": float(lo),
                "upper": float(hi),
            })

        roots = [name for name in link_names if name not in child_seen]
        if len(roots) != 1:
            raise ConfigError(
                f"hand must have exactly one root link, found {roots}")
        self.root = link_index[roots[0]]

        order, placed = [], {self.root}
        pending = list(range(len(joints)))
        while pending:
            remaining = [i for i in pending
                         if joints[i]["parent"] not in placed]
            progressed = [i for i in pending if i not in remaining]
            if not progressed:
                raise ConfigError("links not reachable from root")
            for i in progressed:
                placed.add(joints[i]["child"])
                order.append(i)
            pending = remaining

        self.num_links = len(link_names)
        self.joints = joints
        self.topo_order = order
        self.dof = len(joints)
        self.joint_lower = np.array([j["lower"] for j in joints])
        self.joint_upper = np.array([j["upper"] for j in joints])

        def _tensor(rows):
            arr = np.asarray(rows, dtype=np.float64)
            return torch.from_numpy(arr.reshape(-1, 3) if arr.size
                                    else np.zeros((0, 3)))

        self.sphere_link = sphere_link
        self.sphere_local = _tensor(sphere_local)
        self.sphere_radius = torch.from_numpy(
            np.asarray(sphere_radius, dtype=np.float64))
        self.candidate_link = cand_link
        self.candidate_local = _tensor(cand_local)

        markers = document["markers"]
        for mname in MARKER_NAMES:
            if mname not in markers:
                raise ConfigError(f"missing marker '{mname}'")
        self.marker_link = [link_index[markers[m]["link"]]
                            for m in MARKER_NAMES]
        self.marker_local = _tensor(
            [markers[m]["point"] for m in MARKER_NAMES])

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @property
    def num_spheres(self):
        return int(self.sphere_radius.shape[0])

    def clamp_joints(self, theta):
        lower = torch.from_numpy(self.joint_lower).to(theta.dtype)
        upper = torch.from_numpy(self.joint_upper).to(theta.dtype)
        return torch.clamp(theta, lower, upper)

    def link_frames(self, poses):
        """World rotations (B, L, 3, 3) and translations (B, L, 3) for a
        (B, 6 + dof) pose batch."""
        if poses.ndim != 2 or poses.shape[1] != 6 + self.dof:
            raise DimensionError(
                f"pose batch shape {tuple(poses.shape)} does not match "
                f"(B, {6 + self.dof})")
        B = poses.shape[0]
        rot = [None] * self.num_links
        trans = [None] * self.num_links
        rot[self.root] = euler_matrix(poses[:, 3:6]).to(poses.dtype)
        trans[self.root] = poses[:, :3]

        for j_idx in self.topo_order:
            joint = self.joints[j_idx]
            Rp, tp = rot[joint["parent"]], trans[joint["parent"]]
            origin_rot = joint["origin_rot"].to(poses.dtype)
            origin_xyz = torch.from_numpy(
                joint["origin_xyz"]).to(poses.dtype)
            R_origin = Rp @ origin_rot
            t_origin = tp + (Rp @ origin_xyz)
            q = poses[:, 6 + j_idx]
            if joint["kind"] == "revolute":
                axis = torch.from_numpy(joint["axis"]).to(poses.dtype)
                rot[joint["child"]] = R_origin @ _axis_rotation(axis, q)
                trans[joint["child"]] = t_origin
            else:
                axis_world = R_origin @ torch.from_numpy(
                    joint["axis"]).to(poses.dtype)
                rot[joint["child"]] = R_origin
                trans[joint["child"]] = t_origin + axis_world * q[:, None]
        return torch.stack(rot, dim=1), torch.stack(trans, dim=1)

    def _place(self, rot, trans, link_ids, local):
        if local.shape[0] == 0:
            B = rot.shape[0]
            return torch.zeros(B, 0, 3, dtype=rot.dtype, device=rot.device)
        R = rot[:, link_ids]
        t = trans[:, link_ids]
        pts = torch.einsum("bpij,pj->bpi", R, local.to(rot.dtype))
        return pts + t

    def sphere_centers(self, poses):
        """World sphere centers (B, S, 3), differentiable in the poses."""
        rot, trans = self.link_frames(poses)
        return self._place(rot, trans, self.sphere_link, self.sphere_local)

    def contact_points(self, poses):
        """World contact candidate points (B, C, 3)."""
        rot, trans = self.link_frames(poses)
        return self._place(rot, trans, self.candidate_link,
                           self.candidate_local)

    def palm_centers(self, poses):
        """World palm marker positions (B, 3)."""
        rot, trans = self.link_frames(poses)
        return self._place(rot, trans, self.marker_link,
                           self.marker_local)[:, 0]
