"""Demonstration records, binary shard IO, and the dataset manifest.

Shard layout (all integers little-endian):

    magic   4 bytes  b"DEX1"
    version u32      currently 1
    count   u64      records in this shard (<= 65536)
    dof     u32      interior joint dimension of every pose
    hash    32 bytes SHA-256 of the canonical hand config JSON
    records count fixed-layout records (strings length-prefixed u32)
    digest  32 bytes SHA-256 over every preceding byte

Per record:

    task      u8                      0 = grasp, 1 = articulation
    object    u32 len + UTF-8 bytes   asset path
    scale     f64
    keyframe  (6 + dof) f64
    flags     u8                      bit0 trajectory, bit1 condition,
                                      bit2 metrics
    trajectory (if bit0): frames u32, dt f64, stages u8 * frames,
                          values (frames * (6 + dof)) f64
    condition  (if bit1): u32 point index
    metrics    (if bit2): q1 f64, max_penetration f64,
                          contact_count u32, feasible u8
    generator  u32 len + UTF-8 bytes
    seed       u64
    engine     u32 len + UTF-8 bytes

The trailing digest makes truncation and bit corruption detectable
before any record is returned.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (ConfigError, DimensionError, ShardChecksumError,
                     ShardError, ShardVersionError)
from .hand import HandPose
from .metrics import MetricReport
from .planner import STAGES, Trajectory

SHARD_MAGIC = b"DEX1"
SHARD_VERSION = 1
MAX_RECORDS = 65536
TASKS = ("grasp", "articulation")

_HEADER = struct.Struct("<4sIQI32s")


@dataclass(frozen=True)
class DemoRecord:
    """One demonstration: a keyframe grasp with optional trajectory,
    condition index, metrics, and provenance."""

    task: str
    object_path: str
    object_scale: float
    keyframe: HandPose
    trajectory: Trajectory = None
    condition_index: int = None
    metrics: MetricReport = None
    generator: str = "optim"
    seed: int = 0
    engine: str = __version__

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.condition_index is not None and self.condition_index < 0:
            raise ConfigError("condition_index must be nonnegative")
        if self.trajectory is not None:
            if self.trajectory.frames[0].dof != self.keyframe.dof:
                raise DimensionError(
                    "trajectory dimension does not match keyframe")

    def __eq__(self, other):
        if not isinstance(other, DemoRecord):
            return NotImplemented
        if (self.task, self.object_path, self.object_scale,
                self.condition_index, self.generator, self.seed,
                self.engine) != (other.task, other.object_path,
                                 other.object_scale, other.condition_index,
                                 other.generator, other.seed, other.engine):
            return False
        if not _poses_equal(self.keyframe, other.keyframe):
            return False
        if (self.trajectory is None) != (other.trajectory is None):
            return False
        if self.trajectory is not None:
            a, b = self.trajectory, other.trajectory
            if (a.dt != b.dt or a.stages != b.stages
                    or len(a.frames) != len(b.frames)):
                return False
            for fa, fb in zip(a.frames, b.frames):
                if not _poses_equal(fa, fb):
                    return False
        if (self.metrics is None) != (other.metrics is None):
            return False
        if self.metrics is not None:
            a, b = self.metrics, other.metrics
            if (a.q1, a.max_penetration, a.contact_count, a.feasible) != \
                    (b.q1, b.max_penetration, b.contact_count, b.feasible):
                return False
        return True


def _poses_equal(a, b):
    return (np.array_equal(a.translation, b.translation)
            and np.array_equal(a.rotation, b.rotation)
            and np.array_equal(a.joints, b.joints))


def _pack_string(out, text):
    data = text.encode("utf-8")
    out.append(struct.pack("<I", len(data)))
    out.append(data)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ShardError("shard record data ends prematurely",
                             offset=self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def string(self):
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")

    def floats(self, n):
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(
            np.float64)


def _encode_record(record, dof):
    out = []
    out.append(struct.pack("<B", TASKS.index(record.task)))
    _pack_string(out, record.object_path)
    out.append(struct.pack("<d", float(record.object_scale)))
    vec = record.keyframe.as_vector()
    if vec.shape[0] != 6 + dof:
        raise DimensionError("record pose dimension does not match shard dof")
    out.append(vec.astype("<f8").tobytes())
    flags = ((record.trajectory is not None)
             | (record.condition_index is not None) << 1
             | (record.metrics is not None) << 2)
    out.append(struct.pack("<B", flags))
    if record.trajectory is not None:
        traj = record.trajectory
        out.append(struct.pack("<Id", len(traj.frames), traj.dt))
        out.append(bytes(STAGES.index(s) for s in traj.stages))
        out.append(traj.as_matrix().astype("<f8").tobytes())
    if record.condition_index is not None:
        out.append(struct.pack("<I", int(record.condition_index)))
    if record.metrics is not None:
        m = record.metrics
        out.append(struct.pack("<ddIB", m.q1, m.max_penetration,
                               m.contact_count, int(m.feasible)))
    _pack_string(out, record.generator)
    out.append(struct.pack("<Q", int(record.seed)))
    _pack_string(out, record.engine)
    return b"".join(out)


def _decode_record(reader, dof):
    (task_code,) = reader.unpack("<B")
    if task_code >= len(TASKS):
        raise ShardError(f"unknown task code {task_code}")
    object_path = reader.string()
    (scale,) = reader.unpack("<d")
    keyframe = HandPose.from_vector(reader.floats(6 + dof), dof)
    (flags,) = reader.unpack("<B")
    trajectory = None
    if flags & 1:
        frames, dt = reader.unpack("<Id")
        stage_codes = reader.take(frames)
        values = reader.floats(frames * (6 + dof)).reshape(frames, 6 + dof)
        trajectory = Trajectory(
            tuple(HandPose.from_vector(v, dof) for v in values), dt,
            tuple(STAGES[c] for c in stage_codes))
    condition = None
    if flags & 2:
        (condition,) = reader.unpack("<I")
        condition = int(condition)
    metrics = None
    if flags & 4:
        q1, pen, contacts, feasible = reader.unpack("<ddIB")
        metrics = MetricReport(q1=q1, max_penetration=pen,
                               contact_count=int(contacts),
                               feasible=bool(feasible))
    generator = reader.string()
    (seed,) = reader.unpack("<Q")
    engine = reader.string()
    return DemoRecord(task=TASKS[task_code], object_path=object_path,
                      object_scale=scale, keyframe=keyframe,
                      trajectory=trajectory, condition_index=condition,
                      metrics=metrics, generator=generator, seed=int(seed),
                      engine=engine)


def write_shard(records, path, hand_hash):
    """Serialize records to one shard file; returns the hex digest that
    doubles as the shard checksum."""
    records = list(records)
    if len(records) > MAX_RECORDS:
        raise ShardError(f"shard limited to {MAX_RECORDS} records",
                         requested=len(records))
    if isinstance(hand_hash, str):
        hash_bytes = bytes.fromhex(hand_hash)
    else:
        hash_bytes = bytes(hand_hash)
    if len(hash_bytes) != 32:
        raise ShardError("hand hash must be 32 bytes of SHA-256")
    dof = records[0].keyframe.dof if records else 0
    body = [_HEADER.pack(SHARD_MAGIC, SHARD_VERSION, len(records), dof,
                         hash_bytes)]
    for record in records:
        body.append(_encode_record(record, dof))
    payload = b"".join(body)
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)
    return digest.hex()


def read_shard_header(path):
    """(version, count, dof, hand hash hex) from a shard file."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise ShardError("file too short to be a shard", path=str(path))
    magic, version, count, dof, hash_bytes = _HEADER.unpack(head)
    if magic != SHARD_MAGIC:
        raise ShardError("bad shard magic", path=str(path))
    return version, count, dof, hash_bytes.hex()


def read_shard(path, expected_hand_hash=None):
    """Parse a shard back into records.

    The trailing digest is verified before anything is decoded, so a
    truncated or corrupted file never yields partial records. Version
    and (optionally) hand-hash mismatches raise structured errors.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 32:
        raise ShardChecksumError("file too short to be a shard",
                                 path=str(path))
    payload, digest = blob[:-32], blob[-32:]
    actual = hashlib.sha256(payload).digest()
    if actual != digest:
        raise ShardChecksumError("shard checksum mismatch", path=str(path))
    magic, version, count, dof, hash_bytes = _HEADER.unpack(
        payload[:_HEADER.size])
    if magic != SHARD_MAGIC:
        raise ShardError("bad shard magic", path=str(path))
    if version != SHARD_VERSION:
        raise ShardVersionError(
            f"unsupported shard version {version}", path=str(path))
    if expected_hand_hash is not None:
        expected = (expected_hand_hash if isinstance(expected_hand_hash, str)
                    else bytes(expected_hand_hash).hex())
        if hash_bytes.hex() != expected:
            raise ShardError("shard hand hash does not match expectation",
                             path=str(path))
    reader = _Reader(payload)
    reader.pos = _HEADER.size
    records = [_decode_record(reader, dof) for _ in range(count)]
    if reader.pos != len(payload):
        raise ShardError("trailing bytes after the last record",
                         path=str(path))
    return records


@dataclass
class Manifest:
    """Index over a set of shards sharing one hand config."""

    hand_hash: str
    objects: dict = field(default_factory=dict)  # id -> {path, scale}
    shards: list = field(default_factory=list)  # {path, count, checksum}
    iteration: int = 0
    created: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def total_records(self):
        return sum(int(s["count"]) for s in self.shards)

    def add_shard(self, path, count, checksum):
        self.shards.append({"path": str(path), "count": int(count),
                            "checksum": checksum})

    def to_dict(self):
        return {"hand_hash": self.hand_hash, "objects": self.objects,
                "shards": self.shards, "iteration": self.iteration,
                "total_records": self.total_records,
                "created": self.created, "metadata": self.metadata}


def save_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    manifest = Manifest(hand_hash=doc["hand_hash"],
                        objects=doc.get("objects", {}),
                        shards=doc.get("shards", []),
                        iteration=int(doc.get("iteration", 0)),
                        created=doc.get("created", ""),
                        metadata=doc.get("metadata", {}))
    declared = doc.get("total_records")
    if declared is not None and declared != manifest.total_records:
        raise ShardError("manifest total does not match its shard counts",
                         path=str(path))
    return manifest


def verify_manifest(manifest, base_dir="."):
    """Re-hash every shard listed in the manifest; raises on mismatch."""
    import os

    for entry in manifest.shards:
        shard_path = os.path.join(base_dir, entry["path"])
        with open(shard_path, "rb") as fh:
            blob = fh.read()
        if len(blob) < 32:
            raise ShardChecksumError("shard too short", path=shard_path)
        if hashlib.sha256(blob[:-32]).digest() != blob[-32:]:
            raise ShardChecksumError("shard checksum mismatch",
                                     path=shard_path)
        if hashlib.sha256(blob[:-32]).hexdigest() != entry["checksum"]:
            raise ShardChecksumError(
                "shard does not match manifest checksum", path=shard_path)
    return True
