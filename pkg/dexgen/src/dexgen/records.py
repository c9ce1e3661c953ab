"""Demonstration records and the binary shard format.

This is an independent implementation of the shard layout shared with
the synthesis engine, kept free of any import from it. All integers are
little-endian:

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
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DimensionError, ShardChecksumError,
                     ShardError, ShardVersionError)

SHARD_MAGIC = b"DEX1"
SHARD_VERSION = 1
MAX_RECORDS = 65536
TASKS = ("grasp", "articulation")
STAGES = ("reach", "grasp", "post")

_HEADER = struct.Struct("<4sIQI32s")


def config_hash(document):
    """SHA-256 over the canonical JSON form of a hand config document
    (sorted keys, compact separators, UTF-8)."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _as_pose(vector, dof, what):
    vec = np.asarray(vector, dtype=np.float64).reshape(-1)
    if vec.shape[0] != 6 + dof:
        raise DimensionError(
            f"{what} has {vec.shape[0]} values, expected {6 + dof}")
    if not np.all(np.isfinite(vec)):
        raise DimensionError(f"{what} contains non-finite values")
    return vec


@dataclass(frozen=True)
class TrajectoryData:
    """Pose rows (F, 6 + dof), a frame period, and per-frame stage tags."""

    values: np.ndarray
    dt: float
    stages: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] < 2:
            raise DimensionError("trajectory needs at least 2 pose rows")
        if not np.all(np.isfinite(values)):
            raise DimensionError("trajectory contains non-finite values")
        if self.dt <= 0.0:
            raise ConfigError("trajectory dt must be positive")
        if len(self.stages) != values.shape[0]:
            raise DimensionError("one stage tag per frame required")
        for stage in self.stages:
            if stage not in STAGES:
                raise ConfigError(f"unknown stage {stage!r}")


@dataclass(frozen=True)
class Metrics:
    q1: float
    max_penetration: float
    contact_count: int
    feasible: bool


@dataclass(frozen=True)
class PoseRecord:
    """One demonstration: a keyframe pose vector with optional
    trajectory, condition index, metrics, and provenance."""

    task: str
    object_path: str
    object_scale: float
    keyframe: np.ndarray  # (6 + dof,)
    dof: int
    trajectory: TrajectoryData = None
    condition_index: int = None
    metrics: Metrics = None
    generator: str = "gen"
    seed: int = 0
    engine: str = "dexgen"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.dof < 0:
            raise ConfigError("dof must be nonnegative")
        object.__setattr__(
            self, "keyframe", _as_pose(self.keyframe, self.dof, "keyframe"))
        if self.condition_index is not None and self.condition_index < 0:
            raise ConfigError("condition_index must be nonnegative")
        if (self.trajectory is not None
                and self.trajectory.values.shape[1] != 6 + self.dof):
            raise DimensionError(
                "trajectory dimension does not match keyframe")

    def __eq__(self, other):
        if not isinstance(other, PoseRecord):
            return NotImplemented
        if (self.task, self.object_path, self.object_scale, self.dof,
                self.condition_index, self.generator, self.seed,
                self.engine) != (other.task, other.object_path,
                                 other.object_scale, other.dof,
                                 other.condition_index, other.generator,
                                 other.seed, other.engine):
            return False
        if not np.array_equal(self.keyframe, other.keyframe):
            return False
        if (self.trajectory is None) != (other.trajectory is None):
            return False
        if self.trajectory is not None:
            a, b = self.trajectory, other.trajectory
            if (a.dt != b.dt or a.stages != b.stages
                    or not np.array_equal(a.values, b.values)):
                return False
        return self.metrics == other.metrics


def _pack_string(out, text):
    data = text.encode("utf-8")
    out.append(struct.pack("<I", len(data)))
    out.append(data)


def _encode_record(record, dof):
    if record.dof != dof:
        raise DimensionError("record pose dimension does not match shard dof")
    out = [struct.pack("<B", TASKS.index(record.task))]
    _pack_string(out, record.object_path)
    out.append(struct.pack("<d", float(record.object_scale)))
    out.append(record.keyframe.astype("<f8").tobytes())
    flags = ((record.trajectory is not None)
             | (record.condition_index is not None) << 1
             | (record.metrics is not None) << 2)
    out.append(struct.pack("<B", flags))
    if record.trajectory is not None:
        traj = record.trajectory
        out.append(struct.pack("<Id", traj.values.shape[0], traj.dt))
        out.append(bytes(STAGES.index(s) for s in traj.stages))
        out.append(traj.values.astype("<f8").tobytes())
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


def _decode_record(reader, dof):
    (task_code,) = reader.unpack("<B")
    if task_code >= len(TASKS):
        raise ShardError(f"unknown task code {task_code}")
    object_path = reader.string()
    (scale,) = reader.unpack("<d")
    keyframe = reader.floats(6 + dof)
    (flags,) = reader.unpack("<B")
    trajectory = None
    if flags & 1:
        frames, dt = reader.unpack("<Id")
        stage_codes = reader.take(frames)
        for code in stage_codes:
            if code >= len(STAGES):
                raise ShardError(f"unknown stage code {code}")
        values = reader.floats(frames * (6 + dof)).reshape(frames, 6 + dof)
        trajectory = TrajectoryData(
            values, dt, tuple(STAGES[c] for c in stage_codes))
    condition = None
    if flags & 2:
        (condition,) = reader.unpack("<I")
        condition = int(condition)
    metrics = None
    if flags & 4:
        q1, pen, contacts, feasible = reader.unpack("<ddIB")
        metrics = Metrics(q1=q1, max_penetration=pen,
                          contact_count=int(contacts),
                          feasible=bool(feasible))
    generator = reader.string()
    (seed,) = reader.unpack("<Q")
    engine = reader.string()
    return PoseRecord(task=TASKS[task_code], object_path=object_path,
                      object_scale=scale, keyframe=keyframe, dof=dof,
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
        try:
            hash_bytes = bytes.fromhex(hand_hash)
        except ValueError:
            raise ConfigError("hand hash must be 64 hex characters")
    else:
        hash_bytes = bytes(hand_hash)
    if len(hash_bytes) != 32:
        raise ConfigError("hand hash must be 32 bytes of SHA-256")
    dof = records[0].dof if records else 0
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


def read_shard(path, expected_hand_hash=None):
    """Parse a shard back into records.

    The trailing digest is verified before anything is decoded, so a
    truncated or corrupted file never yields partial records.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 32:
        raise ShardChecksumError("file too short to be a shard",
                                 path=str(path))
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
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
