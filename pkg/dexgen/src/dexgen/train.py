"""Dataset assembly, the training loop, and checkpoint IO.

Training minimizes a weighted sum of pose reconstruction, KL to the
standard normal prior, sphere clearance against the object cloud,
fingertip contact distance, and (in trajectory mode) smoothness, with
Adam at a fixed learning rate. Checkpoints are plain-tensor dictionaries
(loadable with ``weights_only=True``) carrying the model weights, the
training configuration, the hand config document, and the loss curve.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import losses
from .cvae import PoseCVAE, extras_vector
from .encoder import PointEncoder, resample_cloud
from .errors import CheckpointError, ConfigError, DimensionError
from .handkin import HandKinematics

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    w_recon: float = 1.0
    w_kl: float = 1e-4
    w_clearance: float = 1e-4
    w_contact: float = 1e-4
    w_smooth: float = 1e-5
    num_points: int = 1024
    batch_size: int = 256
    steps: int = 1000
    frames: int = 1
    seed: int = 0
    # Freeze the reparameterization draw per record so the objective is a
    # deterministic function of the weights. Overfit diagnostics only.
    fixed_noise: bool = False

    def __post_init__(self):
        for name in ("learning_rate", "w_recon"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        for name in ("w_kl", "w_clearance", "w_contact", "w_smooth"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("num_points", "batch_size", "frames"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")


def _resample_trajectory(values, frames):
    """Linear index-space resampling of (F0, D) pose rows to F rows."""
    src = np.asarray(values, dtype=np.float64)
    if src.shape[0] == frames:
        return src.copy()
    t = np.linspace(0.0, src.shape[0] - 1.0, frames)
    lo = np.floor(t).astype(int)
    hi = np.minimum(lo + 1, src.shape[0] - 1)
    w = (t - lo)[:, None]
    return (1.0 - w) * src[lo] + w * src[hi]


class ProposalDataset:
    """Flattened training arrays built from records and object clouds.

    ``clouds`` maps object paths to (N, 3) vocabulary point arrays; each
    record's condition point is its stored condition index when present,
    otherwise the vocabulary point nearest the record's palm marker.
    """

    def __init__(self, records, clouds, hand, config):
        records = list(records)
        if not records:
            raise ConfigError("no training records")
        dof = records[0].dof
        if dof != hand.dof:
            raise DimensionError(
                f"records have dof {dof}, hand has {hand.dof}")
        self.dof = dof
        self.pose_dim = config.frames * (6 + dof)

        vocabularies = {}
        for path, points in clouds.items():
            pts = np.asarray(points, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
                raise ConfigError(
                    f"cloud for {path!r} must be a nonempty (N, 3) array")
            vocabularies[path] = pts

        poses, objects, cond_points, cond_indices = [], [], [], []
        for record in records:
            if record.dof != dof:
                raise DimensionError("records mix pose dimensions")
            if record.object_path not in vocabularies:
                raise ConfigError(
                    f"no cloud for object {record.object_path!r}")
            vocab = vocabularies[record.object_path]
            if config.frames == 1:
                poses.append(record.keyframe)
            else:
                if record.trajectory is not None:
                    rows = _resample_trajectory(record.trajectory.values,
                                                config.frames)
                else:
                    rows = np.tile(record.keyframe, (config.frames, 1))
                poses.append(rows.reshape(-1))
            idx = record.condition_index
            if idx is not None and idx >= len(vocab):
                raise ConfigError(
                    f"condition index {idx} outside the {len(vocab)}-point "
                    f"vocabulary of {record.object_path!r}")
            objects.append(record.object_path)
            cond_indices.append(idx)
            cond_points.append(None if idx is None else vocab[idx])

        self.poses = torch.from_numpy(np.asarray(poses))
        self.objects = objects
        self.vocabularies = vocabularies
        self.encoder_clouds = {
            path: torch.from_numpy(
                resample_cloud(pts, config.num_points, seed=config.seed))
            for path, pts in vocabularies.items()}

        missing = [i for i, p in enumerate(cond_points) if p is None]
        if missing:
            keyframes = torch.from_numpy(np.asarray(
                [records[i].keyframe for i in missing]))
            palms = hand.palm_centers(keyframes).numpy()
            for row, i in enumerate(missing):
                vocab = vocabularies[objects[i]]
                idx = int(np.argmin(
                    np.linalg.norm(vocab - palms[row], axis=1)))
                cond_indices[i] = idx
                cond_points[i] = vocab[idx]
        self.condition_indices = np.asarray(cond_indices, dtype=np.int64)
        self.condition_points = torch.from_numpy(np.asarray(cond_points))

    def __len__(self):
        return self.poses.shape[0]


@dataclass
class Checkpoint:
    encoder_state: dict
    cvae_state: dict
    config: TrainConfig
    hand_document: dict
    hand_hash: str
    dof: int
    pose_dim: int
    context_dim: int
    iteration: int = 1
    curve: list = field(default_factory=list)

    def save(self, path):
        torch.save({
            "version": CHECKPOINT_VERSION,
            "encoder_state": self.encoder_state,
            "cvae_state": self.cvae_state,
            "config": asdict(self.config),
            "hand_json": json.dumps(self.hand_document, sort_keys=True),
            "hand_hash": self.hand_hash,
            "dof": self.dof,
            "pose_dim": self.pose_dim,
            "context_dim": self.context_dim,
            "iteration": self.iteration,
            "curve": self.curve,
        }, path)


def load_checkpoint(path):
    try:
        blob = torch.load(path, weights_only=True)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}",
                              path=str(path))
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint: {exc}",
                              path=str(path))
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {blob.get('version')}",
            path=str(path))
    return Checkpoint(
        encoder_state=blob["encoder_state"],
        cvae_state=blob["cvae_state"],
        config=TrainConfig(**blob["config"]),
        hand_document=json.loads(blob["hand_json"]),
        hand_hash=blob["hand_hash"],
        dof=int(blob["dof"]),
        pose_dim=int(blob["pose_dim"]),
        context_dim=int(blob["context_dim"]),
        iteration=int(blob["iteration"]),
        curve=list(blob["curve"]))


def build_models(pose_dim, context_dim):
    encoder = PointEncoder().double()
    cvae = PoseCVAE(pose_dim, context_dim).double()
    return encoder, cvae


def context_dim_for(dof):
    # object feature + local point feature + optional-condition block
    return 256 + 256 + (9 + dof)


def _batch_context(encoder, dataset, rows, dof, extras=None):
    """Conditioning rows (B, ctx) for the dataset rows, encoding each
    object's cloud once."""
    contexts = torch.zeros(len(rows), context_dim_for(dof),
                           dtype=torch.float64)
    by_object = {}
    for pos, row in enumerate(rows):
        by_object.setdefault(dataset.objects[row], []).append(pos)
    for path, positions in by_object.items():
        cloud = dataset.encoder_clouds[path][None]
        f_obj, _, pooled = encoder(cloud)
        points = dataset.condition_points[
            [rows[p] for p in positions]][None]
        f_p = encoder.point_features(pooled, points)[0]
        contexts[positions, :256] = f_obj[0]
        contexts[positions, 256:512] = f_p
    block = extras if extras is not None else extras_vector(
        len(rows), dof, dtype=torch.float64)
    contexts[:, 512:] = block
    return contexts


def train(records, clouds, hand, config=None):
    """Fit the generator on demonstration records; returns a Checkpoint.

    Deterministic for a fixed config seed: parameter init, batch order,
    and reparameterization draws all derive from it.
    """
    config = config or TrainConfig()
    if not isinstance(hand, HandKinematics):
        hand = HandKinematics(hand)
    dataset = ProposalDataset(records, clouds, hand, config)

    torch.manual_seed(config.seed)
    encoder, cvae = build_models(dataset.pose_dim,
                                 context_dim_for(dataset.dof))
    params = list(encoder.parameters()) + list(cvae.parameters())
    optimizer = torch.optim.Adam(params, lr=config.learning_rate)
    draw = torch.Generator().manual_seed(config.seed)
    order = np.random.default_rng(config.seed)
    frozen_eps = None
    if config.fixed_noise:
        frozen_eps = torch.randn(len(dataset), cvae.latent_dim,
                                 dtype=torch.float64, generator=draw)

    curve = []
    for step in range(config.steps):
        rows = (np.arange(len(dataset))
                if len(dataset) <= config.batch_size
                else order.choice(len(dataset), config.batch_size,
                                  replace=False))
        rows = [int(r) for r in rows]
        poses = dataset.poses[rows]
        context = _batch_context(encoder, dataset, rows, dataset.dof)

        eps = frozen_eps[rows] if frozen_eps is not None else None
        sample = cvae.encode(poses, context, eps=eps, generator=draw)
        decoded = cvae.decode(sample.z, context)

        recon = losses.reconstruction_loss(decoded, poses)
        kl = losses.kl_loss(sample)
        frames = decoded.reshape(len(rows) * config.frames, -1)
        cloud_rows = torch.cat(
            [dataset.encoder_clouds[dataset.objects[r]][None]
             for r in rows for _ in range(config.frames)])
        clearance = losses.clearance_loss(frames, hand, cloud_rows)
        contact = losses.contact_distance_loss(frames, hand, cloud_rows)
        smooth = (losses.smoothness_loss(
            decoded.reshape(len(rows), config.frames, -1))
            if config.frames > 1 else decoded.new_zeros(()))

        total = (config.w_recon * recon + config.w_kl * kl
                 + config.w_clearance * clearance
                 + config.w_contact * contact + config.w_smooth * smooth)
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        curve.append({"step": step, "total": float(total.detach()),
                      "recon": float(recon.detach()),
                      "kl": float(kl.detach()),
                      "clearance": float(clearance.detach()),
                      "contact": float(contact.detach()),
                      "smooth": float(smooth.detach())})

    return Checkpoint(
        encoder_state=encoder.state_dict(), cvae_state=cvae.state_dict(),
        config=config, hand_document=_hand_document(hand),
        hand_hash=hand.hash, dof=dataset.dof, pose_dim=dataset.pose_dim,
        context_dim=context_dim_for(dataset.dof), curve=curve)


def _hand_document(hand):
    if not hasattr(hand, "document"):
        raise ConfigError("hand kinematics lost its source document")
    return hand.document
