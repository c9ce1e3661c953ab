import pathlib

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from dexgen.handkin import HandKinematics
from dexgen.records import PoseRecord
from dexgen.sample import sample_poses, sample_proposals
from dexgen.train import TrainConfig, train

HAND_PATH = (
    pathlib.Path(__file__).resolve().parents[2]
    / "src" / "dexsynth" / "assets" / "toy_hand.json"
)


@pytest.fixture(scope="module")
def hand():
    return HandKinematics.from_file(HAND_PATH)


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(400, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts * 0.07


@pytest.fixture(scope="module")
def checkpoint(hand, cloud):
    # surface-conditioned poses: palm follows the condition point
    rng = np.random.default_rng(11)
    indices = rng.integers(0, 400, size=120)
    records = []
    for i, idx in enumerate(indices):
        direction = cloud[idx] / np.linalg.norm(cloud[idx])
        keyframe = np.concatenate([
            direction * 0.08, np.zeros(3),
            0.5 * (hand.joint_lower + hand.joint_upper)])
        records.append(PoseRecord("grasp", "sphere", 0.07, keyframe,
                                  hand.dof, condition_index=int(idx), seed=i))
    config = TrainConfig(steps=150, num_points=128, batch_size=64,
                         learning_rate=1e-3, seed=0, fixed_noise=True)
    return train(records, {"sphere": cloud}, hand, config)


def test_sample_poses_shape_and_limits(checkpoint, cloud, hand):
    poses = sample_poses(checkpoint, cloud, [0, 5, 9], seed=1)
    assert poses.shape == (3, 1, 10)
    joints = poses[:, 0, 6:]
    assert (joints >= hand.joint_lower - 1e-12).all()
    assert (joints <= hand.joint_upper + 1e-12).all()


def test_sampling_is_seeded(checkpoint, cloud):
    a = sample_poses(checkpoint, cloud, [1, 2], seed=4)
    b = sample_poses(checkpoint, cloud, [1, 2], seed=4)
    c = sample_poses(checkpoint, cloud, [1, 2], seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_proposals_builds_records(checkpoint, cloud):
    proposals = sample_proposals(checkpoint, cloud, [3, 7], 5, seed=0,
                                 object_path="ball", object_scale=0.07)
    assert len(proposals) == 5
    indices = [p.condition_index for p in proposals]
    assert indices == [3, 7, 3, 7, 3]
    for proposal in proposals:
        assert proposal.object_path == "ball"
        assert proposal.dof == checkpoint.dof
        assert proposal.keyframe.shape == (10,)
        assert proposal.generator == "gen-iter-1"
        assert proposal.engine.startswith("dexgen ")


def test_condition_point_steers_palm_position(checkpoint, cloud, hand):
    gaps = cloud @ cloud[0]
    far = int(np.argmin(gaps))
    n = 64
    near_poses = sample_poses(checkpoint, cloud, [0] * n, seed=2)[:, 0, :]
    far_poses = sample_poses(checkpoint, cloud, [far] * n, seed=2)[:, 0, :]
    palms_near = hand.palm_centers(torch.from_numpy(near_poses)).numpy()
    palms_far = hand.palm_centers(torch.from_numpy(far_poses)).numpy()

    # Welch two-sample t statistic along the axis separating the two
    # condition points; |t| > 3 is roughly p < 0.003
    axis = cloud[far] - cloud[0]
    axis /= np.linalg.norm(axis)
    a = palms_near @ axis
    b = palms_far @ axis
    se = np.sqrt(a.var(ddof=1) / n + b.var(ddof=1) / n)
    t_stat = (b.mean() - a.mean()) / se
    assert abs(t_stat) > 3.0
    assert np.linalg.norm(palms_far.mean(0) - palms_near.mean(0)) > 0.02
