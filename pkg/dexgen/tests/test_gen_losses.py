import pathlib

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from dexgen import losses
from dexgen.cvae import LatentSample
from dexgen.handkin import HandKinematics

HAND_PATH = (
    pathlib.Path(__file__).resolve().parents[2]
    / "src" / "dexsynth" / "assets" / "toy_hand.json"
)


@pytest.fixture(scope="module")
def hand():
    return HandKinematics.from_file(HAND_PATH)


def sphere_cloud(count, radius, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return torch.from_numpy(pts * radius)


def test_reconstruction_loss_matches_mse():
    a = torch.arange(12, dtype=torch.float64).reshape(3, 4)
    b = a + 0.5
    assert losses.reconstruction_loss(a, a).item() == 0.0
    assert losses.reconstruction_loss(a, b).item() == pytest.approx(0.25)


def test_kl_loss_zero_at_standard_normal():
    mu = torch.zeros(4, 8, dtype=torch.float64)
    sigma = torch.ones(4, 8, dtype=torch.float64)
    sample = LatentSample(mu, sigma, mu, mu)
    assert losses.kl_loss(sample).item() == pytest.approx(0.0, abs=1e-12)


def test_kl_loss_closed_form():
    mu = torch.full((1, 1), 0.7, dtype=torch.float64)
    sigma = torch.full((1, 1), 1.3, dtype=torch.float64)
    sample = LatentSample(mu, sigma, mu, mu)
    expected = 0.5 * (0.7 ** 2 + 1.3 ** 2 - 1.0 - 2.0 * np.log(1.3))
    assert losses.kl_loss(sample).item() == pytest.approx(expected)
    assert losses.kl_loss(sample).item() > 0.0


def test_clearance_zero_when_hand_far_from_cloud(hand):
    cloud = sphere_cloud(400, 0.07)
    pose = torch.zeros(1, 10, dtype=torch.float64)
    pose[0, 0] = 10.0
    assert losses.clearance_loss(pose, hand, cloud).item() == 0.0


def test_clearance_positive_when_cloud_point_inside_sphere(hand):
    pose = torch.zeros(1, 10, dtype=torch.float64)
    center = hand.sphere_centers(pose)[0, 0]
    cloud = center[None].clone()
    value = losses.clearance_loss(pose, hand, cloud).item()
    assert value >= float(hand.sphere_radius[0]) ** 2 * 0.99
    far = losses.clearance_loss(pose + 10.0, hand, cloud).item()
    assert far == 0.0


def test_clearance_loss_is_differentiable(hand):
    cloud = sphere_cloud(200, 0.07)
    pose = torch.zeros(1, 10, dtype=torch.float64, requires_grad=True)
    value = losses.clearance_loss(pose, hand, cloud)
    value.backward()
    assert pose.grad is not None
    assert torch.isfinite(pose.grad).all()


def test_contact_distance_decreases_near_surface(hand):
    cloud = sphere_cloud(400, 0.07)
    near = torch.zeros(1, 10, dtype=torch.float64)
    near[0, 0] = 0.08
    far = torch.zeros(1, 10, dtype=torch.float64)
    far[0, 0] = 0.5
    d_near = losses.contact_distance_loss(near, hand, cloud).item()
    d_far = losses.contact_distance_loss(far, hand, cloud).item()
    assert 0.0 < d_near < d_far


def test_smoothness_zero_for_linear_trajectories():
    t = torch.linspace(0, 1, 8, dtype=torch.float64)
    linear = (t[None, :, None] * torch.ones(2, 1, 5, dtype=torch.float64))
    assert losses.smoothness_loss(linear).item() == pytest.approx(0.0, abs=1e-24)


def test_smoothness_positive_for_kinks():
    traj = torch.zeros(1, 5, 2, dtype=torch.float64)
    traj[0, 2] = 1.0
    assert losses.smoothness_loss(traj).item() > 0.0
    short = torch.zeros(1, 2, 2, dtype=torch.float64)
    assert losses.smoothness_loss(short).item() == 0.0


def test_mean_sphere_penetration_diagnostic(hand):
    cloud = sphere_cloud(800, 0.07)
    buried = torch.zeros(1, 10, dtype=torch.float64)
    buried[0, 0] = 0.07
    clear = torch.zeros(1, 10, dtype=torch.float64)
    clear[0, 0] = 5.0
    assert losses.mean_sphere_penetration(buried, hand, cloud) > 0.0
    assert losses.mean_sphere_penetration(clear, hand, cloud) == 0.0
