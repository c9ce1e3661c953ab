import numpy as np
import pytest

torch = pytest.importorskip("torch")

from dexgen.encoder import FEATURE_DIM, PointEncoder, resample_cloud


@pytest.fixture(scope="module")
def encoder():
    torch.manual_seed(0)
    return PointEncoder().double()


def random_cloud(batch, count, seed):
    rng = np.random.default_rng(seed)
    return torch.from_numpy(rng.normal(size=(batch, count, 3)))


def test_output_shapes(encoder):
    cloud = random_cloud(2, 100, 0)
    f_obj, f_points, pooled = encoder(cloud)
    assert f_obj.shape == (2, FEATURE_DIM)
    assert f_points.shape == (2, 100, FEATURE_DIM)
    assert pooled.shape == (2, 1024)


def test_permutation_invariance_is_exact(encoder):
    cloud = random_cloud(1, 257, 1)
    perm = torch.randperm(257, generator=torch.Generator().manual_seed(3))
    f_obj, _, pooled = encoder(cloud)
    f_obj_p, _, pooled_p = encoder(cloud[:, perm])
    assert torch.equal(f_obj, f_obj_p)
    assert torch.equal(pooled, pooled_p)


def test_duplicating_points_changes_nothing(encoder):
    cloud = random_cloud(1, 64, 2)
    doubled = torch.cat([cloud, cloud[:, :32]], dim=1)
    f_obj, _, pooled = encoder(cloud)
    f_obj_d, _, pooled_d = encoder(doubled)
    assert torch.equal(f_obj, f_obj_d)
    assert torch.equal(pooled, pooled_d)


def test_point_features_track_queries_not_cloud_order(encoder):
    cloud = random_cloud(1, 128, 4)
    queries = random_cloud(1, 5, 5)
    _, _, pooled = encoder(cloud)
    perm = torch.randperm(128, generator=torch.Generator().manual_seed(6))
    _, _, pooled_p = encoder(cloud[:, perm])
    feats = encoder.point_features(pooled, queries)
    feats_p = encoder.point_features(pooled_p, queries)
    assert feats.shape == (1, 5, FEATURE_DIM)
    assert torch.equal(feats, feats_p)


def test_per_point_features_align_with_their_points(encoder):
    cloud = random_cloud(1, 50, 7)
    _, f_points, pooled = encoder(cloud)
    direct = encoder.point_features(pooled, cloud)
    assert torch.allclose(f_points, direct, atol=1e-12)


def test_resample_cloud_deterministic():
    points = np.random.default_rng(0).normal(size=(500, 3))
    a = resample_cloud(points, 128, seed=9)
    b = resample_cloud(points, 128, seed=9)
    c = resample_cloud(points, 128, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (128, 3)


def test_resample_without_replacement_when_possible():
    points = np.arange(30.0).reshape(10, 3)
    picked = resample_cloud(points, 10, seed=0)
    assert np.array_equal(np.sort(picked, axis=0), np.sort(points, axis=0))
    upsampled = resample_cloud(points, 25, seed=0)
    assert upsampled.shape == (25, 3)
