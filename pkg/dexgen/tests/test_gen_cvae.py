import numpy as np
import pytest

torch = pytest.importorskip("torch")

from dexgen.cvae import LATENT_DIM, PoseCVAE, extras_vector
from dexgen.errors import DimensionError


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    return PoseCVAE(pose_dim=10, context_dim=525).double()


def random_batch(model, count, seed):
    rng = np.random.default_rng(seed)
    poses = torch.from_numpy(rng.normal(size=(count, 10)))
    context = torch.from_numpy(rng.normal(size=(count, 525)))
    return poses, context


def test_encode_shapes_and_positive_sigma(model):
    poses, context = random_batch(model, 6, 0)
    sample = model.encode(poses, context)
    assert sample.mu.shape == (6, LATENT_DIM)
    assert sample.sigma.shape == (6, LATENT_DIM)
    assert sample.z.shape == (6, LATENT_DIM)
    assert (sample.sigma > 0).all()


def test_reparameterization_uses_recorded_noise(model):
    poses, context = random_batch(model, 4, 1)
    sample = model.encode(poses, context)
    assert torch.allclose(sample.z, sample.mu + sample.sigma * sample.eps,
                          atol=1e-15)


def test_explicit_noise_is_used_verbatim(model):
    poses, context = random_batch(model, 3, 2)
    eps = torch.zeros(3, LATENT_DIM, dtype=torch.float64)
    sample = model.encode(poses, context, eps=eps)
    assert torch.equal(sample.eps, eps)
    assert torch.equal(sample.z, sample.mu)


def test_seeded_generator_reproduces_draws(model):
    poses, context = random_batch(model, 5, 3)
    s1 = model.encode(poses, context,
                      generator=torch.Generator().manual_seed(7))
    s2 = model.encode(poses, context,
                      generator=torch.Generator().manual_seed(7))
    s3 = model.encode(poses, context,
                      generator=torch.Generator().manual_seed(8))
    assert torch.equal(s1.z, s2.z)
    assert not torch.equal(s1.z, s3.z)


def test_decode_shape_and_determinism(model):
    _, context = random_batch(model, 4, 4)
    z = torch.from_numpy(np.random.default_rng(5).normal(size=(4, LATENT_DIM)))
    out1 = model.decode(z, context)
    out2 = model.decode(z, context)
    assert out1.shape == (4, 10)
    assert torch.equal(out1, out2)


def test_forward_returns_reconstruction_and_sample(model):
    poses, context = random_batch(model, 2, 6)
    decoded, sample = model.forward(poses, context,
                                    generator=torch.Generator().manual_seed(0))
    assert decoded.shape == poses.shape
    assert sample.z.shape == (2, LATENT_DIM)


def test_mismatched_context_raises(model):
    poses, _ = random_batch(model, 2, 7)
    bad_context = torch.zeros(2, 11, dtype=torch.float64)
    with pytest.raises((DimensionError, RuntimeError)):
        model.encode(poses, bad_context)


def test_extras_vector_layout():
    block = extras_vector(3, dof=4)
    assert block.shape == (3, 13)
    assert torch.equal(block, torch.zeros(3, 13, dtype=torch.float64))

    rotation = torch.ones(3, 3, dtype=torch.float64) * 0.5
    joints = torch.ones(3, 4, dtype=torch.float64) * 0.25
    block = extras_vector(3, dof=4, rotation=rotation, joints=joints)
    assert block[0, 0] == 1.0
    assert torch.equal(block[:, 1:4], rotation)
    assert block[0, 4] == 0.0
    assert torch.equal(block[:, 5:8], torch.zeros(3, 3, dtype=torch.float64))
    assert block[0, 8] == 1.0
    assert torch.equal(block[:, 9:], joints)


def test_extras_vector_validates_shapes():
    with pytest.raises(DimensionError):
        extras_vector(2, dof=4, rotation=torch.zeros(2, 2, dtype=torch.float64))
    with pytest.raises(DimensionError):
        extras_vector(2, dof=4, joints=torch.zeros(2, 3, dtype=torch.float64))
