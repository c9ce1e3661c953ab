"""Conditional VAE over pose vectors.

The recognition network maps a pose (or flattened trajectory) plus its
conditioning context to a diagonal Gaussian in a 256-dim latent space;
the decoder maps a latent sample concatenated with the same context back
to the pose vector. Context = object feature + local point feature +
optional extras (root rotation / translation / joint values, each
zero-masked behind a presence flag).
"""

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, DimensionError

LATENT_DIM = 256
HIDDEN_DIMS = (256, 512, 256)
_LOG_SIGMA_RANGE = 8.0  # keeps sigma finite and strictly positive


@dataclass(frozen=True)
class LatentSample:
    mu: torch.Tensor
    sigma: torch.Tensor
    eps: torch.Tensor
    z: torch.Tensor


def _mlp(d_in, hidden, d_out):
    dims = (d_in,) + tuple(hidden)
    layers = []
    for a, b in zip(dims[:-1], dims[1:]):
        layers.append(nn.Linear(a, b))
        layers.append(nn.ReLU())
    layers.append(nn.Linear(dims[-1], d_out))
    return nn.Sequential(*layers)


def extras_vector(batch, dof, rotation=None, translation=None, joints=None,
                  dtype=torch.float64, device=None):
    """Optional-condition block (B, 9 + dof): each of rotation (3),
    translation (3), and joints (dof) is prefixed by a presence flag and
    zero-filled when absent."""
    parts = []
    for value, width in ((rotation, 3), (translation, 3), (joints, dof)):
        if value is None:
            flag = torch.zeros(batch, 1, dtype=dtype, device=device)
            data = torch.zeros(batch, width, dtype=dtype, device=device)
        else:
            value = torch.as_tensor(value, dtype=dtype, device=device)
            if value.shape != (batch, width):
                raise DimensionError(
                    f"condition shape {tuple(value.shape)} does not match "
                    f"({batch}, {width})")
            flag = torch.ones(batch, 1, dtype=dtype, device=device)
            data = value
        parts.extend([flag, data])
    return torch.cat(parts, dim=-1)


class PoseCVAE(nn.Module):
    """Recognition + decoder pair sharing one conditioning context."""

    def __init__(self, pose_dim, context_dim, latent_dim=LATENT_DIM,
                 hidden=HIDDEN_DIMS):
        super().__init__()
        if pose_dim < 1 or context_dim < 1:
            raise ConfigError("pose and context dimensions must be positive")
        self.pose_dim = pose_dim
        self.context_dim = context_dim
        self.latent_dim = latent_dim
        self.recognition = _mlp(pose_dim + context_dim, hidden,
                                2 * latent_dim)
        self.decoder = _mlp(latent_dim + context_dim, hidden, pose_dim)

    def encode(self, poses, context, eps=None, generator=None):
        """Posterior sample for (B, pose_dim) poses under (B, ctx) context."""
        if poses.shape[-1] != self.pose_dim:
            raise DimensionError(
                f"pose dim {poses.shape[-1]} != model {self.pose_dim}")
        if context.shape[-1] != self.context_dim:
            raise DimensionError(
                f"context dim {context.shape[-1]} != model "
                f"{self.context_dim}")
        stats = self.recognition(torch.cat([poses, context], dim=-1))
        mu, log_sigma = stats.chunk(2, dim=-1)
        log_sigma = torch.clamp(log_sigma, -_LOG_SIGMA_RANGE,
                                _LOG_SIGMA_RANGE)
        sigma = torch.exp(log_sigma)
        if eps is None:
            eps = torch.randn(mu.shape, dtype=mu.dtype, device=mu.device,
                              generator=generator)
        z = mu + sigma * eps
        return LatentSample(mu=mu, sigma=sigma, eps=eps, z=z)

    def decode(self, z, context):
        return self.decoder(torch.cat([z, context], dim=-1))

    def forward(self, poses, context, generator=None):
        sample = self.encode(poses, context, generator=generator)
        return self.decode(sample.z, context), sample
