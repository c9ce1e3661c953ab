"""Training losses over decoded pose vectors.

The clearance loss penalizes hand collision spheres whose centers come
closer to any cloud point than their radius: sum over spheres of
max(0, r - min_p ||c - p||)^2, averaged over the batch. It is zero
exactly when every sphere center keeps at least its radius of distance
from every cloud point.
"""

import torch

from .errors import DimensionError


def reconstruction_loss(predicted, target):
    """Mean squared error over all pose coordinates."""
    if predicted.shape != target.shape:
        raise DimensionError(
            f"prediction shape {tuple(predicted.shape)} does not match "
            f"target {tuple(target.shape)}")
    return torch.mean((predicted - target) ** 2)


def kl_loss(sample):
    """KL(q || N(0, I)) for a diagonal Gaussian posterior, batch mean."""
    mu, sigma = sample.mu, sample.sigma
    per_dim = 0.5 * (sigma ** 2 + mu ** 2 - 1.0 - 2.0 * torch.log(sigma))
    return per_dim.sum(dim=-1).mean()


def _min_point_distance(queries, cloud):
    """(B, Q) distances from each query to its nearest cloud point;
    cloud is (N, 3) shared or (B, N, 3) per-row."""
    if cloud.ndim == 2:
        cloud = cloud[None]
    diff = queries[:, :, None, :] - cloud[:, None, :, :]
    return torch.sqrt((diff ** 2).sum(dim=-1) + 1e-18).amin(dim=-1)


def clearance_loss(poses, hand, cloud):
    """Point-sphere penetration: sum_c max(0, r_c - min_p ||c - p||)^2."""
    centers = hand.sphere_centers(poses)
    dist = _min_point_distance(centers, cloud)
    radius = hand.sphere_radius.to(poses.dtype)[None, :]
    pen = torch.relu(radius - dist)
    return (pen ** 2).sum(dim=-1).mean()


def contact_distance_loss(poses, hand, cloud):
    """Mean squared distance from each fingertip contact candidate to
    its nearest cloud point; pulls grasps onto the surface."""
    candidates = hand.contact_points(poses)
    if candidates.shape[1] == 0:
        return poses.new_zeros(())
    dist = _min_point_distance(candidates, cloud)
    return (dist ** 2).mean()


def smoothness_loss(trajectories):
    """Mean squared second difference across frames of a (B, F, D)
    trajectory batch; zero for fewer than three frames."""
    if trajectories.ndim != 3:
        raise DimensionError(
            f"trajectory batch shape {tuple(trajectories.shape)} is not "
            f"(B, F, D)")
    if trajectories.shape[1] < 3:
        return trajectories.new_zeros(())
    second = (trajectories[:, 2:] - 2.0 * trajectories[:, 1:-1]
              + trajectories[:, :-2])
    return (second ** 2).mean()


def mean_sphere_penetration(poses, hand, cloud):
    """Batch mean of the deepest point-sphere penetration per pose; the
    diagnostic counterpart of ``clearance_loss``."""
    with torch.no_grad():
        centers = hand.sphere_centers(poses)
        dist = _min_point_distance(centers, cloud)
        radius = hand.sphere_radius.to(poses.dtype)[None, :]
        pen = torch.relu(radius - dist)
        return float(pen.amax(dim=-1).mean())
