"""Synthetic point clouds for demos and tests."""

import numpy as np

from .measures import DiscreteMeasure


def make_gaussian_mixture(
    n: int,
    n_components: int,
    dim: int = 2,
    sigma: float = 1.0,
    separation: float | None = None,
    seed=None,
):
    """Sample n points from k equally weighted, well-separated Gaussians.

    Component means sit on a circle (in the first two coordinates) sized so
    adjacent means are ``separation`` apart; the default separation is
    ``8 * sigma``, far enough that components essentially never overlap.
    Points are dealt to components round-robin, so counts differ by at
    most one.

    Returns
    -------
    measure : DiscreteMeasure with uniform masses 1/n.
    labels : (n,) int array, the generating component of each point.
    means : (k, dim) component means.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n_components < 1:
        raise ValueError("n_components must be at least 1")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if separation is None:
        separation = 8.0 * sigma

    means = np.zeros((n_components, dim))
    if n_components > 1:
        if dim == 1:
            offsets = (np.arange(n_components) - (n_components - 1) / 2.0) * separation
            means[:, 0] = offsets
        else:
            radius = separation / (2.0 * np.sin(np.pi / n_components))
            angles = 2.0 * np.pi * np.arange(n_components) / n_components
            means[:, 0] = radius * np.cos(angles)
            means[:, 1] = radius * np.sin(angles)

    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_components
    points = means[labels] + sigma * rng.standard_normal((n, dim))
    measure = DiscreteMeasure(points, np.full(n, 1.0 / n))
    return measure, labels, means


def make_uniform(
    n: int, dim: int = 2, low: float = 0.0, high: float = 1.0, seed=None
) -> DiscreteMeasure:
    """n points drawn uniformly from the box [low, high]^dim, masses 1/n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if not high > low:
        raise ValueError("high must exceed low")
    rng = np.random.default_rng(seed)
    points = rng.uniform(low, high, size=(n, dim))
    return DiscreteMeasure(points, np.full(n, 1.0 / n))
