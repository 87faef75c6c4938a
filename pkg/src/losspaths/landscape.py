"""Differentiable scalar fields: the synthetic 2D surface and NN losses.

A ScalarLandscape is anything with a fixed dimension, value(omega) and
gradient(omega). The path optimizer only ever talks to this interface, so the
same machinery runs on the closed-form 2D surface and on 42,200-dimensional
network loss landscapes.
"""

from __future__ import annotations

import numpy as np

from . import nets
from .mnist import Dataset, full_batch


class ScalarLandscape:
    """Interface: dim, value(point) -> float, gradient(point) -> array."""

    dim = None

    def value(self, point):
        raise NotImplementedError

    def gradient(self, point):
        raise NotImplementedError

    def values(self, points):
        """Values at several points, default one-at-a-time."""
        return np.array([self.value(p) for p in points])

    def gradients(self, points):
        """Gradients at several points, stacked into (len(points), dim)."""
        return np.stack([self.gradient(p) for p in points])


# ---------------------------------------------------------------------------
# the closed-form 2D surface
# ---------------------------------------------------------------------------

ATTRACTORS = np.array([[-0.5, -0.5], [0.5, 0.0]])
REPELLERS = np.array([[-0.2, -0.4], [0.0, 0.3]])
ATTRACTOR_WIDTH = 3.0
REPELLER_WIDTH = 15.0
OFFSET = 1.019

# the two published minima used as path endpoints
W1 = np.array([-0.62, -0.54])
W2 = np.array([0.49, -0.02])


def synthetic_value(x, y):
    """f(x, y): two negative Gaussian wells plus two positive Gaussian bumps."""
    r = np.array([x, y], dtype=np.float64)
    v = OFFSET
    for c in ATTRACTORS:
        v -= np.exp(-ATTRACTOR_WIDTH * np.sum((r - c) ** 2))
    for d in REPELLERS:
        v += np.exp(-REPELLER_WIDTH * np.sum((r - d) ** 2))
    return float(v)


def synthetic_grad(x, y):
    """Analytic gradient of synthetic_value."""
    r = np.array([x, y], dtype=np.float64)
    g = np.zeros(2)
    for c in ATTRACTORS:
        g += 2.0 * ATTRACTOR_WIDTH * (r - c) * np.exp(-ATTRACTOR_WIDTH * np.sum((r - c) ** 2))
    for d in REPELLERS:
        g -= 2.0 * REPELLER_WIDTH * (r - d) * np.exp(-REPELLER_WIDTH * np.sum((r - d) ** 2))
    return g


class GaussianMixture2D(ScalarLandscape):
    """The Fig-like synthetic 2D landscape with its published constants."""

    dim = 2

    def value(self, point):
        return synthetic_value(point[0], point[1])

    def gradient(self, point):
        return synthetic_grad(point[0], point[1])

    def values(self, points):
        pts = np.asarray(points, dtype=np.float64)
        v = np.full(pts.shape[0], OFFSET)
        for c in ATTRACTORS:
            v -= np.exp(-ATTRACTOR_WIDTH * np.sum((pts - c) ** 2, axis=1))
        for d in REPELLERS:
            v += np.exp(-REPELLER_WIDTH * np.sum((pts - d) ** 2, axis=1))
        return v

    def gradients(self, points):
        pts = np.asarray(points, dtype=np.float64)
        g = np.zeros_like(pts)
        for c in ATTRACTORS:
            w = np.exp(-ATTRACTOR_WIDTH * np.sum((pts - c) ** 2, axis=1))
            g += 2.0 * ATTRACTOR_WIDTH * (pts - c) * w[:, None]
        for d in REPELLERS:
            w = np.exp(-REPELLER_WIDTH * np.sum((pts - d) ** 2, axis=1))
            g -= 2.0 * REPELLER_WIDTH * (pts - d) * w[:, None]
        return g


# ---------------------------------------------------------------------------
# NN loss landscapes
# ---------------------------------------------------------------------------

class NNLandscape(ScalarLandscape):
    """Mean loss of a network over a fixed dataset, as a field over omega.

    Stateless: every call re-evaluates the network (no caching by vector
    identity). The dataset that defines the landscape, including any subset
    used at desk scale, is part of the landscape's identity.
    """

    def __init__(self, spec, batch, tag=""):
        self.spec = spec
        self.batch = batch
        self.tag = tag
        self.dim = spec.param_count

    def value(self, point):
        return nets.loss(self.spec, point, self.batch)

    def gradient(self, point):
        return nets.loss_and_grad(self.spec, point, self.batch)[1]

    def value_and_gradient(self, point):
        return nets.loss_and_grad(self.spec, point, self.batch)


def nn_landscape(spec, data, tag=""):
    """Build the loss landscape of a spec over a Dataset or a ready Batch."""
    if isinstance(data, Dataset):
        batch = full_batch(data, reconstruction=spec.loss_kind == "mean_squared_error")
        tag = tag or data.split_tag
    else:
        batch = data
    return NNLandscape(spec, batch, tag=tag)
