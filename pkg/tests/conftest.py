import numpy as np
import pytest

from losspaths.nets import Batch, NetworkSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_spec():
    """A 4-2-2 classifier small enough for scalar-loop oracles."""
    return NetworkSpec(
        layer_sizes=(4, 2, 2),
        activations=("relu", "identity"),
        use_bias=(True, True),
        loss_kind="cross_entropy_softmax",
    )


@pytest.fixture
def toy_batch(rng):
    inputs = rng.uniform(0.0, 1.0, size=(3, 4))
    labels = np.array([0, 1, 0])
    return Batch(inputs, labels)


def finite_difference_grad(f, x, h=1e-5, coords=None):
    """Central finite differences of a scalar function, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    coords = range(x.size) if coords is None else coords
    g = {}
    flat = x.ravel()
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return g
