"""Dense feedforward networks with exact reverse-mode gradients.

Everything here is plain numpy in float64. A network is described by a
NetworkSpec (layer sizes, per-layer activation, bias flags, loss kind) and its
parameters live either as a list of (W, b) arrays or flattened into a single
1-D vector. The flat layout is fixed and documented so that serialized vectors
remain valid across versions:

    for each weight layer l (in order):
        W_l.ravel(order="C")      # shape (fan_in, fan_out), row-major
        b_l                       # shape (fan_out,), only if use_bias[l]

Forward convention: activations(l)( a @ W_l + b_l ).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "softplus", "sigmoid", "identity")
LOSS_KINDS = ("cross_entropy_softmax", "mean_squared_error")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: sizes, activations, bias flags, loss kind."""

    layer_sizes: tuple
    activations: tuple
    use_bias: tuple
    loss_kind: str

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "use_bias", tuple(bool(u) for u in self.use_bias))
        if len(sizes) < 2:
            raise ValueError("need at least two layer sizes")
        if any(s <= 0 for s in sizes):
            raise ValueError("layer sizes must be positive")
        n_layers = len(sizes) - 1
        if len(self.activations) != n_layers:
            raise ValueError(f"expected {n_layers} activations, got {len(self.activations)}")
        if len(self.use_bias) != n_layers:
            raise ValueError(f"expected {n_layers} bias flags, got {len(self.use_bias)}")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def param_count(self):
        """Total number of trainable parameters (the landscape dimension)."""
        n = 0
        for l in range(self.n_layers):
            n += self.layer_sizes[l] * self.layer_sizes[l + 1]
            if self.use_bias[l]:
                n += self.layer_sizes[l + 1]
        return n

    def layer_shapes(self):
        """(fan_in, fan_out) of each weight matrix, in layer order."""
        return [
            (self.layer_sizes[l], self.layer_sizes[l + 1])
            for l in range(self.n_layers)
        ]


def fcp_spec():
    """The canonical classifier: 784-50-50-10, ReLU hidden, no biases."""
    return NetworkSpec(
        layer_sizes=(784, 50, 50, 10),
        activations=("relu", "relu", "identity"),
        use_bias=(False, False, False),
        loss_kind="cross_entropy_softmax",
    )


def autoencoder_spec():
    """The canonical autoencoder: 784-32-32-32-784, softplus, sigmoid output.

    Encoder and decoder are two fully connected layers each and share the
    32-unit code layer, which gives 52,224 weights.
    """
    return NetworkSpec(
        layer_sizes=(784, 32, 32, 32, 784),
        activations=("softplus", "softplus", "softplus", "sigmoid"),
        use_bias=(False, False, False, False),
        loss_kind="mean_squared_error",
    )


@dataclass
class Batch:
    """A block of inputs with targets (class labels or reconstruction targets)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be 2-D (n_samples, n_features)")
        if self.inputs.shape[0] == 0:
            raise ValueError("empty batch")
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise ValueError("inputs and targets must have equal sample counts")

    def __len__(self):
        return self.inputs.shape[0]


# ---------------------------------------------------------------------------
# activations and their derivatives
# ---------------------------------------------------------------------------

def _sigmoid(z):
    # evaluate in the branch that keeps exp() from overflowing
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply_activation(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softplus":
        return np.logaddexp(0.0, z)
    if kind == "sigmoid":
        return _sigmoid(z)
    return z  # identity


def _activation_deriv(kind, z, a):
    """Derivative of the activation at pre-activation z (a is the output)."""
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "softplus":
        return _sigmoid(z)
    if kind == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


# ---------------------------------------------------------------------------
# flatten / unflatten
# ---------------------------------------------------------------------------

def unflatten(spec, v):
    """Split a flat parameter vector into per-layer (W, b) arrays.

    b is None for layers without a bias. Raises on length mismatch.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != spec.param_count:
        raise ValueError(
            f"parameter vector has length {v.size}, spec requires {spec.param_count}"
        )
    layers = []
    pos = 0
    for l, (fan_in, fan_out) in enumerate(spec.layer_shapes()):
        W = v[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = None
        if spec.use_bias[l]:
            b = v[pos:pos + fan_out]
            pos += fan_out
        layers.append((W, b))
    return layers


def flatten(layers):
    """Concatenate per-layer (W, b) arrays back into one flat vector."""
    chunks = []
    for W, b in layers:
        chunks.append(np.asarray(W, dtype=np.float64).ravel())
        if b is not None:
            chunks.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(chunks)


def init_params(spec, seed):
    """Scaled-uniform initial parameters, deterministic in the seed.

    Every layer (weights and any biases) is drawn uniformly from
    [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
    """
    rng = np.random.default_rng(seed)
    chunks = []
    for l, (fan_in, fan_out) in enumerate(spec.layer_shapes()):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        if spec.use_bias[l]:
            chunks.append(rng.uniform(-limit, limit, size=fan_out))
    return np.concatenate(chunks)


def init_limit(spec, layer):
    """The uniform bound used for the given weight layer (for tests/reporting)."""
    fan_in, fan_out = spec.layer_shapes()[layer]
    return np.sqrt(6.0 / (fan_in + fan_out))


# ---------------------------------------------------------------------------
# forward / loss / gradients
# ---------------------------------------------------------------------------

def _check_batch(spec, batch):
    if batch.inputs.shape[1] != spec.layer_sizes[0]:
        raise ValueError(
            f"batch feature dim {batch.inputs.shape[1]} does not match "
            f"input layer size {spec.layer_sizes[0]}"
        )


def _forward(spec, layers, x):
    """Run the network, keeping pre- and post-activation values per layer."""
    a = x
    zs, acts = [], [a]
    for l, (W, b) in enumerate(layers):
        z = a @ W
        if b is not None:
            z = z + b
        a = _apply_activation(spec.activations[l], z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def _loss_from_output(spec, out, targets):
    """Mean loss over the batch, plus d(loss)/d(out) for the backward pass."""
    n = out.shape[0]
    if spec.loss_kind == "cross_entropy_softmax":
        labels = np.asarray(targets, dtype=np.int64)
        # log-sum-exp stabilized softmax cross-entropy
        zmax = out.max(axis=1, keepdims=True)
        shifted = out - zmax
        lse = np.log(np.exp(shifted).sum(axis=1)) + zmax[:, 0]
        picked = out[np.arange(n), labels]
        loss = float(np.mean(lse - picked))
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        dout = probs
        dout[np.arange(n), labels] -= 1.0
        dout /= n
        return loss, dout
    # mean squared error over every output element
    t = np.asarray(targets, dtype=np.float64)
    diff = out - t
    loss = float(np.mean(diff ** 2))
    dout = 2.0 * diff / diff.size
    return loss, dout


def loss(spec, params, batch):
    """Mean loss of the network at the given flat parameters on the batch."""
    _check_batch(spec, batch)
    layers = unflatten(spec, params)
    _, acts = _forward(spec, layers, batch.inputs)
    value, _ = _loss_from_output(spec, acts[-1], batch.targets)
    return value


def loss_and_grad(spec, params, batch):
    """Loss plus its exact gradient with respect to every flat parameter.

    Reverse-mode: the delta flowing into layer l is d(loss)/d(z_l); weight
    gradients are a_{l-1}^T delta and the delta is pushed through W_l^T and
    the activation derivative of the previous layer.
    """
    _check_batch(spec, batch)
    layers = unflatten(spec, params)
    zs, acts = _forward(spec, layers, batch.inputs)
    value, dout = _loss_from_output(spec, acts[-1], batch.targets)

    n_layers = spec.n_layers
    grads = [None] * n_layers
    # d(loss)/d(z) for the last layer
    delta = dout * _activation_deriv(spec.activations[-1], zs[-1], acts[-1])
    for l in range(n_layers - 1, -1, -1):
        W, b = layers[l]
        gW = acts[l].T @ delta
        gb = delta.sum(axis=0) if b is not None else None
        grads[l] = (gW, gb)
        if l > 0:
            # acts[l] is the output of layer l - 1 (acts[0] is the input)
            delta = (delta @ W.T) * _activation_deriv(
                spec.activations[l - 1], zs[l - 1], acts[l]
            )
    return value, flatten(grads)


def forward_outputs(spec, params, inputs):
    """Network outputs for a block of inputs (no loss attached)."""
    layers = unflatten(spec, params)
    _, acts = _forward(spec, layers, np.asarray(inputs, dtype=np.float64))
    return acts[-1]
