"""Dense feed-forward networks with exact reverse-mode gradients.

Everything is float64 numpy. A forward pass caches layer inputs and
pre-activations on a tape; backward() replays the chain rule on that tape
and refuses to run if the parameters changed in between. Freezing is a
per-layer mask honored by the optimizer, not by backward(): frozen layers
still produce gradients so the chain rule through them stays intact.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ShapeError, StaleTapeError

RELU = "relu"
SIGMOID = "sigmoid"
LINEAR = "linear"
ACTIVATIONS = (RELU, SIGMOID, LINEAR)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.biases.size

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation)


@dataclass
class Mlp:
    layers: list
    frozen: np.ndarray = field(default=None)
    version: int = 0

    def __post_init__(self):
        if self.frozen is None:
            self.frozen = np.zeros(len(self.layers), dtype=bool)
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ConfigurationError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def dims(self) -> list:
        return [self.in_dim] + [layer.out_dim for layer in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([layer.copy() for layer in self.layers], self.frozen.copy())


@dataclass
class GradientTape:
    inputs: list  # per layer: input to the layer, shape (batch, in_dim)
    preacts: list  # per layer: W x + b before the activation
    version: int
    squeeze: bool  # True when forward() received a 1-D vector


@dataclass
class Gradients:
    weights: list  # per layer (out_dim, in_dim)
    biases: list  # per layer (out_dim,)
    input_grad: np.ndarray  # loss gradient w.r.t. the network input


def init_mlp(layer_dims, activations, seed) -> Mlp:
    """He-uniform weights (fan-in scaled), zero biases, seeded."""
    if len(layer_dims) < 2:
        raise ConfigurationError("need at least input and output dims")
    if len(activations) != len(layer_dims) - 1:
        raise ConfigurationError(
            f"{len(layer_dims) - 1} layers need {len(layer_dims) - 1} activations, "
            f"got {len(activations)}"
        )
    if any(d < 1 for d in layer_dims):
        raise ConfigurationError(f"all dims must be >= 1, got {layer_dims}")
    for act in activations:
        if act not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {act!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(layer_dims[:-1], layer_dims[1:], activations):
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def _activate(z, act):
    if act == RELU:
        return np.maximum(z, 0.0)
    if act == SIGMOID:
        # stable in both tails
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activate_grad(z, act):
    if act == RELU:
        return (z > 0.0).astype(np.float64)
    if act == SIGMOID:
        s = _activate(z, SIGMOID)
        return s * (1.0 - s)
    return np.ones_like(z)


def forward(model: Mlp, x):
    """Run the network; returns (output, tape).

    Accepts a single vector (in_dim,) or a batch (batch, in_dim); the
    output matches the input's rank.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ShapeError(f"expected input dim {model.in_dim}, got shape {x.shape}")
    inputs, preacts = [], []
    a = x
    for layer in model.layers:
        inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        preacts.append(z)
        a = _activate(z, layer.activation)
    tape = GradientTape(inputs, preacts, model.version, squeeze)
    return (a[0] if squeeze else a), tape


def backward(model: Mlp, tape: GradientTape, output_grad) -> Gradients:
    """Chain-rule gradients of a scalar loss given dloss/doutput.

    The tape must come from a forward() on the current parameters. Batch
    reduction is the caller's business: whatever weighting output_grad
    encodes (e.g. 1/batch for a mean loss) flows through unchanged.
    """
    if tape.version != model.version:
        raise StaleTapeError(
            f"tape built at parameter version {tape.version}, model is at "
            f"{model.version}; rerun forward() before backward()"
        )
    g = np.asarray(output_grad, dtype=np.float64)
    if tape.squeeze:
        g = g[None, :]
    if g.shape != tape.preacts[-1].shape:
        raise ShapeError(
            f"output_grad shape {g.shape} != output shape {tape.preacts[-1].shape}"
        )
    w_grads = [None] * len(model.layers)
    b_grads = [None] * len(model.layers)
    delta = g
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        delta = delta * _activate_grad(tape.preacts[k], layer.activation)
        w_grads[k] = delta.T @ tape.inputs[k]
        b_grads[k] = delta.sum(axis=0)
        delta = delta @ layer.weights
    input_grad = delta[0] if tape.squeeze else delta
    return Gradients(w_grads, b_grads, input_grad)


def set_frozen(model: Mlp, layer_range, flag: bool) -> Mlp:
    """Mark layers (an index, range or iterable of indices) frozen/unfrozen."""
    if isinstance(layer_range, int):
        layer_range = [layer_range]
    idx = list(layer_range)
    for i in idx:
        if not 0 <= i < len(model.layers):
            raise ConfigurationError(
                f"layer index {i} out of range for {len(model.layers)} layers"
            )
    model.frozen[idx] = flag
    return model


def freeze_all(model: Mlp) -> Mlp:
    return set_frozen(model, range(len(model.layers)), True)


def parameter_count(model: Mlp) -> int:
    return sum(layer.parameter_count for layer in model.layers)


def parameter_checksum(model: Mlp) -> bytes:
    """Digest of the exact parameter bytes; changes iff any bit changes."""
    import hashlib

    h = hashlib.sha256()
    for layer in model.layers:
        h.update(np.ascontiguousarray(layer.weights).tobytes())
        h.update(np.ascontiguousarray(layer.biases).tobytes())
    return h.digest()
