"""Dense tanh networks, their input derivatives, and the Adam optimizer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import InvalidSpecError, ShapeError, UnsupportedError

ACTIVATIONS = ("tanh", "linear")


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    output_dim: int
    hidden_layers: tuple[int, ...] = (100, 100)
    activations: tuple[str, ...] | None = None

    def __post_init__(self):
        hidden = tuple(int(w) for w in self.hidden_layers)
        object.__setattr__(self, "hidden_layers", hidden)
        acts = self.activations
        if acts is None:
            acts = ("tanh",) * len(hidden) + ("linear",)
        acts = tuple(acts)
        object.__setattr__(self, "activations", acts)
        if self.input_dim < 1 or self.output_dim < 1 or any(w < 1 for w in hidden):
            raise InvalidSpecError(f"all layer widths must be positive: {self.layer_sizes}")
        if len(acts) != len(hidden) + 1:
            raise InvalidSpecError("need one activation per layer (hidden layers plus output)")
        if any(a not in ACTIVATIONS for a in acts):
            raise InvalidSpecError(f"activations must be one of {ACTIVATIONS}, got {acts}")
        if acts[-1] != "linear":
            raise InvalidSpecError("final layer must be linear")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)


@dataclass
class DenseNetwork:
    """Weights are stored ``(fan_out, fan_in)``; a layer computes ``act(x @ W.T + b)``."""

    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError("layer count does not match spec")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k + 1], sizes[k]) or b.shape != (sizes[k + 1],):
                raise ShapeError(f"layer {k}: got W{w.shape}, b{b.shape}, expected ({sizes[k + 1]}, {sizes[k]})")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ShapeError(f"layer {k}: non-finite entries")

    @property
    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_parameters(self, params) -> DenseNetwork:
        params = list(params)
        return DenseNetwork(self.spec, [np.array(p) for p in params[0::2]], [np.array(p) for p in params[1::2]])

    def scaled_output(self, c: float) -> DenseNetwork:
        weights = [w.copy() for w in self.weights]
        weights[-1] = weights[-1] * c
        return replace(self, weights=weights, biases=[b.copy() for b in self.biases])

    def __call__(self, x):
        return forward(self, x)


def init_network(spec: NetworkSpec, seed: int) -> DenseNetwork:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(spec, weights, biases)


def zero_network(spec: NetworkSpec) -> DenseNetwork:
    sizes = spec.layer_sizes
    return DenseNetwork(
        spec,
        [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
        [np.zeros(o) for o in sizes[1:]],
    )


def forward(net: DenseNetwork, x) -> np.ndarray:
    """Evaluate the network.

    A 1-D input of length ``input_dim`` gives a 1-D output; a 2-D ``(n, input_dim)``
    batch gives ``(n, output_dim)``. For scalar-input networks a 1-D array is
    treated as a batch of times.
    """
    x = np.asarray(x, dtype=float)
    if net.spec.input_dim == 1:
        if x.ndim > 2 or (x.ndim == 2 and x.shape[1] != 1):
            raise ShapeError(f"input shape {x.shape} incompatible with input_dim=1")
        h = x.reshape(-1, 1)
        squeeze = x.ndim == 0
    else:
        if x.shape[-1] != net.spec.input_dim or x.ndim > 2:
            raise ShapeError(f"input shape {x.shape} incompatible with input_dim={net.spec.input_dim}")
        h = np.atleast_2d(x)
        squeeze = x.ndim == 1
    for w, b, act in zip(net.weights, net.biases, net.spec.activations):
        h = h @ w.T + b
        if act == "tanh":
            h = np.tanh(h)
    return h[0] if squeeze else h


def input_derivative(net: DenseNetwork, t) -> np.ndarray:
    """Exact ``d output / d t`` for a scalar-input network, by tangent propagation."""
    if net.spec.input_dim != 1:
        raise UnsupportedError("input_derivative requires a scalar-input network")
    t = np.asarray(t, dtype=float)
    h = t.reshape(-1, 1)
    dh = np.ones_like(h)
    for w, b, act in zip(net.weights, net.biases, net.spec.activations):
        h = h @ w.T + b
        dh = dh @ w.T
        if act == "tanh":
            h = np.tanh(h)
            dh = (1.0 - h * h) * dh
    return dh[0] if t.ndim == 0 else dh


def graph_forward(params, activations, x, tangent=None):
    """Graph version of :func:`forward` over tensors ``params = [W0, b0, ...]``.

    With ``tangent`` (the derivative of ``x`` w.r.t. a scalar input), also returns
    the propagated tangent of the output, so terms built from it are
    differentiable with respect to the weights.
    """
    h, dh = x, tangent
    for k, act in enumerate(activations):
        w, b = params[2 * k], params[2 * k + 1]
        h = h @ w.T + b
        if dh is not None:
            dh = dh @ w.T
        if act == "tanh":
            h = ad.tanh(h)
            if dh is not None:
                dh = (1.0 - ad.square(h)) * dh
    return (h, dh) if tangent is not None else h


# -- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate: float = 1e-2, **kwargs) -> AdamState:
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p, dtype=float) for p in params],
            second_moment=[np.zeros_like(p, dtype=float) for p in params],
            **kwargs,
        )


def adam_step(state: AdamState, params, grads) -> tuple[list[np.ndarray], AdamState]:
    params, grads = list(params), list(grads)
    if not state.first_moment:
        state = AdamState.for_params(
            params, state.learning_rate, beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon
        )
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("parameter, gradient and moment counts differ")
    b1, b2 = state.beta1, state.beta2
    t = state.step_count + 1
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        p, g = np.asarray(p, dtype=float), np.asarray(g, dtype=float)
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        update = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, step_count=t, first_moment=new_m, second_moment=new_v)


# -- checkpoint ---------------------------------------------------------------


def network_to_dict(net: DenseNetwork) -> dict:
    spec = net.spec
    return {
        "spec": {
            "input_dim": spec.input_dim,
            "output_dim": spec.output_dim,
            "hidden_layers": list(spec.hidden_layers),
            "activations": list(spec.activations),
        },
        "layers": [
            {"shape": list(w.shape), "weights": w.ravel(order="C").tolist(), "biases": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }


def network_from_dict(data: dict) -> DenseNetwork:
    s = data["spec"]
    spec = NetworkSpec(s["input_dim"], s["output_dim"], tuple(s["hidden_layers"]), tuple(s["activations"]))
    weights = [np.array(layer["weights"], dtype=float).reshape(layer["shape"]) for layer in data["layers"]]
    biases = [np.array(layer["biases"], dtype=float) for layer in data["layers"]]
    return DenseNetwork(spec, weights, biases)


def save_network(net: DenseNetwork, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(network_to_dict(net), indent=1) + "\n")
    return path


def load_network(path) -> DenseNetwork:
    return network_from_dict(json.loads(Path(path).read_text()))
