"""Dual-network PK surrogate: a state network X(t) and a right-hand-side model f(t, X).

Two modes are supported:

``blackbox``
    ``f`` is a dense network on ``(t, x0, x1, x2)``. The five physical
    parameters are still registered as trainable scalars but nothing in the
    loss references them, so they keep their initial value.
``parametric``
    ``f`` is the compartment-model right-hand side evaluated with the five
    learnable parameters; there is no f-network.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import autodiff as ad
from .dynamics import DEFAULT_X_INIT, NoisyDataset, PKParameters, Trajectory
from .errors import DataError, DivergedError, InvalidArgumentError
from .nn import (
    AdamState,
    DenseNetwork,
    NetworkSpec,
    adam_step,
    forward,
    graph_forward,
    init_network,
    input_derivative,
    network_from_dict,
    network_to_dict,
)

MODES = ("blackbox", "parametric")
PARAM_NAMES = ("ka", "cl", "q", "v1", "v2")
X_HIDDEN = (100, 100)
F_HIDDEN = (100, 100, 100)


@dataclass(frozen=True)
class LossWeights:
    data: float = 1.0
    ode: float = 2.0
    ic: float = 1.0

    def __post_init__(self):
        if min(self.data, self.ode, self.ic) <= 0:
            raise InvalidArgumentError("loss weights must be positive")


class StateSpline:
    """Cubic-spline state surrogate, a drop-in replacement for the state network."""

    def __init__(self, times, states):
        self._spline = CubicSpline(np.asarray(times, float), np.asarray(states, float), axis=0)
        self._deriv = self._spline.derivative()

    def __call__(self, t):
        return self._spline(np.asarray(t, float))

    def derivative(self, t):
        return self._deriv(np.asarray(t, float))


@dataclass
class PKINNModel:
    x_net: DenseNetwork | StateSpline
    f_net: DenseNetwork | None
    learnable_params: np.ndarray = field(default_factory=lambda: np.ones(5))
    mode: str = "blackbox"
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.learnable_params = np.asarray(self.learnable_params, dtype=float).reshape(5)
        if self.mode == "blackbox" and self.f_net is None:
            raise InvalidArgumentError("blackbox mode needs an f-network")
        if isinstance(self.x_net, DenseNetwork):
            spec = self.x_net.spec
            if spec.input_dim != 1 or spec.output_dim != 3:
                raise InvalidArgumentError("x-net must map 1 input to 3 outputs")
        if self.f_net is not None and (self.f_net.spec.input_dim != 4 or self.f_net.spec.output_dim != 3):
            raise InvalidArgumentError("f-net must map 4 inputs to 3 outputs")

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES, map(float, self.learnable_params)))

    def states(self, t) -> np.ndarray:
        return np.asarray(self.x_net(np.asarray(t, float)))

    def state_derivatives(self, t) -> np.ndarray:
        if isinstance(self.x_net, DenseNetwork):
            return input_derivative(self.x_net, t)
        return np.asarray(self.x_net.derivative(t))


def build_model(
    mode: str = "blackbox",
    seed: int = 0,
    x_hidden=X_HIDDEN,
    f_hidden=F_HIDDEN,
    loss_weights: LossWeights | None = None,
) -> PKINNModel:
    """Fresh model with Glorot-initialized networks and all physical parameters at 1."""
    x_net = init_network(NetworkSpec(1, 3, tuple(x_hidden)), seed)
    f_net = init_network(NetworkSpec(4, 3, tuple(f_hidden)), seed + 1) if mode == "blackbox" else None
    return PKINNModel(x_net, f_net, np.ones(5), mode, loss_weights or LossWeights())


def parametric_rhs(theta, x):
    """Compartment right-hand side with parameters ``theta = (ka, cl, q, v1, v2)``.

    Works on arrays or graph tensors; ``x`` is ``(n, 3)``.
    """
    ka, cl, q, v1, v2 = (theta[i] for i in range(5))
    x0, x1, x2 = x[:, 0:1], x[:, 1:2], x[:, 2:3]
    f1 = -ka * x0
    f2 = ka * x0 - ((cl + q) / v1) * x1 + (q / v2) * x2
    f3 = (q / v1) * x1 - (q / v2) * x2
    if isinstance(x, ad.Tensor):
        return ad.concat([f1, f2, f3], axis=1)
    return np.concatenate([f1, f2, f3], axis=1)


def f_predict(model: PKINNModel, t, x) -> np.ndarray:
    """Right-hand side prediction at times ``t`` and states ``x``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    tt = t.reshape(-1, 1)
    xx = x.reshape(-1, 3)
    if model.mode == "blackbox":
        out = forward(model.f_net, np.concatenate([np.broadcast_to(tt, (len(xx), 1)), xx], axis=1))
    else:
        out = parametric_rhs(model.learnable_params, xx)
    return out[0] if single else out


def ode_residuals(model: PKINNModel, t_colloc) -> np.ndarray:
    t = np.asarray(t_colloc, dtype=float).reshape(-1)
    if t.size == 0:
        raise InvalidArgumentError("collocation set is empty")
    x = model.states(t).reshape(-1, 3)
    dx = model.state_derivatives(t).reshape(-1, 3)
    return dx - f_predict(model, t, x)


def loss_ode(residuals) -> float:
    """Mean over collocation points of the summed squared component residuals."""
    r = np.atleast_2d(np.asarray(residuals, dtype=float))
    if r.size == 0:
        raise InvalidArgumentError("residual matrix is empty")
    return float(np.sum(r * r) / r.shape[0])


def loss_ic(model: PKINNModel, x_init=DEFAULT_X_INIT, t0: float = 0.0) -> float:
    """Euclidean distance between the predicted state at ``t0`` and ``x_init``."""
    pred = model.states(np.array([t0])).reshape(3)
    return float(np.sqrt(np.sum((pred - np.asarray(x_init, float)) ** 2)))


def loss_data(model: PKINNModel, train: NoisyDataset) -> float:
    if len(train) == 0:
        raise InvalidArgumentError("training set is empty")
    pred = model.states(train.times).reshape(-1, 3)
    return float(np.mean((pred - train.noisy.states) ** 2))


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 1e-2
    seed: int = 0
    collocation_times: np.ndarray | None = None
    initial_condition: tuple = DEFAULT_X_INIT
    t0: float | None = None
    mode: str = "blackbox"

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise InvalidArgumentError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}")
        if self.collocation_times is not None and np.asarray(self.collocation_times).size == 0:
            raise InvalidArgumentError("collocation_times must be nonempty")


@dataclass
class TrainReport:
    losses: np.ndarray  # (epochs, 4): total, data, ode, ic
    param_trace: np.ndarray  # (epochs, 5)
    final_params: dict[str, float]
    duration: float

    @property
    def total(self) -> np.ndarray:
        return self.losses[:, 0]

    def __len__(self) -> int:
        return len(self.losses)


def _resolve_times(train: NoisyDataset, config: TrainConfig) -> tuple[np.ndarray, float]:
    t_colloc = train.times if config.collocation_times is None else np.asarray(config.collocation_times, float)
    lo, hi = train.times[0], train.times[-1]
    if np.any(t_colloc < lo) or np.any(t_colloc > hi):
        raise InvalidArgumentError("collocation times must lie within the training time range")
    t0 = float(train.times[0]) if config.t0 is None else float(config.t0)
    return t_colloc, t0


def loss_total(model: PKINNModel, train: NoisyDataset, config: TrainConfig | None = None):
    """Weighted total loss and its ``{"data", "ode", "ic"}`` breakdown."""
    config = config or TrainConfig(mode=model.mode)
    t_colloc, t0 = _resolve_times(train, config)
    parts = {
        "data": loss_data(model, train),
        "ode": loss_ode(ode_residuals(model, t_colloc)),
        "ic": loss_ic(model, config.initial_condition, t0),
    }
    return combine_losses(parts, model.loss_weights), parts


def combine_losses(parts: dict, weights: LossWeights = LossWeights()) -> float:
    return weights.data * parts["data"] + weights.ode * parts["ode"] + weights.ic * parts["ic"]


def _trainable(model: PKINNModel) -> list[np.ndarray]:
    params = list(model.x_net.parameters)
    if model.f_net is not None:
        params += model.f_net.parameters
    return params + [model.learnable_params]


def _rebuild(model: PKINNModel, flat: list[np.ndarray]) -> PKINNModel:
    nx = len(model.x_net.parameters)
    nf = 0 if model.f_net is None else len(model.f_net.parameters)
    x_net = model.x_net.with_parameters(flat[:nx])
    f_net = None if model.f_net is None else model.f_net.with_parameters(flat[nx : nx + nf])
    return replace(model, x_net=x_net, f_net=f_net, learnable_params=np.array(flat[-1]))


def loss_graph(model: PKINNModel, tensors, t_colloc, t_data, y_data, x_init, t0):
    """Build the total loss as a graph over ``tensors`` (same layout as the trainable list).

    Returns ``(total, data, ode, ic)`` tensors.
    """
    nx = len(model.x_net.parameters)
    xp = tensors[:nx]
    fp = tensors[nx:-1]
    theta = tensors[-1]
    x_acts = model.x_net.spec.activations

    tc = ad.Tensor(np.asarray(t_colloc, float).reshape(-1, 1))
    x_c, dx_c = graph_forward(xp, x_acts, tc, ad.Tensor(np.ones_like(tc.value)))
    if model.mode == "blackbox":
        f_c = graph_forward(fp, model.f_net.spec.activations, ad.concat([tc, x_c], axis=1))
    else:
        f_c = parametric_rhs(theta, x_c)
    l_ode = ad.tsum(ad.square(dx_c - f_c)) * (1.0 / tc.shape[0])

    if np.array_equal(t_data, t_colloc):
        x_d = x_c
    else:
        x_d = graph_forward(xp, x_acts, ad.Tensor(np.asarray(t_data, float).reshape(-1, 1)))
    l_data = ad.mean(ad.square(x_d - np.asarray(y_data, float)))

    x_0 = graph_forward(xp, x_acts, ad.Tensor(np.array([[t0]])))
    l_ic = ad.sqrt(ad.tsum(ad.square(x_0 - np.asarray(x_init, float).reshape(1, 3))))

    w = model.loss_weights
    total = l_data * w.data + l_ode * w.ode + l_ic * w.ic
    return total, l_data, l_ode, l_ic


def loss_and_gradients(model: PKINNModel, train: NoisyDataset, config: TrainConfig):
    """Total loss, its breakdown, and gradients for every trainable array."""
    t_colloc, t0 = _resolve_times(train, config)
    tensors = [ad.Tensor(p) for p in _trainable(model)]
    total, l_data, l_ode, l_ic = loss_graph(
        model, tensors, t_colloc, train.times, train.noisy.states, config.initial_condition, t0
    )
    grads = ad.grad(total, tensors)
    values = np.array([total.value, l_data.value, l_ode.value, l_ic.value], dtype=float)
    return values, grads


def train(model: PKINNModel, data: NoisyDataset, config: TrainConfig) -> tuple[PKINNModel, TrainReport]:
    """Full-batch Adam on the total loss.

    Row ``e`` of the report holds the losses and parameters at the start of
    epoch ``e``, i.e. the point where that epoch's gradient was taken.
    """
    if not isinstance(model.x_net, DenseNetwork):
        raise InvalidArgumentError("only network state surrogates can be trained")
    if len(data) == 0:
        raise InvalidArgumentError("training set is empty")
    start = time.perf_counter()
    epochs = int(config.epochs)
    losses = np.empty((epochs, 4))
    param_trace = np.empty((epochs, 5))
    flat = [np.array(p, dtype=float) for p in _trainable(model)]
    state = AdamState.for_params(flat, config.learning_rate)
    current = model
    for epoch in range(epochs):
        values, grads = loss_and_gradients(current, data, config)
        if not np.all(np.isfinite(values)) or not all(np.all(np.isfinite(g)) for g in grads):
            raise DivergedError(epoch)
        losses[epoch] = values
        param_trace[epoch] = current.learnable_params
        flat, state = adam_step(state, flat, grads)
        current = _rebuild(current, flat)
    report = TrainReport(losses, param_trace, current.params, time.perf_counter() - start)
    return current, report


def predict(model: PKINNModel, t_grid) -> Trajectory:
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    return Trajectory(t, model.states(t).reshape(-1, 3))


# -- files ------------------------------------------------------------------

REPORT_HEADER = ("epoch", "loss_total", "loss_data", "loss_ode", "loss_ic") + PARAM_NAMES


def write_report_csv(report: TrainReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for epoch, (losses, params) in enumerate(zip(report.losses, report.param_trace)):
            writer.writerow([epoch] + [repr(float(v)) for v in losses] + [repr(float(v)) for v in params])
    return path


def model_to_dict(model: PKINNModel) -> dict:
    if not isinstance(model.x_net, DenseNetwork):
        raise InvalidArgumentError("only network state surrogates can be checkpointed")
    w = model.loss_weights
    return {
        "format": "pkinn-checkpoint/1",
        "mode": model.mode,
        "loss_weights": {"data": w.data, "ode": w.ode, "ic": w.ic},
        "learnable_params": model.params,
        "x_net": network_to_dict(model.x_net),
        "f_net": None if model.f_net is None else network_to_dict(model.f_net),
    }


def model_from_dict(data: dict) -> PKINNModel:
    try:
        params = np.array([data["learnable_params"][k] for k in PARAM_NAMES], dtype=float)
        return PKINNModel(
            x_net=network_from_dict(data["x_net"]),
            f_net=None if data["f_net"] is None else network_from_dict(data["f_net"]),
            learnable_params=params,
            mode=data["mode"],
            loss_weights=LossWeights(**data["loss_weights"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed checkpoint: {exc}") from exc


def save_model(model: PKINNModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1) + "\n")
    return path


def load_model(path) -> PKINNModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return model_from_dict(data)


def true_parameter_model(params: PKParameters, x_surrogate) -> PKINNModel:
    """Parametric model with fixed physical parameters around a given state surrogate."""
    return PKINNModel(x_surrogate, None, params.as_array(), "parametric")
