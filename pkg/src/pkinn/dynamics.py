"""Two-compartment pharmacokinetic model with first-order absorption.

State layout is ``(x0, x1, x2)``: depot, central and peripheral drug amounts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidArgumentError, InvalidGridError

DEFAULT_X_INIT = (1.0, 0.0, 0.0)
STATE_COLUMNS = ("x0", "x1", "x2")


@dataclass(frozen=True)
class PKParameters:
    ka: float = 1.14
    cl: float = 3.57
    q: float = 1.14
    v1: float = 0.454
    v2: float = 2.87

    def __post_init__(self):
        for name in ("ka", "cl", "q", "v1", "v2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidArgumentError(f"{name} must be strictly positive, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([self.ka, self.cl, self.q, self.v1, self.v2])

    def rate_matrix(self) -> np.ndarray:
        """Matrix ``A`` with ``dX/dt = A @ X``."""
        ka, cl, q, v1, v2 = self.as_array()
        return np.array(
            [
                [-ka, 0.0, 0.0],
                [ka, -(cl + q) / v1, q / v2],
                [0.0, q / v1, -q / v2],
            ]
        )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.asarray(self.states, dtype=float).reshape(len(times), 3)
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise InvalidGridError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.times)

    def select(self, mask: np.ndarray) -> Trajectory:
        return Trajectory(self.times[mask], self.states[mask])


@dataclass(frozen=True)
class NoisyDataset:
    clean: Trajectory
    noisy: Trajectory
    noise_sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")
        if not np.array_equal(self.clean.times, self.noisy.times):
            raise InvalidArgumentError("clean and noisy trajectories must share the time grid")

    @property
    def times(self) -> np.ndarray:
        return self.clean.times

    def __len__(self) -> int:
        return len(self.clean)

    def select(self, mask: np.ndarray) -> NoisyDataset:
        return NoisyDataset(self.clean.select(mask), self.noisy.select(mask), self.noise_sigma, self.seed)


def rhs(params: PKParameters, state) -> np.ndarray:
    """Right-hand side of the PK system.

    ``state`` may be a single 3-vector or an ``(n, 3)`` array of states.
    """
    x = np.asarray(state, dtype=float)
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    ka, cl, q, v1, v2 = params.ka, params.cl, params.q, params.v1, params.v2
    dx0 = -ka * x0
    dx1 = ka * x0 - ((cl + q) / v1) * x1 + (q / v2) * x2
    dx2 = (q / v1) * x1 - (q / v2) * x2
    return np.stack([dx0, dx1, dx2], axis=-1)


def _rk4_step(params: PKParameters, x: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(params, x)
    k2 = rhs(params, x + 0.5 * h * k1)
    k3 = rhs(params, x + 0.5 * h * k2)
    k4 = rhs(params, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(params: PKParameters, x_init=DEFAULT_X_INIT, t_grid=None, substeps: int = 10) -> Trajectory:
    """Classical RK4 on the output grid, each interval split into ``substeps`` equal steps."""
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    if t.size == 0:
        raise InvalidGridError("time grid is empty")
    if np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
        raise InvalidGridError("time grid must be finite and strictly increasing")
    if substeps < 1:
        raise InvalidArgumentError("substeps must be >= 1")

    states = np.empty((t.size, 3))
    x = np.asarray(x_init, dtype=float).reshape(3).copy()
    states[0] = x
    for i in range(1, t.size):
        h = (t[i] - t[i - 1]) / substeps
        for _ in range(substeps):
            x = _rk4_step(params, x, h)
        states[i] = x
    return Trajectory(t, states)


def default_grid(n_points: int = 100, t_end: float = 10.0) -> np.ndarray:
    return np.linspace(0.0, t_end, n_points)


def add_noise(traj: Trajectory, sigma: float, seed: int) -> NoisyDataset:
    """Perturb every state entry with independent N(0, sigma**2) draws."""
    if not sigma >= 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, size=traj.states.shape)
    noisy_states = traj.states + sigma * noise if sigma > 0 else traj.states.copy()
    return NoisyDataset(traj, Trajectory(traj.times.copy(), noisy_states), float(sigma), seed)


def split_train_test(ds: NoisyDataset, t_split: float = 8.0) -> tuple[NoisyDataset, NoisyDataset]:
    """Points with ``t < t_split`` go to train, the rest to test."""
    times = ds.times
    if not times[0] <= t_split <= times[-1]:
        raise InvalidArgumentError(f"t_split={t_split} outside [{times[0]}, {times[-1]}]")
    mask = times < t_split
    return ds.select(mask), ds.select(~mask)


def simulate_dataset(
    sigma: float,
    seed: int,
    params: PKParameters | None = None,
    x_init=DEFAULT_X_INIT,
    n_points: int = 100,
    t_end: float = 10.0,
) -> NoisyDataset:
    params = params or PKParameters()
    clean = integrate(params, x_init, default_grid(n_points, t_end))
    return add_noise(clean, sigma, seed)


# -- CSV ---------------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t",) + STATE_COLUMNS)
        for t, row in zip(traj.times, traj.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    times, states = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", *STATE_COLUMNS]:
            raise DataError(f"{path}:1: expected header t,x0,x1,x2, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                values = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            times.append(values[0])
            states.append(values[1:])
    if not times:
        raise DataError(f"{path}: no data rows")
    try:
        return Trajectory(np.array(times), np.array(states))
    except InvalidGridError as exc:
        raise DataError(f"{path}: {exc}") from exc


def noisy_filename(sigma: float) -> str:
    return f"noisy_{sigma:g}.csv"
