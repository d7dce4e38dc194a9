"""Extrapolation error, derivative agreement, expression comparison and run export."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import NoisyDataset, PKParameters
from .errors import ExportError, InsufficientDataError, InvalidArgumentError
from .model import PKINNModel, f_predict, predict
from .sr.discover import DiscoveryResult, format_report
from .sr.expression import VAR_NAMES, Expression

MANIFEST = "manifest.txt"


@dataclass(frozen=True)
class ExtrapolationReport:
    mse: np.ndarray  # against the noisy test data, per component
    mse_clean: np.ndarray
    noise_sigma: float
    seed: int | None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.mse)) and np.all(self.mse >= 0)):
            raise InvalidArgumentError("MSE values must be finite and nonnegative")


def extrapolation_mse(model: PKINNModel, test: NoisyDataset) -> ExtrapolationReport:
    if len(test) == 0:
        raise InvalidArgumentError("test set is empty")
    pred = predict(model, test.times).states
    mse = np.mean((pred - test.noisy.states) ** 2, axis=0)
    mse_clean = np.mean((pred - test.clean.states) ** 2, axis=0)
    return ExtrapolationReport(mse, mse_clean, test.noise_sigma, test.seed)


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either side has no variance."""
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.sum(a * b) / denom, -1.0, 1.0))


def ls_slope(x, y) -> float:
    """Least-squares slope of ``y`` regressed on ``x`` (with intercept)."""
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    sxx = np.sum(x * x)
    return 0.0 if sxx == 0.0 else float(np.sum(x * y) / sxx)


@dataclass(frozen=True)
class DerivativeAgreement:
    times: np.ndarray
    calculated: np.ndarray  # (n, 3) dX/dt of the state surrogate
    predicted: np.ndarray  # (n, 3) right-hand side prediction
    pearson: np.ndarray
    slope: np.ndarray


def derivative_agreement(
    model: PKINNModel, t_grid, source: str = "autodiff", data: NoisyDataset | None = None
) -> DerivativeAgreement:
    """Pair the surrogate's time derivative with the predicted right-hand side on ``t_grid``.

    ``source="finite_difference"`` takes the calculated side from central
    differences of ``data.noisy`` instead (``t_grid`` must then equal the data grid).
    """
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    if t.size < 2:
        raise InsufficientDataError("derivative agreement needs at least 2 time points")
    x = model.states(t).reshape(-1, 3)
    if source == "autodiff":
        calc = model.state_derivatives(t).reshape(-1, 3)
    elif source == "finite_difference":
        if data is None or not np.array_equal(data.times, t):
            raise InvalidArgumentError("finite-difference derivatives need data on the same grid")
        calc = np.gradient(data.noisy.states, t, axis=0)
    else:
        raise InvalidArgumentError(f"unknown derivative source {source!r}")
    pred = f_predict(model, t, x)
    r = np.array([pearson(calc[:, i], pred[:, i]) for i in range(3)])
    s = np.array([ls_slope(calc[:, i], pred[:, i]) for i in range(3)])
    return DerivativeAgreement(t, calc, pred, r, s)


# -- structural comparison -----------------------------------------------------


@dataclass(frozen=True)
class ComponentComparison:
    component: int
    linear: bool
    support: frozenset[str]
    true_support: frozenset[str]
    coefficient_deltas: dict[str, float]
    intercept: float

    @property
    def match(self) -> bool:
        return self.support == self.true_support


def is_linear(expr: Expression, n_points: int = 5, tol: float = 1e-8, seed: int = 0) -> bool:
    """Second differences with unit steps vanish everywhere iff the polynomial has degree <= 1."""
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n_points, 3))
    eye = np.eye(3)
    f0 = expr.evaluate(base)
    for i in range(3):
        fi = expr.evaluate(base + eye[i])
        for j in range(i, 3):
            fj = expr.evaluate(base + eye[j])
            fij = expr.evaluate(base + eye[i] + eye[j])
            if np.max(np.abs(fij - fi - fj + f0)) > tol:
                return False
    return True


def _support(expr: Expression) -> frozenset[str]:
    poly = expr.polynomial()
    scale = max([abs(c) for c in poly.values()] + [1.0])
    present = set()
    for exps, c in poly.items():
        if abs(c) > 1e-12 * scale:
            present.update(VAR_NAMES[i] for i, e in enumerate(exps) if e)
    return frozenset(present)


def compare_expressions(recovered, truth: PKParameters | None = None) -> list[ComponentComparison]:
    truth = truth or PKParameters()
    a = truth.rate_matrix()
    out = []
    for k, expr in enumerate(recovered):
        poly = expr.polynomial()
        deltas = {}
        for i, name in enumerate(VAR_NAMES):
            exps = tuple(1 if j == i else 0 for j in range(3))
            deltas[name] = float(poly.get(exps, 0.0) - a[k, i])
        true_support = frozenset(VAR_NAMES[i] for i in range(3) if a[k, i] != 0.0)
        out.append(
            ComponentComparison(
                component=k,
                linear=is_linear(expr),
                support=_support(expr),
                true_support=true_support,
                coefficient_deltas=deltas,
                intercept=float(poly.get((0, 0, 0), 0.0)),
            )
        )
    return out


# -- export --------------------------------------------------------------------


@dataclass
class RunArtifacts:
    dataset: NoisyDataset | None = None
    t_split: float = 8.0
    model: PKINNModel | None = None
    extrapolation: ExtrapolationReport | None = None
    derivatives: DerivativeAgreement | None = None
    discoveries: list[DiscoveryResult] = field(default_factory=list)


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_manifest(directory, files) -> Path:
    """``sha256  size  relative/path`` per file, sorted by path."""
    directory = Path(directory)
    lines = []
    for path in sorted({Path(f).resolve() for f in files}):
        rel = path.relative_to(directory.resolve()).as_posix()
        if rel == MANIFEST:
            continue
        data = path.read_bytes()
        lines.append(f"{hashlib.sha256(data).hexdigest()}  {len(data)}  {rel}")
    manifest = directory / MANIFEST
    manifest.write_text("".join(line + "\n" for line in lines))
    return manifest


def export_run(artifacts: RunArtifacts, directory, extra_files=()) -> list[Path]:
    """Write plot-ready CSVs and reports into ``directory`` plus a manifest listing them."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        if artifacts.dataset is not None and artifacts.model is not None:
            ds = artifacts.dataset
            pred = predict(artifacts.model, ds.times).states
            rows = []
            for i, t in enumerate(ds.times):
                split = "train" if t < artifacts.t_split else "test"
                rows.append(
                    [_fmt(t)]
                    + [_fmt(v) for v in ds.clean.states[i]]
                    + [_fmt(v) for v in ds.noisy.states[i]]
                    + [_fmt(v) for v in pred[i]]
                    + [split]
                )
            header = ["t"] + [f"x{i}_{kind}" for kind in ("clean", "noisy", "pred") for i in range(3)] + ["split"]
            written.append(_write_csv(directory / "curves.csv", header, rows))
        if artifacts.derivatives is not None:
            d = artifacts.derivatives
            for i in range(3):
                rows = [[_fmt(t), _fmt(c), _fmt(p)] for t, c, p in zip(d.times, d.calculated[:, i], d.predicted[:, i])]
                written.append(_write_csv(directory / f"derivatives_x{i}.csv", ["t", "calculated", "predicted"], rows))
        if artifacts.extrapolation is not None:
            e = artifacts.extrapolation
            rows = [[f"x{i}", _fmt(e.mse[i]), _fmt(e.mse_clean[i]), _fmt(e.noise_sigma)] for i in range(3)]
            written.append(_write_csv(directory / "extrapolation.csv", ["component", "mse", "mse_clean", "noise_sigma"], rows))
        if artifacts.discoveries:
            path = directory / "discovery.txt"
            path.write_text(format_report(artifacts.discoveries))
            written.append(path)
        manifest = write_manifest(directory, written + [Path(f) for f in extra_files])
    except OSError as exc:
        raise ExportError(f"export to {directory} failed: {exc.filename or directory}: {exc.strerror}") from exc
    return written + [manifest]
