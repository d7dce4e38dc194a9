"""Closed-form recovery of the right-hand side components from a trained surrogate."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError
from ..model import PKINNModel, f_predict
from .expression import VAR_NAMES, Expression
from .gp import GPConfig, gp_search
from .sindy import CandidateLibrary, stlsq

METHODS = ("stlsq", "gp")
TARGET_SOURCES = ("f", "dxdt")


@dataclass(frozen=True)
class DiscoverySettings:
    degree: int = 1
    threshold: float = 0.1
    max_iter: int = 20
    ridge: float = 0.0
    target_source: str = "f"
    gp: GPConfig = field(default_factory=GPConfig)

    def __post_init__(self):
        if self.target_source not in TARGET_SOURCES:
            raise InvalidArgumentError(f"target_source must be one of {TARGET_SOURCES}")


@dataclass
class ComponentFit:
    expression: Expression
    mse: float

    @property
    def size(self) -> int:
        return self.expression.size

    def terms(self) -> dict[str, float]:
        """Coefficient of every monomial in the expanded expression."""
        out = {}
        for exps, c in sorted(self.expression.polynomial().items(), key=lambda kv: (-sum(kv[0]), [-e for e in kv[0]])):
            if c == 0.0:
                continue
            out[monomial_name(exps)] = c
        return out


@dataclass
class DiscoveryResult:
    method: str
    components: list[ComponentFit]

    @property
    def expressions(self) -> list[Expression]:
        return [c.expression for c in self.components]


def monomial_name(exps) -> str:
    parts = [VAR_NAMES[i] + (f"^{e}" if e > 1 else "") for i, e in enumerate(exps) if e]
    return "*".join(parts) or "1"


def sample_targets(model: PKINNModel, t_grid, target_source: str = "f") -> tuple[np.ndarray, np.ndarray]:
    """States from the state surrogate and regression targets on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    x = model.states(t).reshape(-1, 3)
    if target_source == "f":
        y = f_predict(model, t, x)
    elif target_source == "dxdt":
        y = model.state_derivatives(t).reshape(-1, 3)
    else:
        raise InvalidArgumentError(f"unknown target source {target_source!r}")
    return x, y


def discover(model: PKINNModel, t_grid, method: str = "stlsq", settings: DiscoverySettings | None = None) -> DiscoveryResult:
    settings = settings or DiscoverySettings()
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; expected one of {METHODS}")
    x, y = sample_targets(model, t_grid, settings.target_source)
    fits = []
    if method == "stlsq":
        library = CandidateLibrary(settings.degree)
        sparse = stlsq(library.evaluate(x), y, settings.threshold, settings.max_iter, settings.ridge, library)
        for k, expr in enumerate(sparse.expressions()):
            err = expr.evaluate(x) - y[:, k]
            fits.append(ComponentFit(expr, float(np.mean(err * err))))
    else:
        for k in range(3):
            res = gp_search(x, y[:, k], settings.gp)
            fits.append(ComponentFit(res.best.simplify(), res.mse))
    return DiscoveryResult(method, fits)


# -- reports -----------------------------------------------------------------


def format_report(results: list[DiscoveryResult], precision: int = 1) -> str:
    lines = []
    for res in results:
        lines.append(f"[{res.method}]")
        for k, fit in enumerate(res.components):
            lines.append(f"  f{k + 1} = {fit.expression.to_text(precision)}")
            terms = ", ".join(f"{name}: {c!r}" for name, c in fit.terms().items()) or "none"
            lines.append(f"      terms: {terms}")
            lines.append(f"      mse: {fit.mse!r}  size: {fit.size}")
    return "\n".join(lines) + "\n"


def write_report_text(results: list[DiscoveryResult], path, precision: int = 1) -> Path:
    path = Path(path)
    path.write_text(format_report(results, precision))
    return path


def write_report_csv(results: list[DiscoveryResult], path, precision: int = 1) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "component", "expression", "terms", "mse", "size"])
        for res in results:
            for k, fit in enumerate(res.components):
                terms = ";".join(f"{name}={c!r}" for name, c in fit.terms().items())
                writer.writerow([res.method, f"f{k + 1}", fit.expression.to_text(precision), terms, repr(fit.mse), fit.size])
    return path
