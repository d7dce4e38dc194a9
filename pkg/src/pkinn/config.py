"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Lines starting with ``#`` are comments. Tuples are comma separated
(``x_init = 1,0,0``). Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

NOISE_LEVELS = {"low": 0.005, "medium": 0.01, "high": 0.02}

# offsets added to the master seed, one per stage
SEED_OFFSETS = {"simulate": 0, "train": 1, "discover": 2}


@dataclass(frozen=True)
class RunConfig:
    # data
    noise: str = "low"
    noise_as_variance: bool = False
    n_points: int = 100
    t_end: float = 10.0
    t_split: float = 8.0
    x_init: tuple[float, ...] = (1.0, 0.0, 0.0)
    substeps: int = 10
    # training
    mode: str = "blackbox"
    epochs: int = 1000
    lr: float = 1e-2
    lambda_data: float = 1.0
    lambda_ode: float = 2.0
    lambda_ic: float = 1.0
    x_hidden: tuple[int, ...] = (100, 100)
    f_hidden: tuple[int, ...] = (100, 100, 100)
    # discovery
    method: str = "both"
    degree: int = 1
    threshold: float = 0.1
    max_iter: int = 20
    ridge: float = 0.0
    target_source: str = "f"
    gp_population: int = 200
    gp_generations: int = 100
    gp_parsimony: float = 1e-3
    gp_max_size: int = 25
    precision: int = 1
    # run
    seed: int = 0
    out: str = "runs"

    def __post_init__(self):
        if self.noise not in (*NOISE_LEVELS, "all"):
            raise ConfigError(f"noise must be one of low, medium, high, all; got {self.noise!r}")
        if self.mode not in ("blackbox", "parametric"):
            raise ConfigError(f"mode must be blackbox or parametric; got {self.mode!r}")
        if self.method not in ("stlsq", "gp", "both"):
            raise ConfigError(f"method must be stlsq, gp or both; got {self.method!r}")
        if self.target_source not in ("f", "dxdt"):
            raise ConfigError(f"target_source must be f or dxdt; got {self.target_source!r}")
        if self.epochs < 1 or self.lr <= 0 or self.n_points < 2:
            raise ConfigError("epochs and n_points must be positive and lr > 0")
        if len(self.x_init) != 3:
            raise ConfigError("x_init needs three components")

    def levels(self) -> list[str]:
        return list(NOISE_LEVELS) if self.noise == "all" else [self.noise]

    def sigma(self, level: str) -> float:
        """Noise standard deviation for ``level``; a variance reading takes the square root."""
        value = NOISE_LEVELS[level]
        return value**0.5 if self.noise_as_variance else value

    def stage_seed(self, stage: str) -> int:
        return self.seed + SEED_OFFSETS[stage]

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_text(self, include_out: bool = True) -> str:
        lines = []
        for f in fields(self):
            if f.name == "out" and not include_out:
                continue
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _field_types() -> dict[str, type]:
    defaults = RunConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(RunConfig)}


def _elem_type(name: str) -> type:
    return type(getattr(RunConfig(), name)[0])


def coerce(name: str, raw) -> object:
    types = _field_types()
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind is tuple:
            elem = _elem_type(name)
            return tuple(elem(v) for v in text.split(",") if v.strip())
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            values[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        values.update(parse_config_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = coerce(key, value)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
