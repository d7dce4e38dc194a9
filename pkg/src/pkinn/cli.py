"""Command-line entry point: simulate, train, discover, evaluate, or run the whole pipeline.

Every command works per noise level inside ``<out>/<level>/``. The master
seed fans out into fixed per-stage seeds so each stage can be rerun alone.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from pathlib import Path

from .config import NOISE_LEVELS, RunConfig, load_config
from .dynamics import (
    NoisyDataset,
    PKParameters,
    add_noise,
    default_grid,
    integrate,
    noisy_filename,
    read_trajectory_csv,
    split_train_test,
    write_trajectory_csv,
)
from .errors import ConfigError, DataError, DivergedError, InvalidArgumentError, PKINNError
from .evaluation import RunArtifacts, derivative_agreement, export_run, extrapolation_mse
from .model import LossWeights, PKINNModel, TrainConfig, build_model, load_model, save_model, train, write_report_csv
from .sr.discover import DiscoverySettings, discover, write_report_csv as write_discovery_csv, write_report_text
from .sr.gp import GPConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4, 5

CLEAN_FILE = "clean.csv"
CHECKPOINT_FILE = "checkpoint.json"
TRAIN_REPORT_FILE = "train_report.csv"
CONFIG_ECHO_FILE = "config.txt"


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except (PKINNError, OSError) as exc:
        raise StageError(name, exc) from exc


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, DivergedError):
        return EXIT_DIVERGED
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (ConfigError, InvalidArgumentError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    return 1


# -- stage helpers -------------------------------------------------------------


def level_dir(config: RunConfig, level: str) -> Path:
    return Path(config.out) / level


def discovery_settings(config: RunConfig) -> DiscoverySettings:
    gp = GPConfig(
        population_size=config.gp_population,
        generations=config.gp_generations,
        parsimony=config.gp_parsimony,
        max_size=config.gp_max_size,
        seed=config.stage_seed("discover"),
    )
    return DiscoverySettings(config.degree, config.threshold, config.max_iter, config.ridge, config.target_source, gp)


def methods(config: RunConfig) -> list[str]:
    return ["stlsq", "gp"] if config.method == "both" else [config.method]


def simulate_level(config: RunConfig, level: str) -> tuple[NoisyDataset, list[Path]]:
    sigma = config.sigma(level)
    clean = integrate(PKParameters(), config.x_init, default_grid(config.n_points, config.t_end), config.substeps)
    ds = add_noise(clean, sigma, config.stage_seed("simulate"))
    out = level_dir(config, level)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_trajectory_csv(ds.clean, out / CLEAN_FILE), write_trajectory_csv(ds.noisy, out / noisy_filename(sigma))]
    return ds, files


def load_dataset(config: RunConfig, level: str, data_path=None) -> NoisyDataset:
    sigma = config.sigma(level)
    out = level_dir(config, level)
    noisy = read_trajectory_csv(data_path or out / noisy_filename(sigma))
    clean_path = out / CLEAN_FILE
    clean = read_trajectory_csv(clean_path) if clean_path.exists() else noisy
    try:
        return NoisyDataset(clean, noisy, sigma, config.stage_seed("simulate"))
    except InvalidArgumentError as exc:
        raise DataError(f"{clean_path}: {exc}") from exc


def train_level(config: RunConfig, ds: NoisyDataset, out: Path) -> tuple[PKINNModel, list[Path]]:
    train_set, _ = split_train_test(ds, config.t_split)
    weights = LossWeights(config.lambda_data, config.lambda_ode, config.lambda_ic)
    seed = config.stage_seed("train")
    model = build_model(config.mode, seed, config.x_hidden, config.f_hidden, weights)
    tcfg = TrainConfig(
        epochs=config.epochs,
        learning_rate=config.lr,
        seed=seed,
        initial_condition=config.x_init,
        mode=config.mode,
    )
    model, report = train(model, train_set, tcfg)
    out.mkdir(parents=True, exist_ok=True)
    files = [save_model(model, out / CHECKPOINT_FILE), write_report_csv(report, out / TRAIN_REPORT_FILE)]
    return model, files


def discover_level(config: RunConfig, model: PKINNModel, ds: NoisyDataset, out: Path):
    train_set, _ = split_train_test(ds, config.t_split)
    settings = discovery_settings(config)
    results = [discover(model, train_set.times, m, settings) for m in methods(config)]
    out.mkdir(parents=True, exist_ok=True)
    files = [
        write_report_text(results, out / "discovery.txt", config.precision),
        write_discovery_csv(results, out / "discovery.csv", config.precision),
    ]
    return results, files


def evaluate_level(config: RunConfig, model: PKINNModel, ds: NoisyDataset) -> RunArtifacts:
    _, test_set = split_train_test(ds, config.t_split)
    return RunArtifacts(
        dataset=ds,
        t_split=config.t_split,
        model=model,
        extrapolation=extrapolation_mse(model, test_set),
        derivatives=derivative_agreement(model, ds.times),
    )


def summary(level: str, artifacts: RunArtifacts) -> str:
    e, d = artifacts.extrapolation, artifacts.derivatives
    mse = " ".join(f"{v:.3g}" for v in e.mse)
    r = " ".join(f"{v:.4f}" for v in d.pearson)
    return f"{level}: extrapolation mse [{mse}]  derivative r [{r}]"


# -- commands ----------------------------------------------------------------


def cmd_simulate(config: RunConfig, args) -> list[Path]:
    written = []
    for level in config.levels():
        with stage("simulate"):
            _, files = simulate_level(config, level)
        written += files
        print(f"{level}: wrote {', '.join(f.name for f in files)} to {level_dir(config, level)}")
    return written


def cmd_train(config: RunConfig, args) -> list[Path]:
    written = []
    for level in config.levels():
        with stage("train"):
            ds = load_dataset(config, level, args.data)
            model, files = train_level(config, ds, level_dir(config, level))
        written += files
        params = ", ".join(f"{k}={v:.4g}" for k, v in model.params.items())
        print(f"{level}: trained {config.epochs} epochs ({config.mode}); {params}")
    return written


def _checkpoint(config: RunConfig, level: str, args) -> PKINNModel:
    return load_model(args.checkpoint or level_dir(config, level) / CHECKPOINT_FILE)


def cmd_discover(config: RunConfig, args) -> list[Path]:
    written = []
    for level in config.levels():
        with stage("discover"):
            model = _checkpoint(config, level, args)
            ds = load_dataset(config, level, args.data)
            results, files = discover_level(config, model, ds, level_dir(config, level))
        written += files
        for res in results:
            print(f"{level} [{res.method}]: " + "; ".join(e.to_text(config.precision) for e in res.expressions))
    return written


def cmd_evaluate(config: RunConfig, args) -> list[Path]:
    written = []
    for level in config.levels():
        with stage("evaluate"):
            model = _checkpoint(config, level, args)
            artifacts = evaluate_level(config, model, load_dataset(config, level, args.data))
        with stage("export"):
            written += export_run(artifacts, level_dir(config, level))
        print(summary(level, artifacts))
    return written


def run_pipeline(config: RunConfig, level: str) -> list[Path]:
    """All stages for one noise level; returns every file written, manifest last."""
    out = level_dir(config, level)
    with stage("simulate"):
        ds, files = simulate_level(config, level)
    with stage("train"):
        model, more = train_level(config, ds, out)
        files += more
    with stage("discover"):
        results, more = discover_level(config, model, ds, out)
        files += more
    with stage("evaluate"):
        artifacts = evaluate_level(config, model, ds)
        artifacts.discoveries = results
    with stage("export"):
        echo = out / CONFIG_ECHO_FILE
        # the output location is left out so identical runs echo identical bytes
        echo.write_text(config.replace(noise=level).to_text(include_out=False))
        files.append(echo)
        exported = export_run(artifacts, out, extra_files=files)
    print(summary(level, artifacts))
    return files + exported


def cmd_pipeline(config: RunConfig, args) -> list[Path]:
    written = []
    for level in config.levels():
        written += run_pipeline(config, level)
    return written


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "discover": cmd_discover,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file; flags override it")
    common.add_argument("--out", metavar="DIR", help="output root (default: runs)")
    common.add_argument("--seed", type=int, help="master seed (default: 0)")
    common.add_argument("--noise", choices=[*NOISE_LEVELS, "all"], help="noise level (default: low)")
    common.add_argument("--mode", choices=["blackbox", "parametric"], help="right-hand side model")
    common.add_argument("--epochs", type=int, help="training epochs (default: 1000)")
    common.add_argument("--lr", type=float, help="Adam learning rate (default: 0.01)")
    common.add_argument("--method", choices=["stlsq", "gp", "both"], help="discovery method (default: both)")

    parser = argparse.ArgumentParser(prog="pkinn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write clean and noisy trajectories")
    p = sub.add_parser("train", parents=[common], help="train on a noisy trajectory")
    p.add_argument("--data", metavar="CSV", help="noisy trajectory (default: <out>/<level>/noisy_<sigma>.csv)")
    for name, text in (("discover", "recover closed-form right-hand sides"), ("evaluate", "extrapolation and derivative checks")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--checkpoint", metavar="JSON", help="trained model (default: <out>/<level>/checkpoint.json)")
        p.add_argument("--data", metavar="CSV", help="noisy trajectory (default: <out>/<level>/noisy_<sigma>.csv)")
    sub.add_parser("pipeline", parents=[common], help="simulate, train, discover, evaluate and export")
    return parser


OVERRIDES = ("out", "seed", "noise", "mode", "epochs", "lr", "method")


def resolve_config(args) -> RunConfig:
    return load_config(args.config, {key: getattr(args, key) for key in OVERRIDES})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"pkinn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    explicit = getattr(args, "data", None) or getattr(args, "checkpoint", None)
    if explicit and len(config.levels()) > 1:
        print("pkinn: config error: --data and --checkpoint need a single noise level", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](config, args)
    except StageError as err:
        print(f"pkinn: stage {err.stage} failed: {err.cause}", file=sys.stderr)
        return exit_code(err.cause)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
