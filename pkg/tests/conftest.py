from dataclasses import dataclass

import pytest

from pkinn.cli import simulate_level, train_level
from pkinn.config import RunConfig
from pkinn.dynamics import NoisyDataset, split_train_test
from pkinn.model import PKINNModel


@dataclass
class DefaultRun:
    config: RunConfig
    dataset: NoisyDataset
    train: NoisyDataset
    test: NoisyDataset
    model: PKINNModel


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory):
    """Trained default-configuration models, one per noise level, built lazily."""
    root = tmp_path_factory.mktemp("default_runs")
    config = RunConfig(out=str(root))
    cache = {}

    def get(level):
        if level not in cache:
            ds, _ = simulate_level(config, level)
            model, _ = train_level(config, ds, root / level)
            train, test = split_train_test(ds, config.t_split)
            cache[level] = DefaultRun(config, ds, train, test, model)
        return cache[level]

    return get


_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
