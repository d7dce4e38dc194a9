import json

import numpy as np
import pytest

from pkinn.cli import EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_IO, main
from pkinn.config import NOISE_LEVELS, RunConfig, load_config, parse_config_text
from pkinn.dynamics import PKParameters
from pkinn.errors import ConfigError
from pkinn.model import build_model, save_model

FAST = "epochs = 3\nx_hidden = 6,6\nf_hidden = 6,6\ngp_population = 30\ngp_generations = 4\n"


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.txt"
    path.write_text("# quick settings for tests\n" + FAST)
    return str(path)


def run(*args):
    return main([str(a) for a in args])


# -- configuration ---------------------------------------------------------------


def test_defaults_match_reference_setup():
    c = RunConfig()
    assert (c.epochs, c.lr) == (1000, 0.01)
    assert (c.lambda_data, c.lambda_ode, c.lambda_ic) == (1.0, 2.0, 1.0)
    assert c.x_hidden == (100, 100)
    assert c.f_hidden == (100, 100, 100)
    assert c.t_split == 8.0
    assert c.x_init == (1.0, 0.0, 0.0)
    assert NOISE_LEVELS == {"low": 0.005, "medium": 0.01, "high": 0.02}


def test_config_text_parsing():
    values = parse_config_text("# comment\n\nx_init = 2, 0, 0\nnoise_as_variance = true\nepochs=7\n")
    assert values == {"x_init": (2.0, 0.0, 0.0), "noise_as_variance": True, "epochs": 7}


def test_config_errors_carry_line():
    with pytest.raises(ConfigError, match=":2"):
        parse_config_text("epochs = 3\nepochs = many\n")
    with pytest.raises(ConfigError, match="unknown"):
        parse_config_text("colour = red\n")
    with pytest.raises(ConfigError, match=":1"):
        parse_config_text("just words\n")


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("epochs = 10\nseed = 4\n")
    config = load_config(path, {"epochs": 2, "seed": None})
    assert config.epochs == 2
    assert config.seed == 4


def test_config_echo_round_trip(tmp_path):
    config = RunConfig(noise="high", noise_as_variance=True, x_hidden=(3, 4), ridge=1e-6, seed=9)
    path = tmp_path / "echo.txt"
    path.write_text(config.to_text())
    assert load_config(path) == config
    assert config.sigma("high") == pytest.approx(0.02**0.5)


# -- commands ---------------------------------------------------------------------


def test_simulate_default(tmp_path):
    assert run("simulate", "--out", tmp_path) == 0
    files = sorted(p.name for p in (tmp_path / "low").iterdir())
    assert files == ["clean.csv", "noisy_0.005.csv"]
    for name in files:
        assert len((tmp_path / "low" / name).read_text().splitlines()) == 101


def test_simulate_all_levels(tmp_path):
    assert run("simulate", "--out", tmp_path, "--noise", "all") == 0
    noisy = sorted(p.name for p in tmp_path.glob("*/noisy_*.csv"))
    assert noisy == ["noisy_0.005.csv", "noisy_0.01.csv", "noisy_0.02.csv"]


def test_simulate_repeatable(tmp_path):
    run("simulate", "--out", tmp_path / "a", "--seed", 3)
    run("simulate", "--out", tmp_path / "b", "--seed", 3)
    for name in ("clean.csv", "noisy_0.005.csv"):
        assert (tmp_path / "a/low" / name).read_bytes() == (tmp_path / "b/low" / name).read_bytes()


def test_train_default_epochs(tmp_path):
    run("simulate", "--out", tmp_path)
    assert run("train", "--out", tmp_path) == 0
    assert len((tmp_path / "low/train_report.csv").read_text().splitlines()) == 1001


def test_train_single_epoch(tmp_path, fast_config):
    run("simulate", "--out", tmp_path)
    assert run("train", "--config", fast_config, "--out", tmp_path, "--epochs", 1) == 0
    assert len((tmp_path / "low/train_report.csv").read_text().splitlines()) == 2


def test_train_parametric_checkpoint(tmp_path, fast_config):
    run("simulate", "--out", tmp_path)
    assert run("train", "--config", fast_config, "--out", tmp_path, "--mode", "parametric") == 0
    data = json.loads((tmp_path / "low/checkpoint.json").read_text())
    assert data["mode"] == "parametric"
    assert sorted(data["learnable_params"]) == ["cl", "ka", "q", "v1", "v2"]


def test_discover_exact_checkpoint(tmp_path, capsys):
    run("simulate", "--out", tmp_path)
    model = build_model("parametric", 0, x_hidden=(8, 8))
    model.learnable_params = PKParameters().as_array()
    ck = save_model(model, tmp_path / "exact.json")
    assert run("discover", "--out", tmp_path, "--checkpoint", ck, "--method", "stlsq") == 0
    text = (tmp_path / "low/discovery.txt").read_text()
    assert "f1 = -1.1*X0" in text
    rows = (tmp_path / "low/discovery.csv").read_text().splitlines()[1:]
    supports = [{t.split("=")[0] for t in row.split(",")[3].split(";")} for row in rows]
    assert supports == [{"X0"}, {"X0", "X1", "X2"}, {"X1", "X2"}]


def test_discover_gp_repeatable(tmp_path, fast_config):
    run("pipeline", "--config", fast_config, "--out", tmp_path, "--method", "stlsq")
    reports = []
    for _ in range(2):
        assert run("discover", "--config", fast_config, "--out", tmp_path, "--method", "gp", "--seed", 1) == 0
        reports.append((tmp_path / "low/discovery.txt").read_bytes())
    assert reports[0] == reports[1]


def test_discover_both_methods(tmp_path, fast_config):
    assert run("pipeline", "--config", fast_config, "--out", tmp_path) == 0
    text = (tmp_path / "low/discovery.txt").read_text()
    assert text.count(" = ") == 6
    assert "[stlsq]" in text and "[gp]" in text


def test_pipeline_layout(tmp_path, fast_config):
    assert run("pipeline", "--config", fast_config, "--out", tmp_path) == 0
    names = {p.name for p in (tmp_path / "low").iterdir()}
    assert names == {
        "clean.csv",
        "noisy_0.005.csv",
        "checkpoint.json",
        "train_report.csv",
        "discovery.txt",
        "discovery.csv",
        "curves.csv",
        "derivatives_x0.csv",
        "derivatives_x1.csv",
        "derivatives_x2.csv",
        "extrapolation.csv",
        "config.txt",
        "manifest.txt",
    }
    listed = {line.split()[-1] for line in (tmp_path / "low/manifest.txt").read_text().splitlines()}
    assert listed == names - {"manifest.txt"}


def test_pipeline_all_levels(tmp_path, fast_config):
    assert run("pipeline", "--config", fast_config, "--out", tmp_path, "--noise", "all", "--method", "stlsq") == 0
    assert sorted(p.name for p in tmp_path.iterdir() if p.is_dir()) == ["high", "low", "medium"]
    assert (tmp_path / "high/noisy_0.02.csv").exists()


def test_pipeline_repeatable_and_replayable(tmp_path, fast_config):
    run("pipeline", "--config", fast_config, "--out", tmp_path / "a")
    run("pipeline", "--config", fast_config, "--out", tmp_path / "b")
    assert (tmp_path / "a/low/manifest.txt").read_bytes() == (tmp_path / "b/low/manifest.txt").read_bytes()
    echo = tmp_path / "a/low/config.txt"
    assert run("pipeline", "--config", echo, "--out", tmp_path / "c") == 0
    for path in (tmp_path / "a/low").iterdir():
        assert (tmp_path / "c/low" / path.name).read_bytes() == path.read_bytes()


def test_evaluate_command(tmp_path, fast_config, capsys):
    run("pipeline", "--config", fast_config, "--out", tmp_path, "--method", "stlsq")
    (tmp_path / "low/curves.csv").unlink()
    assert run("evaluate", "--config", fast_config, "--out", tmp_path) == 0
    assert (tmp_path / "low/curves.csv").exists()
    assert "derivative r" in capsys.readouterr().out


# -- exit codes ---------------------------------------------------------------------


def test_exit_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("epochs = lots\n")
    assert run("simulate", "--config", bad) == EXIT_CONFIG
    assert "bad.txt:1" in capsys.readouterr().err
    assert run("simulate", "--config", tmp_path / "missing.txt") == EXIT_CONFIG


def test_exit_data_error(tmp_path, capsys):
    path = tmp_path / "broken.csv"
    path.write_text("t,x0,x1,x2\n0,1,0,0\n0.1,1,0\n")
    assert run("train", "--out", tmp_path, "--data", path, "--epochs", 1) == EXIT_DATA
    err = capsys.readouterr().err
    assert "stage train" in err and "broken.csv:3" in err


def test_exit_divergence(tmp_path, capsys):
    path = tmp_path / "nan.csv"
    rows = ["t,x0,x1,x2"] + [f"{t},{np.exp(-t)},nan,0" for t in np.linspace(0, 10, 20)]
    path.write_text("\n".join(rows) + "\n")
    assert run("train", "--out", tmp_path, "--data", path, "--epochs", 2) == EXIT_DIVERGED
    assert "epoch 0" in capsys.readouterr().err


def test_exit_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("simulate", "--out", blocker) == EXIT_IO
    assert "stage simulate" in capsys.readouterr().err
