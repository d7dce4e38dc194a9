import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import covariance_pearson, two_loop_mse

from pkinn.dynamics import NoisyDataset, PKParameters, Trajectory, default_grid, integrate, simulate_dataset, split_train_test
from pkinn.errors import ExportError, InsufficientDataError, InvalidArgumentError
from pkinn.evaluation import (
    RunArtifacts,
    compare_expressions,
    derivative_agreement,
    export_run,
    extrapolation_mse,
    is_linear,
    ls_slope,
    pearson,
)
from pkinn.model import PKINNModel, StateSpline, build_model, true_parameter_model
from pkinn.nn import NetworkSpec, zero_network
from pkinn.sr import X0, X1, X2, Expression, discover, simplify
from pkinn.sr.expression import add, const, mul, var

P = PKParameters()


def spline_model(n=1000):
    grid = default_grid(n)
    return true_parameter_model(P, StateSpline(grid, integrate(P, (1.0, 0.0, 0.0), grid).states))


def test_extrapolation_exact_prediction():
    model = spline_model()
    ds = simulate_dataset(0.0, 0)
    _, test = split_train_test(ds)
    report = extrapolation_mse(model, test)
    assert np.all(report.mse < 1e-12)


def test_extrapolation_offset_on_one_component():
    model = spline_model()
    clean = integrate(P, (1.0, 0.0, 0.0), default_grid())
    noisy = Trajectory(clean.times, model.states(clean.times) + [0.01, 0.0, 0.0])
    _, test = split_train_test(NoisyDataset(clean, noisy, 0.0))
    report = extrapolation_mse(model, test)
    assert report.mse == pytest.approx([1e-4, 0.0, 0.0], abs=1e-15)


def test_extrapolation_two_loop_oracle():
    model = build_model("blackbox", 3, x_hidden=(5,), f_hidden=(5,))
    _, test = split_train_test(simulate_dataset(0.02, 3))
    report = extrapolation_mse(model, test)
    pred = model.states(test.times)
    assert np.max(np.abs(report.mse - two_loop_mse(pred, test.noisy.states))) < 1e-12
    assert np.max(np.abs(report.mse_clean - two_loop_mse(pred, test.clean.states))) < 1e-12


def test_extrapolation_empty_test_set():
    ds = simulate_dataset(0.0, 0)
    with pytest.raises(InvalidArgumentError):
        extrapolation_mse(spline_model(), ds.select(np.zeros(len(ds), bool)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_pearson_matches_covariance_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=40)
    b = 0.3 * a + rng.normal(size=40)
    assert abs(pearson(a, b) - covariance_pearson(a, b)) < 1e-10


def test_pearson_and_slope_degenerate():
    assert pearson(np.ones(5), np.arange(5.0)) == 0.0
    assert ls_slope(np.arange(5.0), np.zeros(5)) == 0.0
    assert ls_slope(np.arange(5.0), 3 * np.arange(5.0) + 1) == pytest.approx(3.0)


def test_derivative_agreement_exact_solution():
    d = derivative_agreement(spline_model(), default_grid())
    assert np.all(d.pearson > 1 - 1e-6)
    assert np.allclose(d.slope, 1.0, atol=1e-3)


def test_derivative_agreement_zero_rhs():
    model = build_model("blackbox", 0, x_hidden=(5,), f_hidden=(5,))
    model = PKINNModel(model.x_net, zero_network(NetworkSpec(4, 3, (5,))))
    d = derivative_agreement(model, default_grid())
    assert np.array_equal(d.predicted, np.zeros_like(d.predicted))
    assert np.array_equal(d.slope, np.zeros(3))


def test_derivative_agreement_finite_difference_source():
    ds = simulate_dataset(0.0, 0, n_points=1000)
    d = derivative_agreement(spline_model(), ds.times, source="finite_difference", data=ds)
    assert np.all(d.pearson > 0.99)
    with pytest.raises(InvalidArgumentError):
        derivative_agreement(spline_model(), ds.times[:5], source="finite_difference", data=ds)


def test_derivative_agreement_needs_two_points():
    with pytest.raises(InsufficientDataError):
        derivative_agreement(spline_model(), [1.0])


# -- expression comparison ---------------------------------------------------------


def test_compare_exact_depot():
    (c,) = compare_expressions([-1.14 * X0])
    assert c.linear
    assert c.support == {"X0"}
    assert c.coefficient_deltas == {"X0": 0.0, "X1": 0.0, "X2": 0.0}
    assert c.match


def test_compare_wrong_support():
    out = compare_expressions([-1.14 * X0, X1, 0.2 * X0])
    assert out[2].support == {"X0"}
    assert out[2].true_support == {"X1", "X2"}
    assert not out[2].match


def test_compare_flags_quadratic():
    expr = Expression(mul(add(const(-0.6), var(0)), var(0)))
    (c,) = compare_expressions([expr])
    assert not c.linear


def test_is_linear_examples():
    assert is_linear(Expression.linear([1.0, -2.0, 0.5], 3.0))
    assert not is_linear(X1 * X2)


def test_compare_invariant_under_simplify():
    exprs = [X0 * (X1 - 1.5) + X0 * 0.0, (X2 + X2) * 2.0 - X1, Expression(mul(const(2.0), const(-0.5))) * X0]
    assert compare_expressions(exprs) == compare_expressions([simplify(e) for e in exprs])


# -- export -----------------------------------------------------------------------------


def test_export_empty_artifacts(tmp_path):
    files = export_run(RunArtifacts(), tmp_path)
    assert [f.name for f in files] == ["manifest.txt"]
    assert (tmp_path / "manifest.txt").read_text() == ""


def full_artifacts():
    model = build_model("parametric", 0, x_hidden=(6,))
    model.learnable_params = P.as_array()
    ds = simulate_dataset(0.005, 0)
    _, test = split_train_test(ds)
    return RunArtifacts(
        dataset=ds,
        model=model,
        extrapolation=extrapolation_mse(model, test),
        derivatives=derivative_agreement(model, ds.times),
        discoveries=[discover(model, ds.times, "stlsq")],
    )


def test_export_full_run_and_determinism(tmp_path):
    artifacts = full_artifacts()
    files = export_run(artifacts, tmp_path / "a")
    names = sorted(f.name for f in files)
    assert names == sorted(
        ["curves.csv", "derivatives_x0.csv", "derivatives_x1.csv", "derivatives_x2.csv", "extrapolation.csv", "discovery.txt", "manifest.txt"]
    )
    export_run(artifacts, tmp_path / "b")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = (tmp_path / "a" / "manifest.txt").read_text().splitlines()
    assert len(manifest) == 6
    assert [line.split()[-1] for line in manifest] == sorted(line.split()[-1] for line in manifest)


def test_export_curves_layout(tmp_path):
    export_run(full_artifacts(), tmp_path)
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "t"
    assert lines[0].split(",")[-1] == "split"
    assert len(lines) == 101
    assert sum(line.endswith(",test") for line in lines) == 20


def test_export_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError):
        export_run(full_artifacts(), blocker / "sub")
