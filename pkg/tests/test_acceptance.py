"""Acceptance gate: each test checks one criterion at its stated tolerance and records a pass/fail line."""

import time

import numpy as np
from oracles import gradient_check, small_problem

from pkinn.cli import discovery_settings, main
from pkinn.dynamics import PKParameters, default_grid, integrate, rhs
from pkinn.evaluation import compare_expressions, derivative_agreement, extrapolation_mse, is_linear
from pkinn.model import loss_data
from pkinn.nn import forward, input_derivative
from pkinn.sr import CandidateLibrary, GPConfig, build_library, discover, gp_regress, simplify, stlsq

P = PKParameters()

REFERENCE_EXTRAPOLATION = {
    "low": (6.2e-5, 1.9e-5, 1.6e-4),
    "medium": (3.1e-5, 2.6e-4, 5.7e-4),
    "high": (7.1e-4, 1.7e-4, 5.3e-4),
}
PEARSON_FLOORS = {"low": (0.99, 0.99, 0.99), "medium": (0.99, 0.99, 0.99), "high": (0.95, 0.95, 0.90)}


def fmt(values):
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


def test_integrator_accuracy_and_order(record_criterion):
    start = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 101)
    err = np.max(np.abs(integrate(P, (1.0, 0.0, 0.0), grid).states[:, 0] - np.exp(-1.14 * grid)))
    errors = []
    for n in (11, 21, 41, 81):
        x = integrate(P, (1.0, 0.0, 0.0), np.linspace(0.0, 1.0, n), substeps=1).states[-1, 0]
        errors.append(abs(x - np.exp(-1.14)))
    order = np.polyfit(np.log([1 / 10, 1 / 20, 1 / 40, 1 / 80]), np.log(errors), 1)[0]
    elapsed = time.perf_counter() - start
    ok = err < 1e-6 and 3.7 <= order <= 4.3 and elapsed < 1.0
    assert record_criterion(1, ok, f"max error {err:.2e}, order {order:.3f}, {elapsed:.2f}s")


def test_mass_balance(record_criterion):
    start = time.perf_counter()
    states = np.random.default_rng(0).uniform(0.0, 2.0, size=(1000, 3))
    gap = np.max(np.abs(rhs(P, states).sum(axis=1) + (P.cl / P.v1) * states[:, 1]))
    elapsed = time.perf_counter() - start
    assert record_criterion(2, gap < 1e-12 and elapsed < 1.0, f"max gap {gap:.2e}, {elapsed:.2f}s")


def test_autodiff_against_finite_differences(record_criterion):
    start = time.perf_counter()
    worst_grad, worst_input = 0.0, 0.0
    ok = True
    for seed in range(20):
        model, data = small_problem(seed, ("blackbox", "parametric")[seed % 2])
        grads, numeric = gradient_check(model, data)
        for g, n in zip(grads, numeric):
            ok &= bool(np.allclose(g, n, rtol=1e-3, atol=1e-7))
            worst_grad = max(worst_grad, float(np.max(np.abs(g - n) / np.maximum(np.abs(n), 1e-4))))
        t, h = 0.37 + 0.1 * seed, 1e-5
        fd = (forward(model.x_net, t + h) - forward(model.x_net, t - h)) / (2 * h)
        exact = input_derivative(model.x_net, t)
        ok &= bool(np.allclose(exact, fd, rtol=1e-4, atol=1e-9))
        worst_input = max(worst_input, float(np.max(np.abs(exact - fd) / np.maximum(np.abs(fd), 1e-9))))
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30.0
    assert record_criterion(3, ok, f"worst relative gradient gap {worst_grad:.1e}, input derivative {worst_input:.1e}, {elapsed:.1f}s")


def test_training_reproduction(default_runs, record_criterion):
    lines, ok = [], True
    for level, reference in REFERENCE_EXTRAPOLATION.items():
        start = time.perf_counter()
        run = default_runs(level)
        mse = extrapolation_mse(run.model, run.test).mse
        train_mse = loss_data(run.model, run.train)
        elapsed = time.perf_counter() - start
        ref = np.array(reference)
        within = (mse <= 10 * ref) & (mse >= ref / 10)
        ok &= bool(np.all(within)) and elapsed < 600
        if level == "low":
            ok &= train_mse <= 1e-3
        lines.append(f"{level}: train {train_mse:.1e} extrap {fmt(mse)} vs {fmt(ref)} ({elapsed:.0f}s)")
    assert record_criterion(4, ok, "; ".join(lines))


def test_derivative_agreement(default_runs, record_criterion):
    lines, ok = [], True
    for level, floors in PEARSON_FLOORS.items():
        run = default_runs(level)
        r = derivative_agreement(run.model, run.dataset.times).pearson
        ok &= bool(np.all(r > np.array(floors)))
        lines.append(f"{level} r {fmt(r)}")
    assert record_criterion(5, ok, "; ".join(lines))


def test_stlsq_oracle_recovery(record_criterion):
    start = time.perf_counter()
    traj = integrate(P, (1.0, 0.0, 0.0), default_grid())
    library = CandidateLibrary(1)
    model = stlsq(build_library(traj.states, 1), rhs(P, traj.states), library=library)
    expected = {
        (0, "X0"): -1.14,
        (1, "X0"): 1.14,
        (1, "X1"): -10.3744,
        (1, "X2"): 0.39721,
        (2, "X1"): 2.5110,
        (2, "X2"): -0.39721,
    }
    ok = model.supports() == [{"X0"}, {"X0", "X1", "X2"}, {"X1", "X2"}]
    worst = 0.0
    for (k, name), value in expected.items():
        got = model.coefficients[k, library.names.index(name)]
        worst = max(worst, abs(got - value) / abs(value))
    elapsed = time.perf_counter() - start
    ok &= worst < 0.01 and elapsed < 5.0
    assert record_criterion(6, ok, f"supports {model.supports()}, worst relative error {worst:.1e}, {elapsed:.2f}s")


def test_gp_sanity_recovery(record_criterion):
    start = time.perf_counter()
    x = integrate(P, (1.0, 0.0, 0.0), default_grid()).states
    y = -1.14 * x[:, 0]
    found = []
    for seed in range(5):
        expr = gp_regress(x, y, GPConfig(seed=seed))
        mse = float(np.mean((expr.evaluate(x) - y) ** 2))
        poly = simplify(expr).polynomial()
        c = poly.get((1, 0, 0), np.nan)
        found.append(mse < 1e-4 and set(poly) == {(1, 0, 0)} and -1.25 <= c <= -1.05)
    elapsed = time.perf_counter() - start
    ok = sum(found) >= 4 and elapsed < 120
    assert record_criterion(7, ok, f"{sum(found)}/5 seeds give c*X0 in range, {elapsed:.0f}s")


def test_table_structure(default_runs, record_criterion):
    run = default_runs("low")
    settings = discovery_settings(run.config)
    results = {m: discover(run.model, run.train.times, m, settings) for m in ("stlsq", "gp")}
    stlsq_linear = all(is_linear(e) for e in results["stlsq"].expressions)
    flags = sum(not c.linear for res in results.values() for c in compare_expressions(res.expressions))
    ok = stlsq_linear and flags <= 1
    text = {m: [e.to_text() for e in r.expressions] for m, r in results.items()}
    assert record_criterion(8, ok, f"stlsq {text['stlsq']}, gp {text['gp']}, nonlinear flags {flags}")


def test_pipeline_determinism(tmp_path, record_criterion):
    start = time.perf_counter()
    for name in ("a", "b"):
        assert main(["pipeline", "--out", str(tmp_path / name)]) == 0
    elapsed = time.perf_counter() - start
    a, b = tmp_path / "a/low", tmp_path / "b/low"
    names = sorted(p.name for p in a.iterdir())
    same = names == sorted(p.name for p in b.iterdir())
    same &= all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    ok = same and elapsed < 2 * 600
    assert record_criterion(9, ok, f"{len(names)} files byte-identical: {same}, {elapsed:.0f}s for two runs")
