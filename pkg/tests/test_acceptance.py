"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a ``[PASS]``/``[FAIL]`` line that is printed in the
terminal summary (see conftest.py) and asserts afterwards.
"""

import time

import numpy as np

from vbdcast.arima import fit, rolling_forecast as arima_rolling
from vbdcast.cli import gradcheck, main
from vbdcast.evaluation import EvalReport, EvalRow, arima_forecast, compare, mae, rmse, rolling_forecast
from vbdcast.nnet import CrossParams, cross_layer, init_params, season_term
from vbdcast.rng import make_rng
from vbdcast.synth import SynthConfig, gen_arima_path, gen_panel
from vbdcast.train import TrainConfig, train
from vbdcast.transform import denormalize, difference, fit_normalizer, fit_state, normalize, undifference

from conftest import ACCEPTANCE_LINES


def record(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_gradient_check():
    t0 = time.perf_counter()
    worst = 0.0
    passed = 0
    for seed in range(10):
        ok, errs = gradcheck(seed, tolerance=1e-4, hidden=8, embed_dim=4, length=20, eps=1e-5)
        passed += ok
        worst = max(worst, max(errs.values()))
    dt = time.perf_counter() - t0
    record(1, passed == 10 and dt < 60,
           f"gradient check {passed}/10 instances, worst max rel err {worst:.2e} (< 1e-4), {dt:.1f}s (< 60s)")


def test_criterion_2_transform_round_trips():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_d = worst_n = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 120))
        y = np.round(rng.uniform(0, 500) + np.cumsum(rng.normal(0, 30, n)))
        d = difference(y)
        worst_d = max(worst_d, float(np.max(np.abs(undifference(d.anchor, d.d) - y))))
        x = rng.normal(rng.normal(0, 50), rng.uniform(0.1, 100), n)
        p = fit_normalizer(x, int(rng.integers(2, n + 1)))
        worst_n = max(worst_n, float(np.max(np.abs(denormalize(normalize(x, p), p) - x))))
    dt = time.perf_counter() - t0
    record(2, worst_d <= 1e-9 and worst_n <= 1e-12 and dt < 5,
           f"undifference err {worst_d:.1e} (<= 1e-9), denormalize err {worst_n:.1e} (<= 1e-12), {dt:.2f}s (< 5s)")


def test_criterion_3_metric_identities():
    rng = np.random.default_rng(3)
    worst = 0.0
    order_ok = True
    for _ in range(1000):
        e = rng.normal(0, rng.uniform(0.1, 50), int(rng.integers(1, 60)))
        r, m = rmse(e), mae(e)
        order_ok &= r >= m
        worst = max(worst, abs((r * r - m * m) - float(np.var(np.abs(e)))))
    example = mae([3, 4]) == 3.5 and rmse([3, 4]) == np.sqrt(12.5)
    record(3, bool(order_ok) and worst <= 1e-9 and example,
           f"RMSE >= MAE on all 1000, |RMSE^2 - MAE^2 - Var|e|| max {worst:.1e} (<= 1e-9), e=[3,4] exact: {example}")


def test_criterion_4_cross_layer_expansion():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        W, v, wt = rng.normal(size=(4, 4)), rng.normal(size=4), rng.normal(size=4)
        expansion = sum(wt[i] * W[i, j] * v[i] * v[j] for i in range(4) for j in range(4))
        worst = max(worst, abs(cross_layer(CrossParams(W, wt), v) - expansion))
    v, wt = rng.normal(size=4), rng.normal(size=4)
    ident = abs(cross_layer(CrossParams(np.eye(4), wt), v) - float(wt @ (v * v))) <= 1e-12
    record(4, worst <= 1e-12 and ident, f"16-term expansion max err {worst:.1e} (<= 1e-12), identity W case: {ident}")


def test_criterion_5_seasonal_periodicity():
    ds, gt = gen_panel(SynthConfig(seed=5))
    p = init_params(2, 8, 4, make_rng(5), 0.5)
    ok = True
    for s in [p.season] + [gt.params[r].season for r in ds.regions]:
        g = [season_term(s, ds.month_id(t)) for t in range(ds.T)]
        ok &= all(g[t] == g[t + 12] for t in range(ds.T - 12))
    record(5, bool(ok) and ds.T == 69, f"g(t) == g(t+12) bit-identical over {ds.T} months for {len(ds.regions) + 1} embeddings")


def test_criterion_6_arima_recovery():
    t0 = time.perf_counter()
    phi, theta = np.array([0.5, -0.3]), 0.4
    good = []
    worst_rmse = 0.0
    for seed in range(10):
        y = gen_arima_path(0.0, phi, [theta], 1, 500, 1.0, seed=seed)
        m = fit(y, seed=seed)
        coef_ok = np.all(np.abs(m.phi - phi) <= 0.15) and abs(m.theta[0] - theta) <= 0.15
        held = fit(y[:300], seed=seed)
        r = rmse(arima_rolling(held, y, 300) - y[300:])
        worst_rmse = max(worst_rmse, abs(r - 1.0))
        good.append(bool(coef_ok) and abs(r - 1.0) <= 0.1)
    dt = time.perf_counter() - t0
    record(6, sum(good) >= 8 and dt < 30,
           f"ARIMA(2,1,1) recovered on {sum(good)}/10 seeds (>= 8), worst |RMSE - sigma| {worst_rmse:.3f}, {dt:.1f}s (< 30s)")


def test_criterion_7_end_to_end_ranking():
    t0 = time.perf_counter()
    beats_arima = np.zeros(5, dtype=int)
    beats_m1 = np.zeros(5, dtype=int)
    arima_rmse = []
    for seed in range(5):
        ds, _ = gen_panel(SynthConfig(seed=seed))
        st = fit_state(ds)
        for i, r in enumerate(ds.regions):
            f = {}
            for v in (1, 2):
                p, _ = train(ds, r, TrainConfig(variant=v, seed=seed), st)
                f[f"model{v}"] = rolling_forecast(p, st, ds, r)
            f["arima"] = arima_forecast(ds, r, seed=seed)[1]
            row = compare(ds, r, f)
            arima_rmse.append(row.rmse["arima"])
            beats_arima[i] += row.rmse["model2"] < row.rmse["arima"]
            beats_m1[i] += row.rmse["model2"] < row.rmse["model1"]
    dt = time.perf_counter() - t0
    n_arima = int(np.sum(beats_arima >= 3))
    n_m1 = int(np.sum(beats_m1 >= 3))
    record(7, n_arima >= 4 and n_m1 >= 3 and dt < 600,
           f"model (2) wins majority vote vs ARIMA in {n_arima}/5 regions (>= 4), vs model (1) in {n_m1}/5 (>= 3); "
           f"ARIMA RMSE median {np.median(arima_rmse):.1f}; {dt:.0f}s (< 600s)")


def test_criterion_8_report_golden_rows():
    rep = EvalReport((
        EvalRow.from_metrics("Matara", {"model1": 11.38, "model2": 11.36, "arima": 11.92},
                             {"model1": 8.91, "model2": 8.87, "arima": 9.40}),
        EvalRow.from_metrics("Kurunegala", {"model1": 22.10, "model2": 21.35, "arima": 22.40},
                             {"model1": 17.50, "model2": 16.80, "arima": 17.50}),
    ))
    rm = [l.split() for l in rep.table("rmse").splitlines()]
    ma = [l.split() for l in rep.table("mae").splitlines()]
    ok = rm[2] == ["Matara", "11.38", "11.36", "11.92", "(2)"] and ma[0] == ["MAE"] \
        and ma[3] == ["Kurunegala", "17.50", "16.80", "17.50", "(2)"]
    record(8, ok, "golden rows 'Matara 11.38 11.36 11.92' (RMSE) and 'Kurunegala 17.50 16.80 17.50' (MAE) with (2) flagged")


def test_criterion_9_reproducible_runs(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--seed", "9", "--out", str(data)]) == 0
    flags = ["--cases", str(data / "cases.csv"), "--climate", str(data / "climate.csv"),
             "--adjacency", str(data / "adjacency.csv"), "--split", "2017-05", "--seed", "9"]
    for k in range(2):
        assert main(["compare", "--train", "--out", str(tmp_path / f"run{k}")] + flags) == 0
    names = ["model1.ckpt", "model2.ckpt", "report.txt", "report.csv", "arima.txt"]
    same = [(tmp_path / "run0" / n).read_bytes() == (tmp_path / "run1" / n).read_bytes() for n in names]
    record(9, all(same), f"two identical train+compare runs byte-identical: {dict(zip(names, same))}")
