"""Seeded synthetic panels and ARIMA sample paths with known ground truth.

Panels are produced by running the integrated model forward on the
normalized-difference scale with fixed ground-truth parameters, adding
Gaussian noise there, and mapping back to integer counts. Every input the
model sees at month t is computed from the already-rounded counts, so with
zero noise the panel is reproduced by a one-step forecast with the true
parameters to within count rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .arima import is_invertible, is_stationary
from .data import AdjacencyGraph, PanelDataset, month_range
from .nnet import (
    CrossParams,
    LstmParams,
    LstmState,
    ModelParams,
    SeasonParams,
    cross_layer,
    forward,
    lstm_step,
)
from .rng import make_rng, normal, uniform
from .transform import FIRST_STEP, NormParams, TransformState, denormalize, fit_normalizer, normalize


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_regions: int = 5
    n_months: int = 69
    n_train: int = 51
    start: str = "2013-03"
    adjacency: str = "ring"
    noise: float = 0.1  # sigma on the generating normalized-difference scale
    seed: int = 0
    diff_span: float = 60.0  # counts covered by [0, 1] on the generating scale
    season_amp: float = 0.15  # std of the true g over months
    climate_amp: float = 0.1  # std of the true psi over the generated climate
    hidden: int = 8
    embed_dim: int = 4
    truth: tuple[ModelParams, ...] | None = None  # one per region; sampled when None

    def __post_init__(self):
        if self.n_regions < 1:
            raise SynthError("need at least one region")
        if not self.n_months > self.n_train >= 24:
            raise SynthError("need n_months > n_train >= 24")
        if self.noise < 0:
            raise SynthError("noise must be non-negative")
        if self.adjacency not in ("ring", "grid", "complete"):
            raise SynthError(f"unknown adjacency pattern {self.adjacency!r}")
        if self.truth is not None and len(self.truth) != self.n_regions:
            raise SynthError("truth must hold one parameter set per region")


@dataclass(frozen=True)
class GroundTruth:
    params: dict[str, ModelParams]
    state: TransformState  # the generating transform
    mean_counts: np.ndarray  # (R, T) noise-free one-step means, NaN before FIRST_STEP
    noise: np.ndarray  # (R, T) realized noise on the generating scale, 0 before FIRST_STEP
    sigma: float


def region_names(n: int) -> tuple[str, ...]:
    return tuple(f"R{i + 1:02d}" for i in range(n))


def make_graph(names, pattern: str) -> AdjacencyGraph:
    n = len(names)
    edges = []
    if pattern == "ring":
        if n == 2:
            edges = [(0, 1)]
        elif n > 2:
            edges = [(i, (i + 1) % n) for i in range(n)]
    elif pattern == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif pattern == "grid":
        cols = int(np.ceil(np.sqrt(n)))
        for i in range(n):
            if (i + 1) % cols and i + 1 < n:
                edges.append((i, i + 1))
            if i + cols < n:
                edges.append((i, i + cols))
    else:
        raise SynthError(f"unknown adjacency pattern {pattern!r}")
    return AdjacencyGraph.from_edges([(names[a], names[b]) for a, b in edges], names)


def gen_climate(rng, n_regions: int, months: np.ndarray) -> np.ndarray:
    """(R, T, 4) climate: annual temperature cycle and a two-peak rainfall cycle."""
    T = months.size
    out = np.empty((n_regions, T, 4))
    for r in range(n_regions):
        base = uniform(rng, 25.0, 29.0)
        phase = uniform(rng, 0.0, 12.0)
        rain_phase = uniform(rng, 0.0, 6.0)
        rain = uniform(rng, 120.0, 220.0)
        noise = normal(rng, (T, 4))
        tmean = base + 2.0 * np.sin(2 * np.pi * (months + phase) / 12) + 0.6 * noise[:, 0]
        out[r, :, 0] = tmean + 3.5 + 0.5 * np.abs(noise[:, 1])
        out[r, :, 1] = tmean - 3.5 - 0.5 * np.abs(noise[:, 2])
        out[r, :, 2] = tmean
        out[r, :, 3] = np.maximum(0.0, rain * (1.0 + 0.7 * np.sin(4 * np.pi * (months + rain_phase) / 12)) + 30.0 * noise[:, 3])
    return out


def sample_truth(rng, cfg: SynthConfig, v_norm: np.ndarray, degree: int) -> ModelParams:
    """Ground-truth parameters dominated by seasonality and climate.

    ``v_norm`` is this region's normalized climate (T, 4), used to scale the
    cross term to ``cfg.climate_amp`` and to centre the bias.
    """
    H, D = cfg.hidden, cfg.embed_dim
    alpha = uniform(rng, -0.4, -0.1)
    beta = uniform(rng, 0.0, 0.05)
    lstm = LstmParams(
        uniform(rng, -0.5, 0.5, (4 * H, 3)),
        uniform(rng, -0.5, 0.5, (4 * H, H)),
        uniform(rng, -0.5, 0.5, 4 * H),
        uniform(rng, -0.2, 0.2, H),
    )
    E = normal(rng, (12, D))
    E -= E.mean(axis=0)
    w_hat = normal(rng, D)
    g = E @ w_hat
    w_hat *= cfg.season_amp / g.std()
    W = normal(rng, (4, 4))
    w_tilde = normal(rng, 4)
    psi = np.array([cross_layer(CrossParams(W, w_tilde), v) for v in v_norm])
    w_tilde *= cfg.climate_amp / psi.std()
    psi_mean = psi.mean() * cfg.climate_amp / psi.std()
    b = 0.5 - alpha * 0.5 - beta * 0.5 * degree - psi_mean
    return ModelParams(float(alpha), float(beta), float(b), lstm, CrossParams(W, w_tilde), SeasonParams(E, w_hat))


def _round_count(x: float) -> int:
    return int(max(0.0, np.floor(x + 0.5)))


def gen_panel(cfg: SynthConfig) -> tuple[PanelDataset, GroundTruth]:
    rng = make_rng(cfg.seed)
    names = region_names(cfg.n_regions)
    graph = make_graph(names, cfg.adjacency)
    months = month_range(cfg.start, cfg.n_months)
    start_id = int(months[0][5:]) - 1
    T, R = cfg.n_months, cfg.n_regions
    month_ids = (start_id + np.arange(T)) % 12

    climate = gen_climate(rng, R, np.arange(T) + start_id)
    clim_norm = {
        r: tuple(fit_normalizer(climate[i, :, k], cfg.n_train) for k in range(4)) for i, r in enumerate(names)
    }
    v = np.stack([np.column_stack([normalize(climate[i, :, k], clim_norm[r][k]) for k in range(4)]) for i, r in enumerate(names)])
    nbrs = {r: graph.neighbors(r) for r in names}
    idx = {r: i for i, r in enumerate(names)}

    # always sampled so explicit truths leave the remaining draws unchanged
    truth = {r: sample_truth(rng, cfg, v[i], len(nbrs[r])) for i, r in enumerate(names)}
    if cfg.truth is not None:
        truth = dict(zip(names, cfg.truth))
    for r, p in truth.items():
        if p.variant != 2:
            raise SynthError(f"ground truth for {r} must be the integrated model")
    half = cfg.diff_span / 2
    norm = {r: NormParams(-half, half) for r in names}

    y = np.zeros((R, T))
    y[:, 0] = np.floor(uniform(rng, 150.0, 400.0, R))
    eps = normal(rng, (R, T))
    for i, r in enumerate(names):
        y[i, 1] = _round_count(y[i, 0] + denormalize(0.5 + cfg.noise * eps[i, 1], norm[r]))

    z = np.full((R, T), np.nan)
    mean = np.full((R, T), np.nan)
    noise = np.zeros((R, T))
    states = {r: LstmState.zeros(truth[r].hidden) for r in names}
    for t in range(FIRST_STEP, T):
        for i, r in enumerate(names):
            z[i, t - 1] = normalize(y[i, t - 1] - y[i, t - 2], norm[r])
        for i, r in enumerate(names):
            p = truth[r]
            ranked = sorted(nbrs[r], key=lambda n: (-y[idx[n], t - 1], n))[:3]
            x = np.zeros(3)
            for k, n in enumerate(ranked):
                x[k] = z[idx[n], t - 1]
            nb_sum = float(sum(z[idx[n], t - 1] for n in nbrs[r]))
            states[r] = lstm_step(p.lstm, x, states[r])
            f = float(p.lstm.w @ states[r].h)
            z_hat, _ = forward(p, z[i, t - 1], x, nb_sum, f, v[i, t], int(month_ids[t]))
            if not np.isfinite(z_hat):
                raise SynthError(f"dynamics diverged at month index {t} in region {r}")
            mean[i, t] = max(0.0, y[i, t - 1] + float(denormalize(z_hat, norm[r])))
            noise[i, t] = cfg.noise * eps[i, t]
            y[i, t] = _round_count(y[i, t - 1] + float(denormalize(z_hat + noise[i, t], norm[r])))

    cases = y.astype(np.int64)
    cases.setflags(write=False)
    climate.setflags(write=False)
    ds = PanelDataset(names, months, cases, climate, graph, cfg.n_train)
    state = TransformState({r: float(cases[idx[r], 0]) for r in names}, norm, clim_norm)
    return ds, GroundTruth(truth, state, mean, noise, cfg.noise)


def gen_arima_path(c: float, phi, theta, d: int, n: int, sigma: float, seed: int, burn: int = 100) -> np.ndarray:
    """Simulate ARMA(p, q) with Gaussian shocks after a burn-in, then integrate ``d`` times from 0."""
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if not is_stationary(phi):
        raise SynthError(f"AR coefficients {phi.tolist()} are not stationary")
    if not is_invertible(theta):
        raise SynthError(f"MA coefficients {theta.tolist()} are not invertible")
    if n < 50:
        raise SynthError("path length must be >= 50")
    if d < 0:
        raise SynthError("d must be >= 0")
    shocks = sigma * normal(make_rng(seed), n + burn)
    mu = c / (1.0 - phi.sum()) if phi.size else c
    z = mu + lfilter(np.concatenate([[1.0], theta]), np.concatenate([[1.0], -phi]), shocks)
    y = z[burn:]
    for _ in range(d):
        y = np.cumsum(y)
    return y


def write_panel(ds: PanelDataset, out_dir) -> dict[str, Path]:
    """Write ``cases.csv``, ``climate.csv`` and ``adjacency.csv`` in the loader formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"cases": out / "cases.csv", "climate": out / "climate.csv", "adjacency": out / "adjacency.csv"}
    with paths["cases"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "month", "cases"])
        for i, r in enumerate(ds.regions):
            for t, m in enumerate(ds.months):
                w.writerow([r, m, int(ds.cases[i, t])])
    with paths["climate"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "month", "tmax", "tmin", "tmean", "precip"])
        for i, r in enumerate(ds.regions):
            for t, m in enumerate(ds.months):
                w.writerow([r, m] + [repr(float(x)) for x in ds.climate[i, t]])
    with paths["adjacency"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_a", "region_b"])
        for a, b in sorted(ds.graph.edges):
            w.writerow([a, b])
        for r in sorted(ds.graph.nodes):
            if not ds.graph.neighbors(r):
                w.writerow([r, ""])
    return paths


def with_truth(cfg: SynthConfig, truth: GroundTruth) -> SynthConfig:
    """Config that regenerates the same panel from explicit ground-truth parameters."""
    return replace(cfg, truth=tuple(truth.params[r] for r in region_names(cfg.n_regions)))
