"""Loss, backpropagation through time, a finite-difference oracle, Adam, training."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import PanelDataset
from .nnet import ModelParams, forward_sequence, init_params
from .rng import make_rng, uniform
from .transform import RegionSequence, TransformState, region_sequence

CLIMATE_SEASON_TENSORS = ("cross.W", "cross.w_tilde", "season.E", "season.w_hat")


class TrainingError(RuntimeError):
    """Non-finite values during training."""


def loss(preds, targets) -> float:
    """Sum of squared errors (not averaged)."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.ndim != 1 or preds.size == 0:
        raise ValueError(f"loss needs equal non-empty 1-d vectors, got {preds.shape} and {targets.shape}")
    r = preds - targets
    return float(r @ r)


def sequence_loss(p: ModelParams, seq: RegionSequence) -> float:
    return loss(forward_sequence(p, seq).y_hat, seq.target)


def backward(p: ModelParams, seq: RegionSequence) -> tuple[float, dict[str, np.ndarray]]:
    """Loss over ``seq`` and its exact gradient with respect to every tensor of ``p``.

    The ReLU derivative at exactly zero is taken as 0.
    """
    tr = forward_sequence(p, seq)
    bad = np.flatnonzero(~np.isfinite(tr.a))
    if bad.size:
        raise TrainingError(f"non-finite pre-activation at step {int(bad[0])} (month index {int(seq.t[bad[0]])})")
    resid = tr.y_hat - seq.target
    L = float(resid @ resid)
    da = np.where(tr.a > 0.0, 2.0 * resid, 0.0)

    g = {
        "alpha": np.asarray(da @ seq.own_prev),
        "beta": np.asarray(da @ seq.nb_sum),
        "b": np.asarray(da.sum()),
    }

    lp = p.lstm
    H = lp.hidden
    hs, cs, gates = tr.lstm.h, tr.lstm.c, tr.lstm.gates
    n = len(seq)
    g["lstm.w"] = hs.T @ da
    dh_out = np.outer(da, lp.w)
    tanh_c = np.tanh(cs)
    c_prev = np.vstack([np.zeros((1, H)), cs[:-1]])
    dz = np.empty((n, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    UT = lp.U.T
    for t in range(n - 1, -1, -1):
        act = gates[t]
        i, f, gg, o = act[:H], act[H:2 * H], act[2 * H:3 * H], act[3 * H:]
        dh = dh_out[t] + dh_next
        tc = tanh_c[t]
        dc = dc_next + dh * o * (1.0 - tc * tc)
        row = dz[t]
        row[:H] = dc * gg * i * (1.0 - i)
        row[H:2 * H] = dc * c_prev[t] * f * (1.0 - f)
        row[2 * H:3 * H] = dc * i * (1.0 - gg * gg)
        row[3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = UT @ row
    h_prev = np.vstack([np.zeros((1, H)), hs[:-1]])
    g["lstm.W"] = dz.T @ seq.nb_top
    g["lstm.U"] = dz.T @ h_prev
    g["lstm.b"] = dz.sum(axis=0)

    if p.variant == 2:
        V = seq.climate
        g["cross.W"] = (da[:, None] * V * p.cross.w_tilde).T @ V
        g["cross.w_tilde"] = (da[:, None] * tr.cross_q * V).sum(axis=0)
        E = p.season.E
        g["season.w_hat"] = E[seq.month_id].T @ da
        dE = np.zeros_like(E)
        np.add.at(dE, seq.month_id, np.outer(da, p.season.w_hat))
        g["season.E"] = dE

    return L, {k: g[k] for k in p.tensors()}


def central_difference(f: Callable[[np.ndarray], float], theta, eps: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    if not eps > 0:
        raise ValueError("finite-difference step must be positive")
    theta = np.array(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    flat = theta.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        up = f(theta)
        flat[k] = orig - eps
        down = f(theta)
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * eps)
    return grad


def finite_diff_grad(p: ModelParams, seq: RegionSequence, eps: float = 1e-5) -> dict[str, np.ndarray]:
    if not eps > 0:
        raise ValueError("finite-difference step must be positive")
    base = {k: v.copy() for k, v in p.tensors().items()}
    out = {}
    for name in base:
        def f(theta, name=name):
            return sequence_loss(ModelParams.from_tensors({**base, name: theta}), seq)

        out[name] = central_difference(f, base[name], eps)
    return out


def max_relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over the entries of one tensor."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def random_instance(seed: int, hidden: int = 8, embed_dim: int = 4, length: int = 20, variant: int = 2):
    """A random parameter set and input sequence for gradient checks.

    Inputs and targets live on the unit interval like normalized data; the
    bias is redrawn until no pre-activation sits near the ReLU kink.
    """
    rng = make_rng(seed)
    p = init_params(variant, hidden, embed_dim, rng, scale=0.5)
    seq = RegionSequence(
        region="random",
        t=np.arange(2, 2 + length),
        own_prev=uniform(rng, 0, 1, length),
        nb_top=uniform(rng, 0, 1, (length, 3)),
        nb_sum=uniform(rng, 0, 2, length),
        climate=uniform(rng, 0, 1, (length, 4)),
        month_id=(np.arange(length) + int(rng.integers(12))) % 12,
        target=uniform(rng, 0, 1, length),
        prev_count=np.zeros(length),
    )
    p = replace(p, alpha=float(uniform(rng, -1, 1)))
    # centre the bias so roughly half the steps are active, then nudge away from the kink
    a0 = forward_sequence(p, seq).a - p.b
    p = replace(p, b=float(-np.median(a0)))
    for _ in range(100):
        a = forward_sequence(p, seq).a
        if np.min(np.abs(a)) > 1e-3:
            break
        p = replace(p, b=p.b + float(uniform(rng, -0.05, 0.05)))
    return p, seq


@dataclass(frozen=True)
class AdamState:
    m: dict[str, np.ndarray]
    s: dict[str, np.ndarray]
    k: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, p: ModelParams, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(p.zeros_like(), p.zeros_like(), 0, lr, beta1, beta2, eps)


def adam_step(st: AdamState, p: ModelParams, grads: dict[str, np.ndarray]) -> tuple[AdamState, ModelParams]:
    params = p.tensors()
    if set(grads) != set(params):
        raise ValueError(f"gradient names {sorted(grads)} do not match parameters {sorted(params)}")
    k = st.k + 1
    b1, b2 = st.beta1, st.beta2
    m, s, new = {}, {}, {}
    for name, theta in params.items():
        gr = grads[name]
        if gr.shape != theta.shape:
            raise ValueError(f"gradient for {name} has shape {gr.shape}, expected {theta.shape}")
        m[name] = b1 * st.m[name] + (1.0 - b1) * gr
        s[name] = b2 * st.s[name] + (1.0 - b2) * gr * gr
        m_hat = m[name] / (1.0 - b1 ** k)
        s_hat = s[name] / (1.0 - b2 ** k)
        new[name] = theta - st.lr * m_hat / (np.sqrt(s_hat) + st.eps)
    return replace(st, m=m, s=s, k=k), ModelParams.from_tensors(new)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 0.01
    seed: int = 0
    hidden: int = 8
    embed_dim: int = 4
    variant: int = 2
    init_scale: float = 0.1
    frozen: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.variant not in (1, 2):
            raise ValueError("variant must be 1 or 2")
        if self.hidden < 1 or self.embed_dim < 1:
            raise ValueError("hidden and embedding sizes must be positive")


def fit_sequence(
    seq: RegionSequence,
    cfg: TrainConfig,
    init: ModelParams | None = None,
) -> tuple[ModelParams, list[float]]:
    """Full-batch Adam on one teacher-forced sequence; returns params and the per-epoch loss."""
    p = init if init is not None else init_params(cfg.variant, cfg.hidden, cfg.embed_dim, make_rng(cfg.seed), cfg.init_scale)
    st = AdamState.fresh(p, lr=cfg.lr)
    curve = []
    for epoch in range(cfg.epochs):
        try:
            L, grads = backward(p, seq)
        except TrainingError as exc:
            raise TrainingError(f"epoch {epoch}: {exc}") from None
        if not np.isfinite(L) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError(f"training diverged at epoch {epoch} (loss {L})")
        for name in cfg.frozen:
            if name in grads:
                grads[name] = np.zeros_like(grads[name])
        curve.append(L)
        st, p = adam_step(st, p, grads)
    return p, curve


def train(
    ds: PanelDataset,
    region: str,
    cfg: TrainConfig,
    ts: TransformState,
    init: ModelParams | None = None,
) -> tuple[ModelParams, list[float]]:
    """Train one region's model on its training months (targets t = 2 .. n_train - 1)."""
    ds.index(region)
    seq = region_sequence(ds, ts, region, stop=ds.n_train)
    return fit_sequence(seq, cfg, init)
