"""Forward computation of the base and integrated models.

Base model (variant 1)::

    y_t = relu(alpha * y_{t-1} + beta * sum_nbrs + f_t + b)

Integrated model (variant 2) adds a month-embedding seasonality term and a
quadratic climate cross term::

    y_t = relu(alpha * y_{t-1} + beta * sum_nbrs + f_t + g(month) + psi(v_t) + b)

with ``f_t = w . h_t`` the readout of an LSTM run over the top-3 neighbor
vectors, ``g(m) = w_hat . E[m]`` and ``psi(v) = w_tilde . ((W v) * v)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .rng import uniform
from .transform import RegionSequence

N_INPUT = 3
N_CLIMATE = 4
N_MONTHS = 12
GATES = ("i", "f", "g", "o")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class LstmParams:
    """LSTM weights with the four gates stacked in the order i, f, g, o.

    ``W`` is (4H, 3), ``U`` is (4H, H), ``b`` is (4H,), ``w`` the (H,) readout.
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    w: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w.size

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W_name, U_name, b_name)`` views for one gate."""
        k = GATES.index(name)
        H = self.hidden
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass(frozen=True)
class CrossParams:
    W: np.ndarray  # (4, 4)
    w_tilde: np.ndarray  # (4,)


@dataclass(frozen=True)
class SeasonParams:
    E: np.ndarray  # (12, D)
    w_hat: np.ndarray  # (D,)


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    b: float
    lstm: LstmParams
    cross: CrossParams | None = None
    season: SeasonParams | None = None

    def __post_init__(self):
        if (self.cross is None) != (self.season is None):
            raise ValueError("cross and season parameters must be both present (variant 2) or both absent")

    @property
    def variant(self) -> int:
        return 1 if self.cross is None else 2

    @property
    def hidden(self) -> int:
        return self.lstm.hidden

    @property
    def embed_dim(self) -> int:
        return 0 if self.season is None else self.season.w_hat.size

    def tensors(self) -> dict[str, np.ndarray]:
        """Every trainable tensor by name; scalars come back as 0-d arrays."""
        out = {
            "alpha": np.asarray(self.alpha, dtype=np.float64),
            "beta": np.asarray(self.beta, dtype=np.float64),
            "b": np.asarray(self.b, dtype=np.float64),
            "lstm.W": self.lstm.W,
            "lstm.U": self.lstm.U,
            "lstm.b": self.lstm.b,
            "lstm.w": self.lstm.w,
        }
        if self.variant == 2:
            out.update({
                "cross.W": self.cross.W,
                "cross.w_tilde": self.cross.w_tilde,
                "season.E": self.season.E,
                "season.w_hat": self.season.w_hat,
            })
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "ModelParams":
        t = {k: np.array(v, dtype=np.float64) for k, v in tensors.items()}
        lstm = LstmParams(t["lstm.W"], t["lstm.U"], t["lstm.b"], t["lstm.w"])
        H = lstm.w.size
        if lstm.W.shape != (4 * H, N_INPUT) or lstm.U.shape != (4 * H, H) or lstm.b.shape != (4 * H,):
            raise ValueError(f"inconsistent LSTM shapes for hidden size {H}")
        cross = season = None
        if "cross.W" in t:
            cross = CrossParams(t["cross.W"], t["cross.w_tilde"])
            season = SeasonParams(t["season.E"], t["season.w_hat"])
            if cross.W.shape != (N_CLIMATE, N_CLIMATE) or cross.w_tilde.shape != (N_CLIMATE,):
                raise ValueError("cross layer must be 4x4 with a length-4 readout")
            if season.E.shape != (N_MONTHS, season.w_hat.size):
                raise ValueError("embedding table must be 12 x D with a length-D readout")
        return cls(float(t["alpha"]), float(t["beta"]), float(t["b"]), lstm, cross, season)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors().items()}

    def with_variant(self, variant: int, embed_dim: int = 4) -> "ModelParams":
        """Drop (variant 1) or zero-fill (variant 2) the climate and season parameters."""
        if variant == 1:
            return replace(self, cross=None, season=None)
        if self.variant == 2:
            return self
        D = embed_dim
        return replace(
            self,
            cross=CrossParams(np.zeros((N_CLIMATE, N_CLIMATE)), np.zeros(N_CLIMATE)),
            season=SeasonParams(np.zeros((N_MONTHS, D)), np.zeros(D)),
        )


def init_params(variant: int, hidden: int, embed_dim: int, rng: np.random.Generator, scale: float = 0.1) -> ModelParams:
    """Uniform(-scale, scale) weights, forget-gate bias 1 and alpha = 1.

    Draw order is fixed so that variants 1 and 2 built from the same seed share
    every common parameter.
    """
    if variant not in (1, 2):
        raise ValueError(f"variant must be 1 or 2, got {variant}")
    H = hidden
    beta, b = uniform(rng, -scale, scale, 2)
    W = uniform(rng, -scale, scale, (4 * H, N_INPUT))
    U = uniform(rng, -scale, scale, (4 * H, H))
    lb = uniform(rng, -scale, scale, 4 * H)
    lb[H:2 * H] = 1.0
    w = uniform(rng, -scale, scale, H)
    params = ModelParams(1.0, float(beta), float(b), LstmParams(W, U, lb, w))
    if variant == 1:
        return params
    cross = CrossParams(uniform(rng, -scale, scale, (N_CLIMATE, N_CLIMATE)), uniform(rng, -scale, scale, N_CLIMATE))
    season = SeasonParams(uniform(rng, -scale, scale, (N_MONTHS, embed_dim)), uniform(rng, -scale, scale, embed_dim))
    return replace(params, cross=cross, season=season)


def lstm_step(p: LstmParams, x, s: LstmState) -> LstmState:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (N_INPUT,) or s.h.shape != (p.hidden,) or s.c.shape != (p.hidden,):
        raise ValueError(f"lstm_step: input {x.shape} / state {s.h.shape} do not match hidden size {p.hidden}")
    H = p.hidden
    z = p.W @ x + p.U @ s.h + p.b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    g = np.tanh(z[2 * H:3 * H])
    o = sigmoid(z[3 * H:])
    c = f * s.c + i * g
    return LstmState(o * np.tanh(c), c)


@dataclass(frozen=True)
class LstmTrace:
    h: np.ndarray  # (n, H) hidden states after each step
    c: np.ndarray  # (n, H) cell states after each step
    gates: np.ndarray  # (n, 4H) activated gates i, f, g, o


def lstm_run(p: LstmParams, xs) -> LstmTrace:
    """Run the LSTM from a zero state over ``xs`` (n, 3)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] == 0 or xs.shape[1] != N_INPUT:
        raise ValueError(f"lstm sequence must be a non-empty (n, {N_INPUT}) array, got {xs.shape}")
    H = p.hidden
    n = xs.shape[0]
    xproj = xs @ p.W.T + p.b
    hs = np.empty((n, H))
    cs = np.empty((n, H))
    gates = np.empty((n, 4 * H))
    h = np.zeros(H)
    c = np.zeros(H)
    U = p.U
    for t in range(n):
        z = xproj[t] + U @ h
        act = gates[t]
        act[:] = 0.5 * (1.0 + np.tanh(0.5 * z))
        act[2 * H:3 * H] = np.tanh(z[2 * H:3 * H])
        c = act[H:2 * H] * c + act[:H] * act[2 * H:3 * H]
        h = act[3 * H:] * np.tanh(c)
        hs[t] = h
        cs[t] = c
    return LstmTrace(hs, cs, gates)


def lstm_encode(p: LstmParams, seq) -> np.ndarray:
    """Readouts ``f_t = w . h_t`` along a neighbor-vector sequence."""
    return lstm_run(p, seq).h @ p.w


def cross_layer(c: CrossParams, v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return float(c.w_tilde @ ((c.W @ v) * v))


def season_term(s: SeasonParams, month_id: int) -> float:
    if not 0 <= int(month_id) < N_MONTHS or int(month_id) != month_id:
        raise ValueError(f"month id must be an integer in [0, 11], got {month_id}")
    return float(s.w_hat @ s.E[int(month_id)])


@dataclass(frozen=True)
class StepTrace:
    f: float
    g: float
    psi: float
    a: float
    y_hat: float


def _assemble(p: ModelParams, own_prev, nb_sum, f, g, psi):
    # zero season/cross terms leave the sum bitwise identical to variant 1
    a = p.alpha * own_prev + p.beta * nb_sum + f
    if p.variant == 2:
        a = a + g
        a = a + psi
    return a + p.b


def forward(
    p: ModelParams,
    own_prev: float,
    nb_prev,
    nb_sum: float,
    f_t: float,
    v_t=None,
    month_id: int | None = None,
) -> tuple[float, StepTrace]:
    """One prediction on the transformed scale.

    ``nb_prev`` is the LSTM's neighbor input for this step; its contribution
    arrives through ``f_t``, which the caller computes with the LSTM state
    carried along the sequence.
    """
    has_ext = v_t is not None and month_id is not None
    if p.variant == 2 and not has_ext:
        raise ValueError("the integrated model needs a climate vector and a month id")
    if p.variant == 1 and (v_t is not None or month_id is not None):
        raise ValueError("the base model takes no climate vector or month id")
    if np.asarray(nb_prev).shape != (N_INPUT,):
        raise ValueError("nb_prev must be a 3-vector")
    g = psi = 0.0
    if p.variant == 2:
        g = season_term(p.season, month_id)
        psi = cross_layer(p.cross, v_t)
    a = float(_assemble(p, own_prev, nb_sum, f_t, g, psi))
    y = max(a, 0.0)
    return y, StepTrace(float(f_t), g, psi, a, y)


@dataclass(frozen=True)
class ForwardTrace:
    f: np.ndarray
    g: np.ndarray
    psi: np.ndarray
    cross_q: np.ndarray  # (n, 4) W v_t, kept for the backward pass
    a: np.ndarray
    y_hat: np.ndarray
    lstm: LstmTrace


def forward_sequence(p: ModelParams, seq: RegionSequence) -> ForwardTrace:
    """Teacher-forced predictions for every row of ``seq``."""
    lt = lstm_run(p.lstm, seq.nb_top)
    f = lt.h @ p.lstm.w
    n = len(seq)
    if p.variant == 2:
        g = p.season.E[seq.month_id] @ p.season.w_hat
        q = seq.climate @ p.cross.W.T
        psi = (q * seq.climate) @ p.cross.w_tilde
    else:
        g = np.zeros(n)
        psi = np.zeros(n)
        q = np.zeros((n, N_CLIMATE))
    a = _assemble(p, seq.own_prev, seq.nb_sum, f, g, psi)
    return ForwardTrace(f, g, psi, q, a, np.maximum(a, 0.0), lt)
