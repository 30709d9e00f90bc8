import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vbdcast.nnet import (
    CrossParams,
    LstmParams,
    LstmState,
    ModelParams,
    SeasonParams,
    cross_layer,
    forward,
    forward_sequence,
    init_params,
    lstm_encode,
    lstm_run,
    lstm_step,
    season_term,
)
from vbdcast.rng import make_rng
from vbdcast.train import random_instance


def scalar_lstm_step(p: LstmParams, x, h, c):
    """Independent scalar-loop LSTM step from per-gate matrices."""
    H = p.hidden
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    pre = {}
    for name in "ifgo":
        Wg, Ug, bg = p.gate(name)
        pre[name] = [bg[j] + sum(Wg[j, k] * x[k] for k in range(3)) + sum(Ug[j, k] * h[k] for k in range(H))
                     for j in range(H)]
    c_new, h_new = [], []
    for j in range(H):
        i, f, o = sig(pre["i"][j]), sig(pre["f"][j]), sig(pre["o"][j])
        g = math.tanh(pre["g"][j])
        c_new.append(f * c[j] + i * g)
        h_new.append(o * math.tanh(c_new[j]))
    return np.array(h_new), np.array(c_new)


def rand_lstm(seed, H=8):
    return init_params(1, H, 4, make_rng(seed), scale=0.8).lstm


def test_lstm_zero_weights():
    H = 5
    p = LstmParams(np.zeros((4 * H, 3)), np.zeros((4 * H, H)), np.zeros(4 * H), np.zeros(H))
    s = lstm_step(p, [1.0, -2.0, 3.0], LstmState.zeros(H))
    assert np.all(s.h == 0) and np.all(s.c == 0)


def test_lstm_saturation_bound():
    H = 3
    b = np.zeros(4 * H)
    b[:H] = 50.0
    b[2 * H:3 * H] = 50.0
    b[3 * H:] = 50.0
    p = LstmParams(np.zeros((4 * H, 3)), np.zeros((4 * H, H)), b, np.zeros(H))
    s = lstm_step(p, np.zeros(3), LstmState.zeros(H))
    assert np.allclose(s.c, 1.0) and np.allclose(s.h, math.tanh(1.0))
    assert np.all(np.abs(s.h) < 1)


@pytest.mark.parametrize("seed", range(5))
def test_lstm_step_matches_scalar_oracle(seed):
    p = rand_lstm(seed)
    rng = np.random.default_rng(seed)
    x, h, c = rng.normal(size=3), rng.uniform(-0.9, 0.9, 8), rng.normal(size=8)
    s = lstm_step(p, x, LstmState(h, c))
    h_ref, c_ref = scalar_lstm_step(p, x, h, c)
    assert np.allclose(s.h, h_ref, atol=1e-13) and np.allclose(s.c, c_ref, atol=1e-13)


def test_lstm_step_dimension_mismatch():
    p = rand_lstm(0)
    with pytest.raises(ValueError):
        lstm_step(p, np.zeros(4), LstmState.zeros(8))
    with pytest.raises(ValueError):
        lstm_step(p, np.zeros(3), LstmState.zeros(7))


def test_lstm_encode_compositional():
    p = rand_lstm(3)
    xs = np.random.default_rng(3).normal(size=(5, 3))
    s = LstmState.zeros(8)
    expected = []
    for x in xs:
        s = lstm_step(p, x, s)
        expected.append(p.w @ s.h)
    assert np.allclose(lstm_encode(p, xs), expected, atol=1e-14)
    assert np.allclose(lstm_encode(p, xs[:1]), expected[:1], atol=1e-14)


def test_lstm_encode_zero_readout_and_empty():
    p = replace(rand_lstm(1), w=np.zeros(8))
    assert np.all(lstm_encode(p, np.ones((4, 3))) == 0)
    with pytest.raises(ValueError):
        lstm_encode(p, np.zeros((0, 3)))


def test_lstm_state_bounds():
    p = rand_lstm(7)
    tr = lstm_run(p, np.random.default_rng(7).normal(scale=5, size=(30, 3)))
    assert np.all(np.abs(tr.h) < 1)
    assert np.all(np.abs(tr.c) <= np.arange(1, 31)[:, None])


def expanded_cross(W, v, wt):
    """The 16-term expansion: row i of (Wv)*v is sum_j w_ij v_i v_j."""
    rows = [sum(W[i][j] * v[i] * v[j] for j in range(4)) for i in range(4)]
    return sum(wt[i] * rows[i] for i in range(4))


def test_cross_layer_identity():
    c = CrossParams(np.eye(4), np.ones(4))
    assert cross_layer(c, [1, 2, 3, 4]) == 30.0


def test_cross_layer_zero():
    rng = np.random.default_rng(0)
    assert cross_layer(CrossParams(np.zeros((4, 4)), rng.normal(size=4)), rng.normal(size=4)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_cross_layer_expansion_and_homogeneity(seed, scale):
    rng = np.random.default_rng(seed)
    W, v, wt = rng.normal(size=(4, 4)), rng.normal(size=4), rng.normal(size=4)
    c = CrossParams(W, wt)
    assert abs(cross_layer(c, v) - expanded_cross(W, v, wt)) < 1e-12 * max(1, abs(cross_layer(c, v)))
    assert math.isclose(cross_layer(c, scale * v), scale ** 2 * cross_layer(c, v), rel_tol=1e-12, abs_tol=1e-12)


def test_season_term():
    E = np.arange(48, dtype=float).reshape(12, 4)
    s = SeasonParams(E, np.array([1.0, 0, 0, 1.0]))
    assert season_term(s, 2) == E[2, 0] + E[2, 3]
    assert season_term(SeasonParams(np.zeros((12, 4)), np.ones(4)), 5) == 0.0
    with pytest.raises(ValueError):
        season_term(s, 13)
    with pytest.raises(ValueError):
        season_term(s, -1)


def zero_params(variant=1, H=4, D=3):
    p = ModelParams(0.0, 0.0, 0.0, LstmParams(np.zeros((4 * H, 3)), np.zeros((4 * H, H)), np.zeros(4 * H), np.zeros(H)))
    return p.with_variant(variant, D)


def test_forward_examples():
    p = zero_params(1)
    y, tr = forward(p, 0.3, np.zeros(3), 0.4, 0.0)
    assert y == 0.0
    y, _ = forward(replace(p, alpha=1.0), 0.4, np.zeros(3), 0.0, 0.0)
    assert y == 0.4
    y, tr = forward(replace(p, b=-0.7), 0.0, np.zeros(3), 0.0, 0.0)
    assert tr.a == -0.7 and y == 0.0


def test_forward_variant_mismatch():
    with pytest.raises(ValueError):
        forward(zero_params(2), 0.1, np.zeros(3), 0.0, 0.0)
    with pytest.raises(ValueError):
        forward(zero_params(1), 0.1, np.zeros(3), 0.0, 0.0, np.zeros(4), 3)


def test_forward_sequence_matches_stepwise():
    p, seq = random_instance(4)
    tr = forward_sequence(p, seq)
    s = LstmState.zeros(p.hidden)
    for k in range(len(seq)):
        s = lstm_step(p.lstm, seq.nb_top[k], s)
        y, st = forward(p, seq.own_prev[k], seq.nb_top[k], seq.nb_sum[k], p.lstm.w @ s.h,
                        seq.climate[k], int(seq.month_id[k]))
        assert abs(y - tr.y_hat[k]) < 1e-13
        assert abs(st.g - tr.g[k]) < 1e-14 and abs(st.psi - tr.psi[k]) < 1e-14
    assert np.all(tr.y_hat >= 0) and np.array_equal(tr.y_hat, np.maximum(tr.a, 0))


def test_zero_extension_reproduces_base_model():
    p1, seq = random_instance(5, variant=1)
    p2 = p1.with_variant(2)
    assert np.array_equal(forward_sequence(p1, seq).y_hat, forward_sequence(p2, seq).y_hat)


def test_forward_deterministic():
    p, seq = random_instance(6)
    a, b = forward_sequence(p, seq), forward_sequence(p, seq)
    assert a.y_hat.tobytes() == b.y_hat.tobytes()


def test_init_shares_common_parameters():
    p1 = init_params(1, 8, 4, make_rng(3))
    p2 = init_params(2, 8, 4, make_rng(3))
    for k, v in p1.tensors().items():
        assert np.array_equal(v, p2.tensors()[k])
    assert p1.alpha == 1.0 and np.all(p1.lstm.gate("f")[2] == 1.0)
    assert p2.season.E.shape == (12, 4) and p2.cross.W.shape == (4, 4)
