import numpy as np
import pytest

from vbdcast.evaluation import rolling_forecast
from vbdcast.synth import SynthConfig, SynthError, gen_arima_path, gen_panel, make_graph, region_names, with_truth
from vbdcast.transform import fit_state


@pytest.fixture(scope="module")
def panel():
    return gen_panel(SynthConfig(seed=2))


def test_deterministic(panel):
    ds, gt = panel
    ds2, gt2 = gen_panel(SynthConfig(seed=2))
    assert ds.cases.tobytes() == ds2.cases.tobytes()
    assert ds.climate.tobytes() == ds2.climate.tobytes()
    assert not np.array_equal(gen_panel(SynthConfig(seed=3))[0].cases, ds.cases)


def test_shape_and_split(panel):
    ds, _ = panel
    assert ds.cases.shape == (5, 69) and ds.n_train == 51 and ds.n_test == 18
    assert ds.months[0] == "2013-03"


def test_ring_neighbors_padded(panel):
    ds, _ = panel
    for r in ds.regions:
        assert len(ds.graph.neighbors(r)) == 2
    from vbdcast.data import top_neighbors
    nv = top_neighbors(ds, ds.regions[0], 10)
    assert len(nv.source_ids) == 2 and nv.values[2] == 0.0


def test_graph_patterns():
    names = region_names(4)
    assert len(make_graph(names, "complete").edges) == 6
    assert len(make_graph(names, "grid").edges) == 4
    with pytest.raises(SynthError):
        make_graph(names, "star")


def test_count_and_climate_invariants(panel):
    ds, _ = panel
    assert ds.cases.dtype == np.int64 and np.all(ds.cases >= 0)
    c = ds.climate
    assert np.all(c[..., 0] >= c[..., 2]) and np.all(c[..., 2] >= c[..., 1])
    assert np.all(c[..., 3] >= 0)


def test_noiseless_panel_is_a_fixed_point():
    ds, gt = gen_panel(SynthConfig(seed=4, noise=0.0))
    for i, r in enumerate(ds.regions):
        pred = rolling_forecast(gt.params[r], gt.state, ds, r)
        assert np.allclose(pred, gt.mean_counts[i, ds.n_train:], atol=1e-6)
        assert np.max(np.abs(pred - ds.cases[i, ds.n_train:])) <= 0.5 + 1e-9


def test_noise_recorded(panel):
    ds, gt = panel
    assert np.all(gt.noise[:, :2] == 0)
    assert 0.05 < np.std(gt.noise[:, 2:]) < 0.15


def test_explicit_truth_regenerates_panel(panel):
    ds, gt = panel
    cfg = with_truth(SynthConfig(seed=2), gt)
    assert np.array_equal(gen_panel(cfg)[0].cases, ds.cases)


def test_fitted_transform_uses_train_only(panel):
    ds, _ = panel
    st = fit_state(ds)
    assert set(st.cases) == set(ds.regions)


def test_config_validation():
    with pytest.raises(SynthError):
        SynthConfig(n_months=40, n_train=40)
    with pytest.raises(SynthError):
        SynthConfig(noise=-1)


def test_arima_path_variance():
    y = gen_arima_path(0.0, [], [], 0, 2000, 1.0, seed=1)
    assert abs(np.var(y) - 1.0) < 0.1


def test_arima_path_random_walk():
    y = gen_arima_path(0.0, [], [], 1, 500, 1.0, seed=1)
    z = np.diff(y)
    assert abs(np.std(z) - 1.0) < 0.1 and np.std(y) > 2


def test_arima_path_rejects_nonstationary():
    with pytest.raises(SynthError):
        gen_arima_path(0.0, [1.2], [0.1], 0, 100, 1.0, seed=0)
    with pytest.raises(SynthError):
        gen_arima_path(0.0, [0.2], [1.5], 0, 100, 1.0, seed=0)
