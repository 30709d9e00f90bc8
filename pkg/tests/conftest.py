import numpy as np
import pytest

from vbdcast.data import AdjacencyGraph, PanelDataset, month_range

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_csv(path, header, rows):
    lines = [header] + [",".join(str(c) for c in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_panel(cases, edges=(), nodes=None, climate=None, n_train=None, start="2013-03"):
    """Small PanelDataset from a {region: counts} mapping."""
    regions = tuple(sorted(cases))
    T = len(next(iter(cases.values())))
    arr = np.array([cases[r] for r in regions], dtype=np.int64)
    if climate is None:
        rng = np.random.default_rng(0)
        tmean = 27 + rng.normal(size=(len(regions), T))
        climate = np.stack([tmean + 3, tmean - 3, tmean, 100 + 10 * rng.random((len(regions), T))], axis=-1)
    graph = AdjacencyGraph.from_edges(edges, nodes if nodes is not None else regions)
    return PanelDataset(regions, month_range(start, T), arr, np.asarray(climate, dtype=float), graph,
                        n_train if n_train is not None else T - 3)


@pytest.fixture
def csv_writer(tmp_path):
    def _write(name, header, rows):
        return write_csv(tmp_path / name, header, rows)
    return _write
