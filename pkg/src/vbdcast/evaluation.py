"""One-step-ahead test evaluation on the original count scale and the comparison report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import arima as arima_mod
from .data import DataError, PanelDataset
from .nnet import ModelParams, forward_sequence
from .transform import FIRST_STEP, TransformState, denormalize, region_sequence

MODELS = ("model1", "model2", "arima")
HEADERS = {"model1": "(1)", "model2": "(2)", "arima": "ARIMA"}


def _errors(e) -> np.ndarray:
    e = np.abs(np.asarray(e, dtype=np.float64))
    if e.ndim != 1 or e.size == 0:
        raise ValueError("error vector must be a non-empty 1-d array")
    return e


def error_vector(pred, actual) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"prediction shape {pred.shape} differs from actual {actual.shape}")
    return np.abs(pred - actual)


def mae(e) -> float:
    e = _errors(e)
    return float(e.sum() / e.size)


def rmse(e) -> float:
    e = _errors(e)
    return float(np.sqrt((e * e).sum() / e.size))


def rolling_forecast(params: ModelParams, state: TransformState, ds: PanelDataset, region: str) -> np.ndarray:
    """Count-scale forecasts for test months ``n_train .. T-1``.

    Every month is predicted from observed data up to the month before; the
    LSTM runs over the whole observed history. Predictions are floored at 0.
    """
    if ds.n_test < 1:
        raise DataError("empty test range")
    if ds.n_train <= FIRST_STEP:
        raise DataError("training range too short to forecast from")
    seq = region_sequence(ds, state, region)
    z_hat = forward_sequence(params, seq).y_hat
    test = seq.t >= ds.n_train
    step = denormalize(z_hat[test], state.cases[region])
    return np.maximum(seq.prev_count[test] + step, 0.0)


def arima_forecast(ds: PanelDataset, region: str, order: arima_mod.ArimaOrder = arima_mod.ArimaOrder(), seed: int = 0):
    """Fit once on the training months, then roll one-step forecasts through the test months."""
    if ds.n_test < 1:
        raise DataError("empty test range")
    y = ds.series(region).astype(np.float64)
    model = arima_mod.fit(y[:ds.n_train], order, seed=seed)
    return model, np.maximum(arima_mod.rolling_forecast(model, y, ds.n_train), 0.0)


@dataclass(frozen=True)
class EvalRow:
    region: str
    rmse: dict[str, float]
    mae: dict[str, float]
    months: tuple[str, ...] = ()
    actual: np.ndarray | None = None
    predictions: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def models(self) -> tuple[str, ...]:
        return tuple(self.rmse)

    def winner(self, metric: str = "rmse") -> str:
        """Model with the smallest value, or ``"tie"`` when the minimum is shared."""
        vals = getattr(self, metric)
        lo = min(vals.values())
        best = [m for m, v in vals.items() if v == lo]
        return best[0] if len(best) == 1 else "tie"

    @classmethod
    def from_metrics(cls, region: str, rmse: dict[str, float], mae: dict[str, float]) -> "EvalRow":
        return cls(region, dict(rmse), dict(mae))


def compare(ds: PanelDataset, region: str, forecasts: dict[str, np.ndarray]) -> EvalRow:
    """Score each model's test forecasts against the observed counts."""
    if ds.n_test < 1:
        raise DataError("empty test range")
    actual = ds.series(region)[ds.n_train:].astype(np.float64)
    rm, ma = {}, {}
    for name, pred in forecasts.items():
        pred = np.asarray(pred, dtype=np.float64)
        if pred.shape != actual.shape:
            raise DataError(f"{name}: {pred.size} forecasts for {actual.size} test months")
        e = error_vector(pred, actual)
        rm[name] = rmse(e)
        ma[name] = mae(e)
    return EvalRow(region, rm, ma, ds.months[ds.n_train:], actual, {k: np.asarray(v, dtype=np.float64) for k, v in forecasts.items()})


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]

    def table(self, metric: str = "rmse") -> str:
        models = self.rows[0].models if self.rows else MODELS
        head = ["Region"] + [HEADERS.get(m, m) for m in models] + ["best"]
        body = []
        for row in self.rows:
            vals = getattr(row, metric)
            w = row.winner(metric)
            body.append([row.region] + [f"{vals[m]:.2f}" for m in models] + [HEADERS.get(w, w)])
        widths = [max(len(r[k]) for r in [head] + body) for k in range(len(head))]

        def fmt(cells):
            out = [cells[0].ljust(widths[0])]
            out += [c.rjust(widths[k + 1]) for k, c in enumerate(cells[1:-1])]
            out.append(cells[-1])
            return "  ".join(out).rstrip()

        return "\n".join([metric.upper(), fmt(head)] + [fmt(r) for r in body]) + "\n"

    def text(self) -> str:
        return self.table("rmse") + "\n" + self.table("mae")

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["region", "model", "rmse", "mae", "winner"])
        for row in self.rows:
            for m in row.models:
                flags = []
                for metric in ("rmse", "mae"):
                    vals = getattr(row, metric)
                    if vals[m] == min(vals.values()):
                        flags.append(metric if row.winner(metric) == m else f"{metric}-tie")
                w.writerow([row.region, m, repr(row.rmse[m]), repr(row.mae[m]), "+".join(flags)])
        return buf.getvalue()
