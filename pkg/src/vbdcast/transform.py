"""First-order differencing and min-max normalization, fitted on the training split.

Case counts are differenced along time and each region's differences are
min-max scaled with bounds taken from training months only. Climate
features are scaled the same way per region and per feature, without
differencing. Test-period values may fall outside [0, 1]; they are never
clipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, PanelDataset, top_neighbors

# First month that can be a model target: it needs a transformed value at t - 1,
# and the transformed (differenced) series starts at t = 1.
FIRST_STEP = 2


@dataclass(frozen=True)
class DiffSeries:
    anchor: float
    d: np.ndarray


@dataclass(frozen=True)
class NormParams:
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.hi == self.lo


def difference(series) -> DiffSeries:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("differencing needs a 1-d series of length >= 2")
    return DiffSeries(float(x[0]), np.diff(x))


def undifference(anchor: float, d, from_value: float | None = None) -> np.ndarray:
    """Invert :func:`difference`.

    With ``from_value`` the result excludes the starting point: one difference
    gives the single next value ``from_value + d[0]``.
    """
    d = np.asarray(d, dtype=np.float64)
    if from_value is not None:
        return from_value + np.cumsum(d)
    return np.concatenate([[anchor], anchor + np.cumsum(d)])


def fit_normalizer(values, train_len: int) -> NormParams:
    x = np.asarray(values, dtype=np.float64)
    if not 2 <= train_len <= x.size:
        raise ValueError(f"train_len {train_len} out of range [2, {x.size}]")
    head = x[:train_len]
    return NormParams(float(head.min()), float(head.max()))


def normalize(x, p: NormParams):
    if p.degenerate:
        return np.full_like(np.asarray(x, dtype=np.float64), 0.5)[()]
    return (np.asarray(x, dtype=np.float64) - p.lo) / (p.hi - p.lo)


def denormalize(z, p: NormParams):
    if p.degenerate:
        return np.full_like(np.asarray(z, dtype=np.float64), p.lo)[()]
    return np.asarray(z, dtype=np.float64) * (p.hi - p.lo) + p.lo


@dataclass(frozen=True)
class TransformState:
    anchors: dict[str, float]
    cases: dict[str, NormParams]  # per region, over training differences
    climate: dict[str, tuple[NormParams, ...]]  # per region, one per climate feature

    def transformed_cases(self, ds: PanelDataset) -> np.ndarray:
        """(R, T) normalized differences; column 0 is NaN (no prior month)."""
        z = np.full(ds.cases.shape, np.nan)
        for i, r in enumerate(ds.regions):
            z[i, 1:] = normalize(np.diff(ds.cases[i].astype(np.float64)), self.cases[r])
        return z

    def transformed_climate(self, ds: PanelDataset) -> np.ndarray:
        v = np.empty(ds.climate.shape)
        for i, r in enumerate(ds.regions):
            for k, p in enumerate(self.climate[r]):
                v[i, :, k] = normalize(ds.climate[i, :, k], p)
        return v


def fit_state(ds: PanelDataset) -> TransformState:
    """Fit every normalizer from months ``t < n_train``."""
    if ds.n_train < 3:
        raise DataError("need at least 3 training months to fit the case normalizer")
    anchors, cases, climate = {}, {}, {}
    for i, r in enumerate(ds.regions):
        diff = difference(ds.cases[i])
        anchors[r] = diff.anchor
        # differences d_t = y_t - y_{t-1} for t = 1..n_train-1 only touch training months
        cases[r] = fit_normalizer(diff.d, ds.n_train - 1)
        climate[r] = tuple(fit_normalizer(ds.climate[i, :, k], ds.n_train) for k in range(4))
    return TransformState(anchors, cases, climate)


@dataclass(frozen=True)
class RegionSequence:
    """Teacher-forced model inputs for one region, one row per target month."""

    region: str
    t: np.ndarray  # month indices of the targets
    own_prev: np.ndarray  # (n,) transformed own value at t-1
    nb_top: np.ndarray  # (n, 3) top-3 neighbor values at t-1
    nb_sum: np.ndarray  # (n,) sum over all neighbors at t-1
    climate: np.ndarray  # (n, 4) normalized climate at t
    month_id: np.ndarray  # (n,) int
    target: np.ndarray  # (n,) transformed value at t
    prev_count: np.ndarray  # (n,) raw count at t-1

    def __len__(self) -> int:
        return self.t.size

    def head(self, n: int) -> "RegionSequence":
        return RegionSequence(
            self.region, self.t[:n], self.own_prev[:n], self.nb_top[:n], self.nb_sum[:n],
            self.climate[:n], self.month_id[:n], self.target[:n], self.prev_count[:n],
        )


def region_sequence(ds: PanelDataset, state: TransformState, region: str, stop: int | None = None) -> RegionSequence:
    """Build inputs and targets for months ``FIRST_STEP .. stop - 1`` (default: all months)."""
    stop = ds.T if stop is None else stop
    if stop <= FIRST_STEP or stop > ds.T:
        raise DataError(f"sequence stop {stop} out of range ({FIRST_STEP}, {ds.T}]")
    z = state.transformed_cases(ds)
    v = state.transformed_climate(ds)
    ri = ds.index(region)
    nbr_idx = [ds.index(n) for n in ds.neighbors(region)]
    scale = lambda n, s: z[ds.index(n), s]  # noqa: E731

    ts = np.arange(FIRST_STEP, stop)
    nb_top = np.array([top_neighbors(ds, region, int(t), scale).values for t in ts]).reshape(-1, 3)
    nb_sum = z[nbr_idx][:, ts - 1].sum(axis=0) if nbr_idx else np.zeros(ts.size)
    return RegionSequence(
        region=region,
        t=ts,
        own_prev=z[ri, ts - 1],
        nb_top=nb_top,
        nb_sum=nb_sum,
        climate=v[ri, ts],
        month_id=np.array([ds.month_id(int(t)) for t in ts], dtype=np.int64),
        target=z[ri, ts],
        prev_count=ds.cases[ri, ts - 1].astype(np.float64),
    )
