"""Loading and assembling the regional panel: case counts, climate, adjacency.

All three inputs are UTF-8 CSV files with a header row. Months are written
strictly as ``YYYY-MM``. Missing data is an error; nothing is imputed.
"""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

N_NEIGHBORS = 3
CLIMATE_FIELDS = ("tmax", "tmin", "tmean", "precip")

_MONTH_RE = re.compile(r"^(\d{4})-(0[1-9]|1[0-2])$")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def parse_month(text: str) -> int:
    """Return the month ordinal ``year * 12 + (month - 1)`` of a ``YYYY-MM`` string."""
    m = _MONTH_RE.match(text.strip())
    if m is None:
        raise DataError(f"bad month {text!r}, expected YYYY-MM")
    return int(m.group(1)) * 12 + int(m.group(2)) - 1


def format_month(ordinal: int) -> str:
    return f"{ordinal // 12:04d}-{ordinal % 12 + 1:02d}"


def month_range(start: str, count: int) -> tuple[str, ...]:
    first = parse_month(start)
    return tuple(format_month(first + k) for k in range(count))


@dataclass(frozen=True)
class CaseTable:
    months: tuple[str, ...]
    series: dict[str, np.ndarray]


@dataclass(frozen=True)
class ClimateTable:
    months: tuple[str, ...]
    series: dict[str, np.ndarray]  # region -> (T, 4) array of tmax, tmin, tmean, precip


@dataclass(frozen=True)
class AdjacencyGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]  # each pair stored sorted

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], nodes: Iterable[str] = ()) -> "AdjacencyGraph":
        node_set = set(nodes)
        pairs = set()
        for a, b in edges:
            if a == b:
                raise DataError(f"self-loop on region {a!r}")
            pairs.add((a, b) if a < b else (b, a))
            node_set.update((a, b))
        return cls(frozenset(node_set), frozenset(pairs))

    def neighbors(self, region: str) -> tuple[str, ...]:
        out = [b if a == region else a for a, b in self.edges if region in (a, b)]
        return tuple(sorted(out))


@dataclass(frozen=True)
class NeighborVector:
    values: np.ndarray  # length 3, zero-padded
    source_ids: tuple[str, ...]  # up to 3, aligned with the leading entries of values


@dataclass(frozen=True)
class PanelDataset:
    regions: tuple[str, ...]
    months: tuple[str, ...]
    cases: np.ndarray  # (R, T) int64
    climate: np.ndarray  # (R, T, 4) float64
    graph: AdjacencyGraph
    n_train: int
    _neighbors: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def T(self) -> int:
        return len(self.months)

    @property
    def n_test(self) -> int:
        return self.T - self.n_train

    @property
    def start_month_id(self) -> int:
        return parse_month(self.months[0]) % 12

    def month_id(self, t: int) -> int:
        """Calendar month of index ``t`` as 0 (January) .. 11 (December)."""
        return (self.start_month_id + t) % 12

    def index(self, region: str) -> int:
        try:
            return self.regions.index(region)
        except ValueError:
            raise DataError(f"unknown region {region!r}") from None

    def neighbors(self, region: str) -> tuple[str, ...]:
        if region not in self._neighbors:
            self._neighbors[region] = self.graph.neighbors(region)
        return self._neighbors[region]

    def series(self, region: str) -> np.ndarray:
        return self.cases[self.index(region)]


def _read_rows(path, header: tuple[str, ...]) -> list[list[str]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if got != header:
            raise DataError(f"{path}: header {','.join(got)!r}, expected {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append([c.strip() for c in row])
    return rows


def _collect(path, rows, parse_value) -> tuple[tuple[str, ...], dict[str, np.ndarray]]:
    """Group ``region,month,...`` rows into contiguous per-region series."""
    by_region: dict[str, dict[int, object]] = defaultdict(dict)
    for row in rows:
        region, month = row[0], row[1]
        if not region:
            raise DataError(f"{path}: empty region id")
        ordinal = parse_month(month)
        if ordinal in by_region[region]:
            raise DataError(f"{path}: duplicate entry for ({region}, {month})")
        by_region[region][ordinal] = parse_value(region, month, row[2:])
    if not by_region:
        raise DataError(f"{path}: no data rows")

    span = None
    out = {}
    for region in sorted(by_region):
        entries = by_region[region]
        lo, hi = min(entries), max(entries)
        missing = [o for o in range(lo, hi + 1) if o not in entries]
        if missing:
            raise DataError(f"{path}: region {region!r} has a gap at {format_month(missing[0])}")
        if span is None:
            span = (lo, hi)
        elif span != (lo, hi):
            raise DataError(
                f"{path}: region {region!r} covers {format_month(lo)}..{format_month(hi)}, "
                f"others cover {format_month(span[0])}..{format_month(span[1])}"
            )
        out[region] = np.array([entries[o] for o in range(lo, hi + 1)])
    months = tuple(format_month(o) for o in range(span[0], span[1] + 1))
    return months, out


def load_cases(path) -> CaseTable:
    """Read ``region,month,cases`` rows into per-region integer series."""

    def parse(region, month, fields):
        try:
            value = float(fields[0])
        except ValueError:
            raise DataError(f"{path}: non-numeric count {fields[0]!r} for ({region}, {month})") from None
        if value < 0:
            raise DataError(f"{path}: negative count {fields[0]} for ({region}, {month})")
        if value != int(value):
            raise DataError(f"{path}: non-integer count {fields[0]} for ({region}, {month})")
        return int(value)

    months, series = _collect(path, _read_rows(path, ("region", "month", "cases")), parse)
    return CaseTable(months, {r: s.astype(np.int64) for r, s in series.items()})


def load_climate(path) -> ClimateTable:
    """Read ``region,month,tmax,tmin,tmean,precip`` rows."""

    def parse(region, month, fields):
        try:
            tmax, tmin, tmean, precip = (float(x) for x in fields)
        except ValueError:
            raise DataError(f"{path}: non-numeric climate value for ({region}, {month})") from None
        if not np.all(np.isfinite([tmax, tmin, tmean, precip])):
            raise DataError(f"{path}: non-finite climate value for ({region}, {month})")
        if tmin > tmax:
            raise DataError(f"{path}: tmin {tmin} > tmax {tmax} for ({region}, {month})")
        if not tmin <= tmean <= tmax:
            raise DataError(f"{path}: tmean {tmean} outside [tmin, tmax] for ({region}, {month})")
        if precip < 0:
            raise DataError(f"{path}: negative precipitation {precip} for ({region}, {month})")
        return (tmax, tmin, tmean, precip)

    months, series = _collect(path, _read_rows(path, ("region", "month") + CLIMATE_FIELDS), parse)
    return ClimateTable(months, {r: s.astype(np.float64).reshape(-1, 4) for r, s in series.items()})


def load_adjacency(path) -> AdjacencyGraph:
    """Read ``region_a,region_b`` edges.

    A row with an empty ``region_b`` declares an isolated region.
    """
    edges, nodes = [], []
    for a, b in _read_rows(path, ("region_a", "region_b")):
        if not a:
            raise DataError(f"{path}: empty region_a")
        if not b:
            nodes.append(a)
        else:
            edges.append((a, b))
    return AdjacencyGraph.from_edges(edges, nodes)


def assemble(cases: CaseTable, climate: ClimateTable, graph: AdjacencyGraph, split_month: str) -> PanelDataset:
    """Align the three inputs into a panel; months up to ``split_month`` form the training split."""
    regions = tuple(sorted(cases.series))
    if set(climate.series) != set(regions):
        diff = sorted(set(climate.series) ^ set(regions))
        raise DataError(f"case and climate region sets differ: {diff}")
    if set(graph.nodes) != set(regions):
        missing = sorted(set(regions) - graph.nodes)
        unknown = sorted(graph.nodes - set(regions))
        raise DataError(f"adjacency graph mismatch: missing {missing}, unknown {unknown}")
    if climate.months != cases.months:
        raise DataError(
            f"climate covers {climate.months[0]}..{climate.months[-1]}, "
            f"cases cover {cases.months[0]}..{cases.months[-1]}"
        )
    months = cases.months
    split = parse_month(split_month)
    n_train = split - parse_month(months[0]) + 1
    if not 0 < n_train < len(months):
        raise DataError(f"split month {split_month} must lie in [{months[0]}, {months[-1]}) to leave a test period")

    case_arr = np.stack([cases.series[r] for r in regions]).astype(np.int64)
    clim_arr = np.stack([climate.series[r] for r in regions]).astype(np.float64)
    case_arr.setflags(write=False)
    clim_arr.setflags(write=False)
    return PanelDataset(regions, months, case_arr, clim_arr, graph, n_train)


def top_neighbors(
    ds: PanelDataset,
    region: str,
    t: int,
    scale: Callable[[str, int], float] | None = None,
) -> NeighborVector:
    """The (up to) three neighbors of ``region`` with the most raw cases at ``t - 1``.

    Ties go to the lexicographically smaller region id. Emitted values come from
    ``scale(region, month)`` (raw counts when omitted); missing slots are 0.
    """
    if t < 1:
        raise DataError("top_neighbors needs t >= 1 (no month before t = 0)")
    if t >= ds.T:
        raise DataError(f"month index {t} out of range (T = {ds.T})")
    nbrs = ds.neighbors(region)
    ranked = sorted(nbrs, key=lambda n: (-int(ds.cases[ds.index(n), t - 1]), n))[:N_NEIGHBORS]
    if scale is None:
        scale = lambda n, s: float(ds.cases[ds.index(n), s])  # noqa: E731
    values = np.zeros(N_NEIGHBORS)
    for k, n in enumerate(ranked):
        values[k] = scale(n, t - 1)
    return NeighborVector(values, tuple(ranked))
