"""Versioned plain-text checkpoints.

One tab-separated record per line::

    vbdcast-checkpoint  1
    variant             2
    config              {"epochs": 500, ...}
    anchor              Matara  10.0
    norm                Matara  cases  -4.0  6.0
    norm                Matara  climate:0  22.1  34.0
    region              Matara
    tensor              Matara  lstm.W  32,3  0.01 -0.2 ...

Transform state is stored for every region of the dataset; ``region`` and
``tensor`` records only for trained regions. Tensor values are row-major ``repr`` floats, so a save/load/save cycle is
byte-identical. Scalars have an empty shape field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nnet import ModelParams
from .transform import NormParams, TransformState

MAGIC = "vbdcast-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    variant: int
    params: dict[str, ModelParams]
    state: TransformState
    config: dict = field(default_factory=dict)
    version: int = VERSION

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(sorted(self.params))


def _f(x) -> str:
    return repr(float(x))


def dumps(ck: Checkpoint) -> str:
    lines = [f"{MAGIC}\t{ck.version}", f"variant\t{ck.variant}", "config\t" + json.dumps(ck.config, sort_keys=True)]
    # transform state covers every region (neighbors of a trained region need it)
    for r in sorted(set(ck.state.anchors) | set(ck.params)):
        if "\t" in r or "\n" in r:
            raise CheckpointError(f"region id {r!r} contains a tab or newline")
        if r not in ck.state.anchors or r not in ck.state.cases or r not in ck.state.climate:
            raise CheckpointError(f"region {r}: incomplete transform state")
        lines.append(f"anchor\t{r}\t{_f(ck.state.anchors[r])}")
        p = ck.state.cases[r]
        lines.append(f"norm\t{r}\tcases\t{_f(p.lo)}\t{_f(p.hi)}")
        for k, p in enumerate(ck.state.climate[r]):
            lines.append(f"norm\t{r}\tclimate:{k}\t{_f(p.lo)}\t{_f(p.hi)}")
    for r in ck.regions:
        lines.append(f"region\t{r}")
        for name, arr in ck.params[r].tensors().items():
            shape = ",".join(str(s) for s in arr.shape)
            values = " ".join(_f(x) for x in np.asarray(arr).reshape(-1))
            lines.append(f"tensor\t{r}\t{name}\t{shape}\t{values}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Checkpoint:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC + "\t"):
        raise CheckpointError("not a vbdcast checkpoint")
    version = int(lines[0].split("\t")[1])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    variant, config = None, {}
    tensors: dict[str, dict[str, np.ndarray]] = {}
    anchors, cases, climate = {}, {}, {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        f = line.split("\t")
        kind = f[0]
        try:
            if kind == "variant":
                variant = int(f[1])
            elif kind == "config":
                config = json.loads(f[1])
            elif kind == "region":
                tensors.setdefault(f[1], {})
            elif kind == "anchor":
                anchors[f[1]] = float(f[2])
            elif kind == "norm":
                p = NormParams(float(f[3]), float(f[4]))
                if f[2] == "cases":
                    cases[f[1]] = p
                else:
                    k = int(f[2].split(":")[1])
                    climate.setdefault(f[1], {})[k] = p
            elif kind == "tensor":
                region, name, shape_txt, values = f[1], f[2], f[3], f[4]
                shape = tuple(int(s) for s in shape_txt.split(",")) if shape_txt else ()
                arr = np.array([float(x) for x in values.split()], dtype=np.float64)
                tensors.setdefault(region, {})[name] = arr.reshape(shape)
            else:
                raise CheckpointError(f"unknown record {kind!r}")
        except (IndexError, ValueError) as exc:
            raise CheckpointError(f"line {lineno}: {exc}") from None
    if variant not in (1, 2):
        raise CheckpointError("missing or invalid variant record")
    try:
        params = {r: ModelParams.from_tensors(t) for r, t in tensors.items()}
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad tensor set: {exc}") from None
    for r, p in params.items():
        if p.variant != variant:
            raise CheckpointError(f"region {r}: tensors describe variant {p.variant}, header says {variant}")
    for r in set(params) | set(anchors) | set(cases) | set(climate):
        if r not in anchors or r not in cases or sorted(climate.get(r, {})) != [0, 1, 2, 3]:
            raise CheckpointError(f"region {r}: incomplete transform state")
    state = TransformState(anchors, cases, {r: tuple(climate[r][k] for k in range(4)) for r in climate})
    return Checkpoint(variant, params, state, config, version)


def save(ck: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(ck), encoding="utf-8")
    return path


def load(path) -> Checkpoint:
    return loads(Path(path).read_text(encoding="utf-8"))
