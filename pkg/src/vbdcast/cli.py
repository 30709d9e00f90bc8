"""Batch command-line interface.

Commands: ``synth``, ``train``, ``forecast``, ``evaluate``, ``compare``,
``gradcheck``. Settings come from an optional JSON ``--config`` file; any
flag given on the command line wins. Exit codes: 0 success, 1 validation or
training error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .arima import ArimaError, ArimaOrder
from .data import DataError, PanelDataset, assemble, load_adjacency, load_cases, load_climate
from .evaluation import EvalReport, arima_forecast, compare, rolling_forecast
from .svg import line_chart
from .synth import SynthConfig, SynthError, gen_panel, write_panel
from .train import (
    TrainConfig,
    TrainingError,
    backward,
    finite_diff_grad,
    max_relative_error,
    random_instance,
    train,
)
from .transform import fit_state


@dataclass
class RunConfig:
    cases: str | None = None
    climate: str | None = None
    adjacency: str | None = None
    out: str = "out"
    split: str | None = None
    variant: int = 2
    epochs: int = 500
    lr: float = 0.01
    seed: int = 0
    hidden: int = 8
    embed_dim: int = 4
    init_scale: float = 0.1
    arima_order: tuple[int, int, int] = (2, 1, 1)
    regions: list[str] | None = None
    checkpoint: str | None = None
    model1: str | None = None
    model2: str | None = None
    svg: bool = False

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise DataError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise DataError(f"{path}: unknown config keys {unknown}")
        if "arima_order" in raw:
            raw["arima_order"] = tuple(raw["arima_order"])
        return cls(**raw)

    def train_config(self, variant: int | None = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, lr=self.lr, seed=self.seed, hidden=self.hidden,
            embed_dim=self.embed_dim, variant=self.variant if variant is None else variant,
            init_scale=self.init_scale,
        )

    def snapshot(self, outputs: bool = True) -> dict:
        """Plain-dict form; ``outputs=False`` drops output and checkpoint locations."""
        d = asdict(self)
        d["arima_order"] = list(self.arima_order)
        if not outputs:
            for key in ("out", "checkpoint", "model1", "model2", "svg"):
                d.pop(key)
        return d


class UsageError(ValueError):
    pass


def _load_dataset(cfg: RunConfig) -> PanelDataset:
    missing = [k for k in ("cases", "climate", "adjacency", "split") if getattr(cfg, k) is None]
    if missing:
        raise UsageError(f"missing required settings: {', '.join(missing)}")
    for key in ("cases", "climate", "adjacency"):
        p = Path(getattr(cfg, key))
        if not p.is_file():
            raise FileNotFoundError(f"{key} file not found: {p}")
    return assemble(load_cases(cfg.cases), load_climate(cfg.climate), load_adjacency(cfg.adjacency), cfg.split)


def _regions(cfg: RunConfig, ds: PanelDataset) -> list[str]:
    if not cfg.regions:
        return list(ds.regions)
    for r in cfg.regions:
        ds.index(r)
    return sorted(cfg.regions)


def _safe(region: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in region)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _train_checkpoint(cfg: RunConfig, ds: PanelDataset, variant: int, out: Path, loss_name: str, log=print) -> ckpt.Checkpoint:
    state = fit_state(ds)
    tc = cfg.train_config(variant)
    params, curves = {}, {}
    for r in _regions(cfg, ds):
        params[r], curves[r] = train(ds, r, tc, state)
        log(f"variant {variant}  {r}: final training loss {curves[r][-1]:.6g}")
    snap = cfg.snapshot(outputs=False)
    snap["variant"] = variant
    ck = ckpt.Checkpoint(variant, params, state, snap)
    ckpt.save(ck, out / f"model{variant}.ckpt")
    total = np.sum([curves[r] for r in sorted(curves)], axis=0)
    _write_csv(out / loss_name, ["epoch", "loss"], [(k, repr(float(v))) for k, v in enumerate(total)])
    for r in sorted(curves):
        _write_csv(out / f"loss{variant}_{_safe(r)}.csv", ["epoch", "loss"],
                   [(k, repr(float(v))) for k, v in enumerate(curves[r])])
    return ck


def cmd_synth(cfg: RunConfig, args) -> int:
    sc = SynthConfig(
        n_regions=args.regions_n, n_months=args.months, n_train=args.train_months,
        adjacency=args.adjacency_pattern, noise=args.noise, seed=cfg.seed,
    )
    ds, truth = gen_panel(sc)
    out = Path(cfg.out)
    paths = write_panel(ds, out)
    ckpt.save(ckpt.Checkpoint(2, truth.params, truth.state, {"synth": {k: v for k, v in asdict(sc).items() if k != "truth"}}),
              out / "truth.ckpt")
    run = RunConfig(cases=str(paths["cases"]), climate=str(paths["climate"]), adjacency=str(paths["adjacency"]),
                    out=str(out), split=ds.months[ds.n_train - 1], seed=cfg.seed)
    (out / "run.json").write_text(json.dumps(run.snapshot(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(ds.regions)} regions x {ds.T} months to {out} (split {run.split}, N={ds.n_train})")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    ds = _load_dataset(cfg)
    out = Path(cfg.out)
    _train_checkpoint(cfg, ds, cfg.variant, out, "loss.csv")
    print(f"checkpoint: {out / f'model{cfg.variant}.ckpt'}")
    return 0


def _checkpoint_path(cfg: RunConfig, variant: int, explicit: str | None) -> Path:
    return Path(explicit) if explicit else Path(cfg.out) / f"model{variant}.ckpt"


def _forecasts(ck: ckpt.Checkpoint, ds: PanelDataset) -> dict[str, np.ndarray]:
    missing = sorted(set(ck.regions) - set(ds.regions))
    if missing:
        raise DataError(f"checkpoint regions not in dataset: {missing}")
    return {r: rolling_forecast(ck.params[r], ck.state, ds, r) for r in ck.regions}


def cmd_forecast(cfg: RunConfig, args) -> int:
    ds = _load_dataset(cfg)
    ck = ckpt.load(_checkpoint_path(cfg, cfg.variant, cfg.checkpoint))
    rows = []
    for r, pred in _forecasts(ck, ds).items():
        actual = ds.series(r)[ds.n_train:]
        rows += [(r, m, int(a), repr(float(p))) for m, a, p in zip(ds.months[ds.n_train:], actual, pred)]
    path = Path(cfg.out) / f"forecast{ck.variant}.csv"
    _write_csv(path, ["region", "month", "actual", "predicted"], rows)
    print(f"wrote {path}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ds = _load_dataset(cfg)
    ck = ckpt.load(_checkpoint_path(cfg, cfg.variant, cfg.checkpoint))
    name = f"model{ck.variant}"
    rows = [compare(ds, r, {name: pred}) for r, pred in _forecasts(ck, ds).items()]
    width = max(len(r.region) for r in rows)
    for row in rows:
        print(f"{row.region.ljust(width)}  RMSE {row.rmse[name]:.2f}  MAE {row.mae[name]:.2f}")
    path = Path(cfg.out) / f"eval{ck.variant}.csv"
    _write_csv(path, ["region", "model", "rmse", "mae"],
               [(r.region, name, repr(r.rmse[name]), repr(r.mae[name])) for r in rows])
    return 0


def cmd_compare(cfg: RunConfig, args) -> int:
    ds = _load_dataset(cfg)
    if ds.n_test < 1:
        raise DataError("empty test range")
    out = Path(cfg.out)
    cks = {}
    for v, explicit in ((1, cfg.model1), (2, cfg.model2)):
        path = _checkpoint_path(cfg, v, explicit)
        if args.train and not path.exists():
            cks[v] = _train_checkpoint(cfg, ds, v, out, f"loss{v}.csv")
        else:
            cks[v] = ckpt.load(path)
            if cks[v].variant != v:
                raise DataError(f"{path} holds a variant {cks[v].variant} model, expected {v}")
    if cks[1].regions != cks[2].regions:
        raise DataError(f"checkpoint regions differ: {cks[1].regions} vs {cks[2].regions}")
    f1, f2 = _forecasts(cks[1], ds), _forecasts(cks[2], ds)
    order = ArimaOrder(*cfg.arima_order)
    rows = []
    arima_dump = []
    for r in cks[1].regions:
        model, fa = arima_forecast(ds, r, order, seed=cfg.seed)
        arima_dump.append(f"[{r}]\n" + model.to_text())
        row = compare(ds, r, {"model1": f1[r], "model2": f2[r], "arima": fa})
        rows.append(row)
        _write_csv(out / f"pred_{_safe(r)}.csv", ["month", "actual", "model1", "model2", "arima"],
                   [(m, int(a), repr(float(p1)), repr(float(p2)), repr(float(pa)))
                    for m, a, p1, p2, pa in zip(row.months, row.actual, f1[r], f2[r], fa)])
        if cfg.svg:
            full = ds.series(r).astype(float)
            pad = np.full(ds.n_train, np.nan)
            chart = line_chart(r, ds.months, {
                "actual": full,
                "model (1)": np.concatenate([pad, f1[r]]),
                "model (2)": np.concatenate([pad, f2[r]]),
                "ARIMA": np.concatenate([pad, fa]),
            }, split=ds.n_train)
            (out / f"pred_{_safe(r)}.svg").write_text(chart, encoding="utf-8")
    report = EvalReport(tuple(rows))
    (out / "report.txt").write_text(report.text(), encoding="utf-8")
    (out / "report.csv").write_text(report.csv(), encoding="utf-8")
    (out / "arima.txt").write_text("".join(arima_dump), encoding="utf-8")
    print(report.text(), end="")
    return 0


def gradcheck(seed: int, tolerance: float = 1e-4, hidden: int = 8, embed_dim: int = 4, length: int = 20,
              eps: float = 1e-5, corrupt: bool = False) -> tuple[bool, dict[str, float]]:
    p, seq = random_instance(seed, hidden, embed_dim, length)
    _, analytic = backward(p, seq)
    if corrupt:
        analytic["lstm.U"] = analytic["lstm.U"] * 1.01 + 1e-3
    numeric = finite_diff_grad(p, seq, eps)
    errs = {k: max_relative_error(analytic[k], numeric[k]) for k in analytic}
    return all(e < tolerance for e in errs.values()), errs


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    ok, errs = gradcheck(cfg.seed, args.tolerance, cfg.hidden, cfg.embed_dim, args.length, args.eps, args.corrupt)
    width = max(len(k) for k in errs)
    for k, e in errs.items():
        print(f"{k.ljust(width)}  max rel err {e:.3e}  {'PASS' if e < args.tolerance else 'FAIL'}")
    print("gradcheck " + ("passed" if ok else "FAILED"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--variant", type=int, choices=(1, 2))
    common.add_argument("--split", help="last training month, YYYY-MM")
    common.add_argument("--cases")
    common.add_argument("--climate")
    common.add_argument("--adjacency")
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--hidden", type=int)
    common.add_argument("--embed-dim", dest="embed_dim", type=int)
    common.add_argument("--init-scale", dest="init_scale", type=float)
    common.add_argument("--arima-order", dest="arima_order", type=int, nargs=3, metavar=("P", "D", "Q"))
    common.add_argument("--region", dest="regions", action="append", help="restrict to a region (repeatable)")

    parser = argparse.ArgumentParser(prog="vbdcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic panel")
    p.add_argument("--regions-n", type=int, default=5)
    p.add_argument("--months", type=int, default=69)
    p.add_argument("--train-months", type=int, default=51)
    p.add_argument("--adjacency-pattern", choices=("ring", "grid", "complete"), default="ring")
    p.add_argument("--noise", type=float, default=0.1)

    sub.add_parser("train", parents=[common], help="train one model per region")

    for name in ("forecast", "evaluate"):
        p = sub.add_parser(name, parents=[common], help=f"{name} from a checkpoint")
        p.add_argument("--checkpoint")

    p = sub.add_parser("compare", parents=[common], help="compare models (1), (2) and ARIMA")
    p.add_argument("--model1")
    p.add_argument("--model2")
    p.add_argument("--train", action="store_true", help="train missing checkpoints in place")
    p.add_argument("--svg", action="store_true", default=None, help="also write an SVG chart per region")

    p = sub.add_parser("gradcheck", parents=[common], help="check analytic gradients by finite differences")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, tuple(value) if f.name == "arima_order" else value)
    return cfg


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ArimaError, SynthError, TrainingError, ckpt.CheckpointError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
