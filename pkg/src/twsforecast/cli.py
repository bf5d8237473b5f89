"""Command line entry point: fit-tws, train, evaluate, ablate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import tws
from .config import BENCHMARK_HORIZONS, ConfigError, RunConfig
from .data import CsvFormatError, SplitError, load_csv
from .evaluation import dumps_results, evaluate, prepare, report, run_ablation
from .forecaster import Forecaster, load_checkpoint, save_checkpoint
from .training import TrainingDiverged, train

log = logging.getLogger("twsforecast")

# flag -> RunConfig field
FLAG_FIELDS = {
    "seed": "seed",
    "lookback": "lookback",
    "exo_lookback": "exo_lookback",
    "patch_len": "patch_len",
    "d_model": "d_model",
    "heads": "heads",
    "blocks": "blocks",
    "dropout": "dropout",
    "lr": "lr",
    "batch": "batch_size",
    "epochs": "epochs",
    "patience": "patience",
    "max_steps": "max_steps",
    "threshold": "threshold",
    "horizon": "horizon",
    "bridging": "bridging",
}


def on_off(value: str) -> bool:
    low = value.lower()
    if low not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return low == "on"


def int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run config (overrides --config)")
    g.add_argument("--config", type=Path, help="key=value file with RunConfig fields")
    g.add_argument("--seed", type=int)
    g.add_argument("--lookback", type=int)
    g.add_argument("--exo-lookback", type=int)
    g.add_argument("--patch-len", type=int)
    g.add_argument("--d-model", type=int)
    g.add_argument("--heads", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--max-steps", type=int)
    g.add_argument("--threshold", type=float)
    d = p.add_argument_group("data")
    d.add_argument("--data", type=Path, required=True, help="CSV with a leading date column")
    d.add_argument("--endogenous", help="comma-separated target columns (default: all)")
    d.add_argument("--exogenous", help="comma-separated context columns (default: all)")
    d.add_argument("--train-stride", type=int, default=1, help="subsample training windows")
    d.add_argument("--eval-stride", type=int, default=1, help="subsample validation/test windows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twsforecast")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-tws", help="fit the exogenous whitener on the training split")
    add_common(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="train one forecaster")
    add_common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--bridging", choices=("cross", "concat"))
    p.add_argument("--tws", type=on_off)
    p.add_argument("--whitener", type=Path, help="whitener artifact (fit on the fly when absent)")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.add_argument("--log", type=Path, help="TrainReport TSV (default: <out>.log.tsv)")

    p = sub.add_parser("evaluate", help="score a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--endogenous")
    p.add_argument("--exogenous")
    p.add_argument("--eval-stride", type=int, default=1)
    p.add_argument("--out", type=Path, help="write the result row here")

    p = sub.add_parser("ablate", help="bridging x TWS ablation over horizons")
    add_common(p)
    p.add_argument("--horizons", type=int_list, default=list(BENCHMARK_HORIZONS))
    p.add_argument("--out", type=Path, required=True, help="report directory")
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {field: getattr(args, flag) for flag, field in FLAG_FIELDS.items()
               if getattr(args, flag, None) is not None}
    if getattr(args, "tws", None) is not None:
        changes["tws_enabled"] = args.tws
    return cfg.replace(**changes)


def columns(names: list[str], spec: str | None) -> list[int] | None:
    if not spec:
        return None
    out = []
    for col in spec.split(","):
        if col not in names:
            raise ConfigError(f"unknown column {col!r}")
        out.append(names.index(col))
    return out


def load_prepared(args, cfg: RunConfig, whitener=None):
    ds = load_csv(args.data)
    return prepare(ds, cfg, endogenous=columns(ds.feature_names, args.endogenous),
                   exogenous=columns(ds.feature_names, args.exogenous), whitener=whitener)


def cmd_fit_tws(args) -> int:
    cfg = run_config(args)
    data = load_prepared(args, cfg)
    tws.save(data.whitener, args.out)
    print(f"k={data.whitener.k} of {data.whitener.n_features} ratio={tws.captured_variance_ratio(data.whitener):.4f}"
          f"{' (degenerate)' if data.whitener.degenerate else ''} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = run_config(args)
    whitener = tws.load(args.whitener) if args.whitener else None
    data = load_prepared(args, cfg, whitener)
    model = Forecaster(cfg, data.whitener if cfg.tws_enabled else None)
    log_path = args.log or args.out.with_name(args.out.name + ".log.tsv")
    try:
        _, rep = train(model, data.samples(cfg, "train", args.train_stride),
                       data.samples(cfg, "val", args.eval_stride))
    except TrainingDiverged as err:
        err.report.save(log_path)
        save_checkpoint(model, args.out, str(args.whitener) if args.whitener else None,
                        {"stop_reason": "diverged"})
        print(f"training diverged: {err}; best state saved to {args.out}", file=sys.stderr)
        return 3
    rep.save(log_path)
    save_checkpoint(model, args.out, str(args.whitener) if args.whitener else None,
                    {"best_epoch": rep.best_epoch, "stop_reason": rep.stop_reason, "data": str(args.data)})
    print(f"best epoch {rep.best_epoch} val {rep.best_val:.6f} ({rep.stop_reason}) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    data = load_prepared(args, model.config, model.whitener)
    res = evaluate(model, data.samples(model.config, args.split, args.eval_stride), data.name)
    text = dumps_results([res])
    if args.out:
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_ablate(args) -> int:
    cfg = run_config(args)
    data = load_prepared(args, cfg)
    results = run_ablation(data, args.horizons, cfg, args.train_stride, args.eval_stride)
    sys.stdout.write(report(results, args.out))
    return 0


COMMANDS = {"fit-tws": cmd_fit_tws, "train": cmd_train, "evaluate": cmd_evaluate, "ablate": cmd_ablate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CsvFormatError, SplitError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
