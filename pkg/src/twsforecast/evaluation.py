"""Test metrics, the bridging x TWS ablation matrix, and result reports."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tws as tws_mod
from .config import RunConfig
from .data import (
    ForecastSample,
    SeriesView,
    TimeSeriesDataset,
    benchmark_split_sizes,
    make_samples,
    split,
    stack,
    standardize,
)
from .forecaster import Forecaster
from .training import train

log = logging.getLogger(__name__)

AVG = "avg"
CELLS = (("concat", False), ("concat", True), ("cross", False), ("cross", True))
RESULT_COLUMNS = ("dataset", "horizon", "bridging", "tws", "mse", "mae", "n_samples")


@dataclass(frozen=True)
class EvalResult:
    dataset: str
    horizon: int | str  # AVG for the horizon-average row
    bridging: str
    tws: bool
    mse: float
    mae: float
    n_samples: int
    wall_seconds: float = field(default=0.0, compare=False)

    def sort_key(self):
        h = math.inf if self.horizon == AVG else int(self.horizon)
        return (self.dataset, h, self.bridging, self.tws)

    def to_row(self) -> str:
        return "\t".join([self.dataset, str(self.horizon), self.bridging, "on" if self.tws else "off",
                          repr(self.mse), repr(self.mae), str(self.n_samples)])

    @classmethod
    def from_row(cls, line: str) -> "EvalResult":
        ds, h, br, tw, mse, mae, n = line.rstrip("\n").split("\t")
        return cls(ds, h if h == AVG else int(h), br, tw == "on", float(mse), float(mae), int(n))


def window_metrics(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window MSE and MAE for batches shaped (B, C, H)."""
    diff = np.asarray(pred) - np.asarray(target)
    return (diff ** 2).mean(axis=(1, 2)), np.abs(diff).mean(axis=(1, 2))


def evaluate(model: Forecaster, samples: Sequence[ForecastSample], dataset: str = "",
             batch_size: int = 256) -> EvalResult:
    """Score ``model`` per window and average uniformly over windows."""
    if not samples:
        raise ValueError("cannot evaluate on an empty sample set")
    start = time.perf_counter()
    mses, maes = [], []
    for i in range(0, len(samples), batch_size):
        endo, exo, target = stack(samples[i:i + batch_size])
        m, a = window_metrics(model.forward(endo, exo).data, target)
        mses.append(m)
        maes.append(a)
    cfg = model.config
    return EvalResult(dataset, cfg.horizon, cfg.bridging, cfg.tws_enabled,
                      float(np.concatenate(mses).mean()), float(np.concatenate(maes).mean()),
                      len(samples), time.perf_counter() - start)


# experiment plumbing ---------------------------------------------------------


@dataclass
class PreparedData:
    """Globally standardized splits and the whitener fit on the training split."""

    name: str
    train: SeriesView
    val: SeriesView
    test: SeriesView
    whitener: tws_mod.TwsWhitener
    endogenous: list[int] | None = None
    exogenous: list[int] | None = None

    def samples(self, config: RunConfig, which: str, stride: int = 1) -> list[ForecastSample]:
        view = {"train": self.train, "val": self.val, "test": self.test}[which]
        return make_samples(view, config.lookback, config.exo_lookback, config.horizon, stride,
                            self.endogenous, self.exogenous)


def prepare(ds: TimeSeriesDataset, config: RunConfig, sizes: tuple[int, int, int] | None = None,
            endogenous: Sequence[int] | None = None, exogenous: Sequence[int] | None = None,
            whitener: tws_mod.TwsWhitener | None = None) -> PreparedData:
    """Standardize with training statistics, split, and fit the whitener once.

    The whitener sees only the training split's own steps.
    """
    sizes = sizes or benchmark_split_sizes(ds.name, ds.n_steps)
    span = max(config.lookback, config.exo_lookback)
    scaled, _ = standardize(ds, sizes[0])
    tr, va, te = split(scaled, *sizes, lookback=span)
    if whitener is None:
        exo_rows = tr.values if exogenous is None else tr.values[list(exogenous)]
        whitener = tws_mod.fit(exo_rows, config.threshold, config.centered_projection)
    return PreparedData(ds.name, tr, va, te, whitener,
                        None if endogenous is None else list(endogenous),
                        None if exogenous is None else list(exogenous))


def run_cell(data: PreparedData, config: RunConfig, train_stride: int = 1,
             eval_stride: int = 1) -> tuple[EvalResult, Forecaster]:
    """Train one configuration and score it on the test split."""
    start = time.perf_counter()
    model = Forecaster(config, data.whitener if config.tws_enabled else None)
    train(model, data.samples(config, "train", train_stride), data.samples(config, "val", eval_stride))
    res = evaluate(model, data.samples(config, "test", eval_stride), data.name)
    elapsed = time.perf_counter() - start
    return EvalResult(res.dataset, res.horizon, res.bridging, res.tws, res.mse, res.mae,
                      res.n_samples, elapsed), model


def ablation_configs(base: RunConfig, horizons: Iterable[int]) -> list[RunConfig]:
    """One config per (horizon, bridging, tws) cell, seeded base seed + cell index."""
    out = []
    for hi, horizon in enumerate(horizons):
        for ci, (bridging, use_tws) in enumerate(CELLS):
            idx = hi * len(CELLS) + ci
            out.append(base.replace(horizon=horizon, bridging=bridging, tws_enabled=use_tws,
                                    seed=base.seed + idx))
    return out


def run_ablation(data: PreparedData, horizons: Sequence[int], base: RunConfig,
                 train_stride: int = 1, eval_stride: int = 1) -> list[EvalResult]:
    """The 4-cell ablation per horizon plus one horizon-average row per cell."""
    results = []
    for cfg in ablation_configs(base, horizons):
        res, _ = run_cell(data, cfg, train_stride, eval_stride)
        log.info("%s H=%d %s tws=%s mse=%.4f mae=%.4f", data.name, cfg.horizon, cfg.bridging,
                 cfg.tws_enabled, res.mse, res.mae)
        results.append(res)
    return results + horizon_averages(results)


def horizon_averages(results: Sequence[EvalResult]) -> list[EvalResult]:
    groups: dict[tuple, list[EvalResult]] = {}
    for r in results:
        if r.horizon != AVG:
            groups.setdefault((r.dataset, r.bridging, r.tws), []).append(r)
    out = []
    for (ds, br, tw), rs in groups.items():
        out.append(EvalResult(ds, AVG, br, tw,
                              float(np.mean([r.mse for r in rs])), float(np.mean([r.mae for r in rs])),
                              sum(r.n_samples for r in rs), sum(r.wall_seconds for r in rs)))
    return out


# reporting -------------------------------------------------------------------


def format_table(results: Sequence[EvalResult]) -> str:
    """Aligned text table: one row per (dataset, horizon), MSE/MAE per ablation cell."""
    if not results:
        raise ValueError("no results to report")
    rows = sorted(results, key=EvalResult.sort_key)
    keys = []
    cells: dict[tuple, EvalResult] = {}
    for r in rows:
        k = (r.dataset, str(r.horizon))
        if k not in keys:
            keys.append(k)
        cells[(*k, r.bridging, r.tws)] = r
    header = ["dataset", "horizon"]
    for br, tw in CELLS:
        label = f"{br.capitalize()} {'w' if tw else 'w/o'}"
        header += [f"{label} MSE", f"{label} MAE"]
    table = [header]
    for ds, h in keys:
        line = [ds, h]
        for br, tw in CELLS:
            r = cells.get((ds, h, br, tw))
            line += [f"{r.mse:.3f}", f"{r.mae:.3f}"] if r else ["-", "-"]
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table) + "\n"


def dumps_results(results: Sequence[EvalResult]) -> str:
    rows = sorted(results, key=EvalResult.sort_key)
    return "\t".join(RESULT_COLUMNS) + "\n" + "".join(r.to_row() + "\n" for r in rows)


def loads_results(text: str) -> list[EvalResult]:
    lines = text.splitlines()
    if not lines or tuple(lines[0].split("\t")) != RESULT_COLUMNS:
        raise ValueError("not a results file")
    return [EvalResult.from_row(line) for line in lines[1:] if line.strip()]


def report(results: Sequence[EvalResult], out_dir: str | Path | None = None) -> str:
    """Return the text table; with ``out_dir`` also write table, results and timings files."""
    table = format_table(results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.txt").write_text(table)
        (out / "results.tsv").write_text(dumps_results(results))
        timings = "\n".join(f"{r.dataset}\t{r.horizon}\t{r.bridging}\t{'on' if r.tws else 'off'}\t{r.wall_seconds:.3f}"
                            for r in sorted(results, key=EvalResult.sort_key))
        (out / "timings.tsv").write_text("dataset\thorizon\tbridging\ttws\tseconds\n" + timings + "\n")
    return table
