"""ETT-style CSV ingestion, chronological splits and sliding-window samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

NORM_EPS = 1e-5

# hours per 30-day month at the hourly ETT resolution
_ETT_MONTH = 30 * 24


class CsvFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeriesDataset:
    feature_names: list[str]
    values: np.ndarray  # (C_total, T_total)
    frequency: str = ""
    name: str = ""
    timestamps: list[str] = field(default_factory=list, repr=False)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SeriesView:
    """A contiguous time slice ``[start, stop)`` of a dataset.

    ``owned_start`` marks where the split's own steps begin; anything before
    it is lookback context borrowed from the preceding split.
    """

    values: np.ndarray  # (C_total, stop - start)
    start: int
    owned_start: int

    def __len__(self) -> int:
        return self.values.shape[1]

    @property
    def stop(self) -> int:
        return self.start + len(self)

    def window_count(self, lookback: int) -> int:
        """Number of lookback windows, the count benchmark tables report."""
        return max(len(self) - lookback + 1, 0)


@dataclass(frozen=True)
class ForecastSample:
    endogenous: np.ndarray  # (C, L)
    exogenous: np.ndarray  # (N, L_ex)
    target: np.ndarray  # (C, H)
    window_start: int


def load_csv(path: str | Path, frequency: str = "") -> TimeSeriesDataset:
    """Read a ``date,f1,f2,...`` file into a features x time dataset."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise CsvFormatError(f"{path.name} is empty", row=1)
        if header[0].strip().lstrip("﻿") != "date":
            raise CsvFormatError(f"first column must be 'date', got {header[0]!r}", row=1, column=1)
        names = [h.strip() for h in header[1:]]
        if not names:
            raise CsvFormatError("no feature columns", row=1)
        width = len(header)
        stamps: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CsvFormatError(f"expected {width} cells, got {len(row)}", row=lineno)
            stamps.append(row[0])
            parsed = []
            for j, cell in enumerate(row[1:]):
                try:
                    x = float(cell)
                except ValueError:
                    raise CsvFormatError(f"non-numeric cell {cell!r}", row=lineno, column=names[j]) from None
                if not math.isfinite(x):
                    raise CsvFormatError(f"missing or non-finite cell {cell!r}", row=lineno, column=names[j])
                parsed.append(x)
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{path.name} has a header but no data rows", row=2)
    values = np.asarray(rows, dtype=np.float64).T.copy()
    return TimeSeriesDataset(names, values, frequency or _guess_frequency(path.stem), path.stem, stamps)


def write_csv(ds: TimeSeriesDataset, path: str | Path) -> None:
    stamps = ds.timestamps or [str(t) for t in range(ds.n_steps)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *ds.feature_names])
        for t in range(ds.n_steps):
            w.writerow([stamps[t], *(repr(float(x)) for x in ds.values[:, t])])


def _guess_frequency(stem: str) -> str:
    s = stem.lower()
    if s.startswith("etth"):
        return "h"
    if s.startswith("ettm"):
        return "15min"
    if s.startswith("weather"):
        return "10min"
    return ""


def benchmark_split_sizes(name: str, n_steps: int) -> tuple[int, int, int]:
    """Steps owned by train/val/test under the usual long-horizon benchmark loaders.

    ETTh*: 12/4/4 months of hourly data; ETTm*: the same span at 15 minutes.
    Everything else: 70% / remainder / 20%, with floor on train and test.
    """
    s = name.lower()
    if s.startswith("etth") or s.startswith("ettm"):
        per_month = _ETT_MONTH * (4 if s.startswith("ettm") else 1)
        sizes = (12 * per_month, 4 * per_month, 4 * per_month)
        if sum(sizes) > n_steps:
            raise SplitError(f"{name} needs {sum(sizes)} steps, file has {n_steps}")
        return sizes
    n_train = int(n_steps * 0.7)
    n_test = int(n_steps * 0.2)
    return n_train, n_steps - n_train - n_test, n_test


def split(ds: TimeSeriesDataset, train_n: int, val_n: int, test_n: int,
          lookback: int = 96) -> tuple[SeriesView, SeriesView, SeriesView]:
    """Chronological train/val/test views.

    Val and test each reach back ``lookback`` steps into the preceding split
    so their first window ends exactly where the split begins.
    """
    if min(train_n, val_n, test_n) <= 0:
        raise SplitError("split sizes must be positive")
    if train_n + val_n + test_n > ds.n_steps:
        raise SplitError(f"splits need {train_n + val_n + test_n} steps, dataset has {ds.n_steps}")
    if lookback > train_n:
        raise SplitError(f"lookback {lookback} exceeds the training split ({train_n})")
    bounds = [(0, 0, train_n), (train_n - lookback, train_n, train_n + val_n),
              (train_n + val_n - lookback, train_n + val_n, train_n + val_n + test_n)]
    return tuple(SeriesView(ds.values[:, a:b].copy(), a, own) for a, own, b in bounds)


def benchmark_split(ds: TimeSeriesDataset, lookback: int = 96) -> tuple[SeriesView, SeriesView, SeriesView]:
    return split(ds, *benchmark_split_sizes(ds.name, ds.n_steps), lookback=lookback)


def make_samples(view: SeriesView, lookback: int = 96, exo_lookback: int | None = None,
                 horizon: int = 96, stride: int = 1,
                 endogenous: Sequence[int] | None = None,
                 exogenous: Sequence[int] | None = None) -> list[ForecastSample]:
    """Sliding windows over ``view`` ordered by start.

    ``endogenous``/``exogenous`` select feature rows; by default every
    feature plays both roles. The exogenous window ends at the forecast
    origin, like the endogenous one.
    """
    exo_lookback = lookback if exo_lookback is None else exo_lookback
    span = max(lookback, exo_lookback)
    values = view.values
    en = values if endogenous is None else values[list(endogenous)]
    ex = values if exogenous is None else values[list(exogenous)]
    n = len(view) - span - horizon + 1
    samples = []
    for i in range(0, max(n, 0), stride):
        origin = i + span
        samples.append(ForecastSample(
            endogenous=en[:, origin - lookback:origin].copy(),
            exogenous=ex[:, origin - exo_lookback:origin].copy(),
            target=en[:, origin:origin + horizon].copy(),
            window_start=view.start + origin - lookback,
        ))
    return samples


def stack(samples: Sequence[ForecastSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch arrays (B, C, L), (B, N, L_ex), (B, C, H)."""
    return (np.stack([s.endogenous for s in samples]),
            np.stack([s.exogenous for s in samples]),
            np.stack([s.target for s in samples]))


@dataclass(frozen=True)
class InstanceNormState:
    mean: np.ndarray  # (..., C, 1)
    std: np.ndarray  # (..., C, 1), floored at NORM_EPS


def instance_normalize(x: np.ndarray, eps: float = NORM_EPS) -> tuple[np.ndarray, InstanceNormState]:
    """Standardize each channel over its last (time) axis with population std."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    std = np.maximum(x.std(axis=-1, keepdims=True), eps)
    return (x - mean) / std, InstanceNormState(mean, std)


def denormalize(pred, state: InstanceNormState):
    """Undo :func:`instance_normalize`; works on arrays and tape tensors alike."""
    return pred * state.std + state.mean


@dataclass(frozen=True)
class StandardScaler:
    """Per-feature standardization with training-split statistics."""

    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,)

    @classmethod
    def fit(cls, train: np.ndarray) -> "StandardScaler":
        std = train.std(axis=1)
        return cls(train.mean(axis=1), np.where(std > 0, std, 1.0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, None] + self.mean[:, None]


def standardize(ds: TimeSeriesDataset, train_n: int) -> tuple[TimeSeriesDataset, StandardScaler]:
    scaler = StandardScaler.fit(ds.values[:, :train_n])
    out = TimeSeriesDataset(ds.feature_names, scaler.transform(ds.values), ds.frequency, ds.name, ds.timestamps)
    return out, scaler
