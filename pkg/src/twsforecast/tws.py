"""Temporal window smoothing: global PCA fit, per-window project-and-reconstruct."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import covariance, eigh

FORMAT_VERSION = 1
# eigenvalues of a PSD covariance above -NEG_TOL are rounding noise and get clamped
NEG_TOL = 1e-9


@dataclass(frozen=True)
class TwsWhitener:
    mean: np.ndarray  # (N,)
    eigenvalues: np.ndarray  # (N,), descending, clamped at 0
    basis: np.ndarray  # (N, k), orthonormal columns
    k: int
    threshold: float = 0.90
    centered_projection: bool = True
    degenerate: bool = False

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TwsWhitener):
            return NotImplemented
        return (
            self.k == other.k
            and self.threshold == other.threshold
            and self.centered_projection == other.centered_projection
            and self.degenerate == other.degenerate
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
            and np.array_equal(self.basis, other.basis)
        )

    __hash__ = None

    def __call__(self, window: np.ndarray) -> np.ndarray:
        return whiten_window(self, window)


def select_k(eigenvalues: np.ndarray, threshold: float) -> int:
    """Smallest k whose leading eigenvalues hold at least ``threshold`` of the total."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    lam = np.asarray(eigenvalues, dtype=np.float64)
    total = lam.sum()
    if total <= 0.0:
        return 1
    ratios = np.cumsum(lam) / total
    hits = np.flatnonzero(ratios >= threshold)
    # rounding can leave the full sum a hair under 1.0
    return int(hits[0]) + 1 if hits.size else lam.size


def fit(train_series: np.ndarray, threshold: float = 0.90, centered_projection: bool = True) -> TwsWhitener:
    """Fit the whitener on a features x time training series."""
    x = np.asarray(train_series, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected features x time, got shape {x.shape}")
    if x.shape[1] < 2:
        raise ValueError(f"need at least 2 time steps to fit, got {x.shape[1]}")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")

    mean = x.mean(axis=1)
    decomp = eigh(covariance(x - mean[:, None]))
    lam = decomp.eigenvalues.copy()
    lam[(lam < 0) & (lam > -NEG_TOL)] = 0.0
    if (lam < 0).any():
        raise ArithmeticError(f"covariance has a negative eigenvalue {lam.min():.3e}")

    n = x.shape[0]
    if lam.sum() <= 0.0:
        basis = np.zeros((n, 1))
        basis[0, 0] = 1.0
        return TwsWhitener(mean, lam, basis, 1, threshold, centered_projection, degenerate=True)

    k = select_k(lam, threshold)
    return TwsWhitener(mean, lam, decomp.eigenvectors[:, :k].copy(), k, threshold, centered_projection)


def whiten_window(w: TwsWhitener, window: np.ndarray) -> np.ndarray:
    """Project a (N, L_ex) window, or a batch (..., N, L_ex), onto the basis and reconstruct.

    Centered mode returns ``mu + V V^T (E - mu)``; literal mode returns
    ``V V^T E + mu``.
    """
    e = np.asarray(window, dtype=np.float64)
    if e.ndim < 2 or e.shape[-2] != w.n_features:
        raise ValueError(f"window has {e.shape[-2] if e.ndim >= 2 else '?'} features, whitener expects {w.n_features}")
    mu = w.mean[:, None]
    v = w.basis
    src = e - mu if w.centered_projection else e
    scores = np.swapaxes(v, 0, 1) @ src  # (..., k, L_ex)
    return v @ scores + mu


def captured_variance_ratio(w: TwsWhitener) -> float:
    total = float(w.eigenvalues.sum())
    if w.degenerate or total <= 0.0:
        return 1.0
    return float(w.eigenvalues[: w.k].sum()) / total


def to_dict(w: TwsWhitener) -> dict:
    return {
        "format": "tws-whitener",
        "format_version": FORMAT_VERSION,
        "n_features": w.n_features,
        "k": w.k,
        "threshold": w.threshold,
        "centered_projection": w.centered_projection,
        "degenerate": w.degenerate,
        "mean": w.mean.tolist(),
        "eigenvalues": w.eigenvalues.tolist(),
        "basis": w.basis.reshape(-1).tolist(),  # row-major N x k
    }


def save(w: TwsWhitener, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_dict(w), indent=1) + "\n")


def from_dict(payload: dict) -> TwsWhitener:
    if payload.get("format") != "tws-whitener":
        raise ValueError("not a whitener artifact")
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported whitener format version {payload.get('format_version')}")
    n, k = int(payload["n_features"]), int(payload["k"])
    basis = np.asarray(payload["basis"], dtype=np.float64)
    if basis.size != n * k:
        raise ValueError(f"basis has {basis.size} entries, expected {n}x{k}")
    return TwsWhitener(
        mean=np.asarray(payload["mean"], dtype=np.float64),
        eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
        basis=basis.reshape(n, k),
        k=k,
        threshold=float(payload["threshold"]),
        centered_projection=bool(payload["centered_projection"]),
        degenerate=bool(payload["degenerate"]),
    )


def load(path: str | Path) -> TwsWhitener:
    return from_dict(json.loads(Path(path).read_text()))
