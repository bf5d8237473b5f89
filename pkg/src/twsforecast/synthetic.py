"""Seeded synthetic datasets for smoke tests and the ablation sanity check."""

from __future__ import annotations

import numpy as np

from .data import TimeSeriesDataset


def _stamps(n: int) -> list[str]:
    return [str(t) for t in range(n)]


def sinusoids(length: int = 1000, periods=(24.0, 50.0), amplitude: float = 1.0,
              name: str = "sinusoid") -> TimeSeriesDataset:
    """One clean sine per channel, each with its own period and phase."""
    t = np.arange(length, dtype=np.float64)
    rows = [amplitude * np.sin(2 * np.pi * t / p + 0.7 * i) for i, p in enumerate(periods)]
    names = [f"s{i}" for i in range(len(periods))]
    return TimeSeriesDataset(names, np.vstack(rows), "", name, _stamps(length))


def low_rank_noisy(length: int = 2000, channels: int = 7, rank: int = 2, snr_db: float = 0.0,
                   seed: int = 0, name: str = "lowrank") -> TimeSeriesDataset:
    """Rank-``rank`` periodic signal mixed into ``channels`` variates plus white noise.

    Every channel's noise variance is set from its own signal power so the
    per-channel SNR is ``snr_db``.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    latents = []
    for r in range(rank):
        period = rng.uniform(20.0, 60.0)
        slow = rng.uniform(150.0, 400.0)
        latents.append(np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
                       + 0.5 * np.sin(2 * np.pi * t / slow + rng.uniform(0, 2 * np.pi)))
    latent = np.vstack(latents)
    loadings = rng.normal(size=(channels, rank))
    signal = loadings @ latent
    power = signal.var(axis=1)
    noise_std = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    values = signal + noise_std[:, None] * rng.normal(size=signal.shape)
    names = [f"x{i}" for i in range(channels)]
    return TimeSeriesDataset(names, values, "", name, _stamps(length))


def smooth_latents(length: int, rank: int, rng: np.random.Generator, phi: float = 0.98,
                   period_range=(30.0, 80.0), seasonal: float = 1.0) -> np.ndarray:
    """``rank`` unit-variance latents: AR(1) drift plus a random-phase seasonal term."""
    t = np.arange(length, dtype=np.float64)
    rows = []
    for _ in range(rank):
        eps = rng.normal(size=length)
        ar = np.empty(length)
        ar[0] = eps[0]
        for i in range(1, length):
            ar[i] = phi * ar[i - 1] + np.sqrt(1.0 - phi * phi) * eps[i]
        period = rng.uniform(*period_range)
        row = ar + seasonal * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
        rows.append((row - row.mean()) / row.std())
    return np.vstack(rows)


def exogenous_driven(length: int = 8000, exo_channels: int = 7, targets: int = 2, rank: int = 2,
                     snr_db: float = 0.0, lag: int = 24, seed: int = 0, phi: float = 0.95,
                     seasonal: float = 0.0, name: str = "exodriven") -> tuple[TimeSeriesDataset, list[int], list[int]]:
    """Targets that trail a rank-``rank`` latent seen only through noisy exogenous variates.

    Exogenous channel i is ``a_i . z(t)`` plus white noise at ``snr_db``
    per-channel SNR; target j is ``b_j . z(t - lag)`` without noise, so the
    first ``lag`` forecast steps are only knowable from the exogenous window.
    Returns the dataset plus the endogenous and exogenous row indices.
    """
    rng = np.random.default_rng(seed)
    z = smooth_latents(length + lag, rank, rng, phi=phi, seasonal=seasonal)
    a = rng.normal(size=(exo_channels, rank))
    b = rng.normal(size=(targets, rank))
    signal = a @ z[:, lag:]
    noise_std = np.sqrt(signal.var(axis=1) / 10.0 ** (snr_db / 10.0))
    exo = signal + noise_std[:, None] * rng.normal(size=signal.shape)
    endo = b @ z[:, :length]
    values = np.vstack([endo, exo])
    names = [f"y{j}" for j in range(targets)] + [f"x{i}" for i in range(exo_channels)]
    ds = TimeSeriesDataset(names, values, "", name, _stamps(length))
    return ds, list(range(targets)), list(range(targets, targets + exo_channels))
