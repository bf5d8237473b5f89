"""Symmetric eigendecomposition (cyclic Jacobi) and covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EigenDecomposition", "ConvergenceError", "covariance", "eigh", "round_robin_pairs"]

MAX_SWEEPS = 100
REL_TOL = 1e-12


class ConvergenceError(ArithmeticError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"Jacobi did not converge in {sweeps} sweeps (off-diagonal norm {residual:.3e})")
        self.residual = residual
        self.sweeps = sweeps


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # (N,), descending
    eigenvectors: np.ndarray  # (N, N), column i pairs with eigenvalues[i]
    sweeps: int = 0


def covariance(centered: np.ndarray) -> np.ndarray:
    """Sample covariance ``X X^T / (L - 1)`` of row-wise centered data (features x time)."""
    x = np.asarray(centered, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D features x time array, got shape {x.shape}")
    if x.shape[1] < 2:
        raise ValueError(f"covariance needs at least 2 time steps, got {x.shape[1]}")
    cov = x @ x.T / (x.shape[1] - 1)
    return 0.5 * (cov + cov.T)


def round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds (n even) of disjoint (p, q) pairs, p < q.

    Every unordered pair appears exactly once per sweep, so one pass over the
    rounds is a complete cyclic sweep. Odd n gets a dummy player that sits out.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eigh(sym: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each round of the sweep applies a set of disjoint rotations at once, which
    is the same as applying them one after another since they commute.
    Eigenvalues come back descending; each eigenvector is signed so that its
    largest-magnitude entry (lowest index on ties) is positive.
    """
    a = np.array(sym, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eigh needs a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    target = REL_TOL * float(np.linalg.norm(a))
    rounds = round_robin_pairs(n) if n > 1 else []

    sweeps = 0
    off = _off_norm(a)
    while off > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(off, sweeps)
        for p, q in rounds:
            _rotate(a, v, p, q)
        sweeps += 1
        off = _off_norm(a)

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals, v = vals[order], v[:, order]
    pivots = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[pivots, np.arange(n)] < 0, -1.0, 1.0)
    return EigenDecomposition(vals, v * signs, sweeps)


def _rotate(a: np.ndarray, v: np.ndarray, p: np.ndarray, q: np.ndarray) -> None:
    apq = a[p, q]
    active = apq != 0.0
    if not active.any():
        return
    p, q, apq = p[active], q[active], apq[active]
    with np.errstate(over="ignore"):
        tau = (a[q, q] - a[p, p]) / (2.0 * apq)
    sign = np.where(tau >= 0, 1.0, -1.0)
    t = sign / (np.abs(tau) + np.hypot(1.0, tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    # A <- J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
    ap, aq = a[:, p].copy(), a[:, q].copy()
    a[:, p] = c * ap - s * aq
    a[:, q] = s * ap + c * aq
    ap, aq = a[p, :].copy(), a[q, :].copy()
    a[p, :] = c[:, None] * ap - s[:, None] * aq
    a[q, :] = s[:, None] * ap + c[:, None] * aq
    a[p, q] = 0.0
    a[q, p] = 0.0

    vp, vq = v[:, p].copy(), v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq
