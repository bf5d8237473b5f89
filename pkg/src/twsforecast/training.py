"""MSE objective, Adam, and the epoch loop with early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ForecastSample, stack
from .forecaster import Forecaster
from .tensor import Tape, Tensor, as_tensor, backward, reduce_mean, square

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Loss or gradients went non-finite; carries the last good state."""

    def __init__(self, message: str, best_state: dict | None, report: "TrainReport"):
        super().__init__(message)
        self.best_state = best_state
        self.report = report


def mse_loss(pred, target) -> Tensor:
    """Mean squared error over every element (channels x horizon, and batch if present)."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return reduce_mean(square(pred - target))


@dataclass
class Adam:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, Tensor]) -> None:
        """Bias-corrected Adam update from each parameter's ``grad``."""
        for name, p in params.items():
            if p.grad is None:
                raise ValueError(f"parameter {name} has no gradient")
            if not np.isfinite(p.grad).all():
                bad = int((~np.isfinite(p.grad)).sum())
                raise FloatingPointError(f"non-finite gradient in {name} ({bad} entries)")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = p.grad
            if name not in self.m:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 before any epoch finishes
    stop_reason: str = "completed"
    steps: int = 0

    @property
    def best_val(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else math.inf

    def to_tsv(self) -> str:
        lines = ["epoch\ttrain_mse\tval_mse"]
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            lines.append(f"{i}\t{tr!r}\t{va!r}")
        lines.append(f"# best_epoch={self.best_epoch} stop_reason={self.stop_reason} steps={self.steps}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "TrainReport":
        rep = cls()
        for line in text.splitlines()[1:]:
            if line.startswith("#"):
                kv = dict(tok.split("=", 1) for tok in line[1:].split())
                rep.best_epoch = int(kv["best_epoch"])
                rep.stop_reason = kv["stop_reason"]
                rep.steps = int(kv["steps"])
            elif line.strip():
                _, tr, va = line.split("\t")
                rep.train_loss.append(float(tr))
                rep.val_loss.append(float(va))
        return rep

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv())


class EarlyStopping:
    """Counts epochs without strict improvement of the monitored loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record ``loss`` for ``epoch``; True when training should stop."""
        if loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = loss, epoch, 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def batch_loss(model: Forecaster, samples: Sequence[ForecastSample]) -> float:
    """Mean of per-sample MSE in eval mode."""
    if not samples:
        raise ValueError("no samples to score")
    total = 0.0
    bs = model.config.batch_size
    for i in range(0, len(samples), bs):
        endo, exo, target = stack(samples[i:i + bs])
        pred = model.forward(endo, exo).data
        total += float(((pred - target) ** 2).mean(axis=(1, 2)).sum())
    return total / len(samples)


def train_step(model: Forecaster, opt: Adam, endo, exo, target, rng: np.random.Generator) -> float:
    with Tape() as tape:
        pred = model.forward(endo, exo, training=True, rng=rng)
        loss = mse_loss(pred, Tensor(target))
    backward(tape, loss, model.parameters())
    clip = model.config.grad_clip
    if clip > 0:
        norm = math.sqrt(sum(float((p.grad ** 2).sum()) for p in model.parameters()))
        if norm > clip:
            for p in model.parameters():
                p.grad *= clip / norm
    opt.step(model.params)
    return loss.item()


def train(model: Forecaster, train_samples: Sequence[ForecastSample],
          val_samples: Sequence[ForecastSample]) -> tuple[dict[str, np.ndarray], TrainReport]:
    """Fit ``model`` in place; returns the best-validation state and the report.

    The model is left holding the best state.
    """
    cfg = model.config
    if not train_samples or not val_samples:
        raise ValueError("train and validation sample sets must be non-empty")
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    drop_rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    opt = Adam(lr=cfg.lr)
    stopper = EarlyStopping(cfg.patience)
    report = TrainReport()
    best_state = model.state_dict()

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_samples))
        losses = []
        capped = False
        for i in range(0, len(order), cfg.batch_size):
            endo, exo, target = stack([train_samples[j] for j in order[i:i + cfg.batch_size]])
            try:
                loss = train_step(model, opt, endo, exo, target, drop_rng)
            except (FloatingPointError, ArithmeticError) as err:
                report.stop_reason = "diverged"
                model.load_state_dict(best_state)
                raise TrainingDiverged(str(err), best_state, report) from err
            if not math.isfinite(loss):
                report.stop_reason = "diverged"
                model.load_state_dict(best_state)
                raise TrainingDiverged(f"loss became {loss} at step {report.steps}", best_state, report)
            losses.append(loss)
            report.steps += 1
            if cfg.max_steps and report.steps >= cfg.max_steps:
                capped = True
                break
        val = batch_loss(model, val_samples)
        report.train_loss.append(float(np.mean(losses)))
        report.val_loss.append(val)
        stop = stopper.update(epoch, val)
        if stopper.best_epoch == epoch:
            best_state = model.state_dict()
        report.best_epoch = stopper.best_epoch
        log.info("epoch %d train %.6f val %.6f", epoch, report.train_loss[-1], val)
        if stop:
            report.stop_reason = "early_stopped"
            break
        if capped:
            report.stop_reason = "max_steps"
            break

    model.load_state_dict(best_state)
    return best_state, report
