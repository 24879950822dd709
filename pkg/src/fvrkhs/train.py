"""Empirical-risk training for the operator networks.

1D families minimize the mean per-sample relative L2 error over the target
grid.  The Poisson family resamples 200 interior and 4 x 100 boundary points
every epoch and minimizes the mean squared error there.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import torch

from .checkpoint import Checkpoint, checkpoint_from_model
from .core import AdamState, LrSchedule, adam_step, as_tensor, backward, lr_at
from .data import OperatorDataset, poisson_dataset
from .deeponet import DeepONet, DeepONetConfig
from .errors import ConfigurationError, DimensionError, NumericalError
from .grid import grid_points
from .model import FieldOperator, ModelConfig, RKHSOperatorModel
from .solvers import poisson_amplitude, poisson_pair, poisson_source_grid

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 4000
    batch_size: int = 20
    schedule: LrSchedule = field(default_factory=LrSchedule)
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be non-negative")


def rel_l2(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-row ||pred - target|| / ||target||."""
    return (pred - target).norm(dim=-1) / target.norm(dim=-1)


def loss_rel_l2(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise DimensionError(f"prediction has {pred.size} values, target has {target.size}")
    norm = np.linalg.norm(target)
    if norm == 0.0:
        raise NumericalError("relative L2 error undefined for a zero target")
    return float(np.linalg.norm(pred - target) / norm)


def rms(x: np.ndarray) -> float:
    value = float(np.sqrt(np.mean(np.square(x))))
    return value if value > 0 else 1.0


def choose_anchors(n_train: int, n_anchors: int, seed: int) -> np.ndarray:
    """Seeded uniform draw of anchor indices; n_anchors <= 0 means all samples."""
    if n_anchors <= 0 or n_anchors >= n_train:
        return np.arange(n_train)
    return np.sort(np.random.default_rng([seed, 1]).choice(n_train, n_anchors, replace=False))


def build_model(kind: str, train: OperatorDataset, canonical_resolution: int | None = None,
                n_anchors: int = 128, seed: int = 0, **overrides) -> FieldOperator:
    """A fresh network whose normalization and anchors come from ``train``.

    Inputs are divided by the RMS of the training inputs and outputs are
    multiplied by the RMS of the training targets.
    """
    from .grid import resample_values

    res = canonical_resolution or train.resolution
    canon = resample_values(train.inputs, res, train.dim)
    scales = dict(input_scale=rms(canon), output_scale=rms(train.targets))
    if kind == "rkhs":
        idx = choose_anchors(train.n_samples, n_anchors, seed)
        cfg = ModelConfig(dim=train.dim, canonical_resolution=res, n_anchors=len(idx),
                          seed=seed, **{**scales, **overrides})
        return RKHSOperatorModel(cfg, canon[idx])
    if kind == "deeponet":
        cfg = DeepONetConfig(dim=train.dim, canonical_resolution=res, seed=seed,
                             **{**scales, **overrides})
        return DeepONet(cfg)
    raise ConfigurationError(f"unknown model kind {kind!r}")


class EpochRecord(NamedTuple):
    epoch: int
    lr: float
    loss: float


def _penalized(loss: torch.Tensor, params: dict, weight_decay: float) -> torch.Tensor:
    if weight_decay == 0.0:
        return loss
    return loss + weight_decay * sum((p * p).sum() for p in params.values())


def _finish(model: FieldOperator, cfg: TrainConfig, history: list[EpochRecord],
            extra: dict) -> Checkpoint:
    meta = dict(epoch=cfg.epochs, seed=cfg.seed,
                final_loss=history[-1].loss if history else None,
                loss_history=[r.loss for r in history],
                weight_decay=cfg.weight_decay, batch_size=cfg.batch_size, **extra)
    return checkpoint_from_model(model, meta)


def _check(loss: torch.Tensor, epoch: int, batch: int) -> None:
    if not torch.isfinite(loss):
        raise NumericalError(f"non-finite loss at epoch {epoch}, batch {batch}")


def train(model: FieldOperator, train_set: OperatorDataset, cfg: TrainConfig,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> Checkpoint:
    """Adam on the mean relative L2 loss over the training grid (1D families)."""
    if train_set.dim != model.config.dim:
        raise DimensionError(f"{train_set.dim}D data for a {model.config.dim}D model")
    torch.manual_seed(cfg.seed)
    inputs = model.prepare_inputs(train_set.inputs)
    targets = as_tensor(train_set.targets).reshape(train_set.n_samples, -1)
    points = as_tensor(grid_points(train_set.resolution, train_set.dim).reshape(-1, train_set.dim))
    params = dict(model.named_parameters())
    state = AdamState()
    rng = np.random.default_rng([cfg.seed, 2])
    history: list[EpochRecord] = []
    n = train_set.n_samples
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg.schedule)
        perm = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = torch.as_tensor(perm[start:start + cfg.batch_size])
            pred = model.forward_batch(inputs[idx], points)
            loss = rel_l2(pred, targets[idx]).mean()
            _check(loss, epoch, b)
            grads = backward(_penalized(loss, params, cfg.weight_decay), params)
            adam_step(params, grads, state, lr)
            total += loss.item() * len(idx)
        rec = EpochRecord(epoch, lr, total / n)
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if epoch % 100 == 0 or epoch == cfg.epochs - 1:
            log.info("epoch %d lr %.3g loss %.5f (%.1fs)", epoch, lr, rec.loss,
                     time.perf_counter() - t0)
    return _finish(model, cfg, history, dict(pde=train_set.pde,
                                             train_resolution=train_set.resolution))


class PoissonBatch(NamedTuple):
    fields: np.ndarray   # (K, P, P) source grids
    points: np.ndarray   # (n_points, 2), shared by every source
    targets: np.ndarray  # (K, n_points)


def sample_poisson_points(rng: np.random.Generator, n_interior: int = 200,
                          n_per_side: int = 100) -> np.ndarray:
    interior = rng.random((n_interior, 2))
    r = rng.random((4, n_per_side))
    zeros, ones = np.zeros(n_per_side), np.ones(n_per_side)
    sides = [np.stack([zeros, r[0]], 1), np.stack([ones, r[1]], 1),
             np.stack([r[2], zeros], 1), np.stack([r[3], ones], 1)]
    return np.concatenate([interior] + sides)


def sample_poisson_batch(a_values, seed: int, epoch: int, resolution: int = 64,
                         n_interior: int = 200, n_per_side: int = 100) -> PoissonBatch:
    """One epoch of Poisson training data.

    Every source is paired with the same freshly drawn point set: 200
    interior points and 100 points on each side of the square, so 600
    points per source with zero targets on the boundary.
    """
    a_values = np.atleast_1d(np.asarray(a_values, dtype=np.float64))
    rng = np.random.default_rng([seed, 3, epoch])
    pts = sample_poisson_points(rng, n_interior, n_per_side)
    fields = np.stack([poisson_source_grid(a, resolution) for a in a_values])
    targets = np.stack([poisson_pair(a, pts)[1] for a in a_values])
    targets[:, n_interior:] = 0.0
    return PoissonBatch(fields, pts, targets)


def train_poisson(model: FieldOperator, a_values, cfg: TrainConfig,
                  on_epoch: Callable[[EpochRecord], None] | None = None) -> Checkpoint:
    """Adam on the point-sampled mean squared error, one draw of points per epoch.

    Sources are visited in mini-batches of ``cfg.batch_size`` (all ten in
    one step with the default batch size).
    """
    torch.manual_seed(cfg.seed)
    a_values = np.atleast_1d(np.asarray(a_values, dtype=np.float64))
    res = model.config.canonical_resolution
    params = dict(model.named_parameters())
    state = AdamState()
    rng = np.random.default_rng([cfg.seed, 2])
    history: list[EpochRecord] = []
    inputs_all = model.prepare_inputs(np.stack([poisson_source_grid(a, res) for a in a_values]))
    k = len(a_values)
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg.schedule)
        batch = sample_poisson_batch(a_values, cfg.seed, epoch, res)
        points = as_tensor(batch.points)
        targets = as_tensor(batch.targets)
        perm = rng.permutation(k)
        total = 0.0
        for b, start in enumerate(range(0, k, cfg.batch_size)):
            idx = torch.as_tensor(perm[start:start + cfg.batch_size])
            pred = model.forward_batch(inputs_all[idx], points)
            loss = ((pred - targets[idx]) ** 2).mean()
            _check(loss, epoch, b)
            grads = backward(_penalized(loss, params, cfg.weight_decay), params)
            adam_step(params, grads, state, lr)
            total += loss.item() * len(idx)
        rec = EpochRecord(epoch, lr, total / k)
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if epoch % 100 == 0 or epoch == cfg.epochs - 1:
            log.info("epoch %d lr %.3g mse %.3g (%.1fs)", epoch, lr, rec.loss,
                     time.perf_counter() - t0)
    return _finish(model, cfg, history, dict(pde="poisson", train_resolution=res,
                                             a_values=[float(a) for a in a_values]))


def poisson_training_set(a_values, resolution: int = 64) -> OperatorDataset:
    return poisson_dataset(a_values, resolution)


def amplitudes_of(ds: OperatorDataset) -> np.ndarray:
    return np.array([poisson_amplitude(f) for f in ds.inputs])


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "lr", "loss"])
        for rec in history:
            w.writerow([rec.epoch, repr(rec.lr), repr(rec.loss)])
