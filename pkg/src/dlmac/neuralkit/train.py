from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateDataError, DivergenceError
from .model import cross_entropy
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 100
    early_stop_patience: int = 10
    validation_fraction: float = 0.2
    seed: int = 0
    class_weights: bool = True

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.early_stop_patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def add(self, **row):
        self.epochs.append(row)
        log.debug("epoch %(epoch)d train %(train_loss).4f val %(val_loss).4f", row)

    def column(self, key):
        return [row[key] for row in self.epochs]


def inverse_frequency_weights(targets, n_classes):
    counts = np.bincount(targets, minlength=n_classes).astype(np.float64)
    present = counts > 0
    w = np.zeros(n_classes)
    w[present] = targets.size / (present.sum() * counts[present])
    return w


def split_indices(n, fraction, rng):
    order = rng.permutation(n)
    n_val = min(max(1, int(round(n * fraction))), n - 1)
    return order[n_val:], order[:n_val]


def feature_range(x):
    return float(np.min(x)), float(np.max(x))


def train(model, features, targets, cfg: TrainConfig = TrainConfig()):
    """Fit ``model`` in place with Adam + cross-entropy and early stopping.

    ``targets`` are class values (members of ``model.class_values``).  The
    parameters of the epoch with the lowest validation loss are restored.
    Epoch 0 in the log is the untrained model.
    """
    x = np.asarray(features, dtype=np.float64)
    values = np.asarray(model.class_values)
    lookup = {v: i for i, v in enumerate(values)}
    try:
        y = np.array([lookup[int(v)] for v in np.asarray(targets)], dtype=np.int64)
    except KeyError as exc:
        raise DegenerateDataError(f"label {exc.args[0]} is not a model class") from None
    if y.size < 2:
        raise DegenerateDataError("need at least two samples")
    if np.unique(y).size < 2:
        raise DegenerateDataError("dataset holds a single class")

    rng = np.random.default_rng(cfg.seed)
    tr, va = split_indices(y.size, cfg.validation_fraction, rng)
    if model.norm is None:
        model.norm = feature_range(x[tr])
    weights = inverse_frequency_weights(y[tr], model.n_classes) if cfg.class_weights else None
    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    trace = TrainLog()

    def evaluate(idx):
        z = model.logits(x[idx])
        loss = cross_entropy(z, y[idx], weights)[0]
        acc = float(np.mean(np.argmax(z, axis=1) == y[idx]))
        return loss, acc

    def record(epoch):
        tl, ta = evaluate(tr)
        vl, vacc = evaluate(va)
        if not (np.isfinite(tl) and np.isfinite(vl)):
            raise DivergenceError(epoch)
        best = min(vl, trace.epochs[-1]["best_val_loss"]) if trace.epochs else vl
        trace.add(epoch=epoch, train_loss=tl, train_acc=ta, val_loss=vl, val_acc=vacc,
                  best_val_loss=best)
        return vl

    best_loss = record(0)
    best_params = model.copy_params()
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = tr[rng.permutation(tr.size)]
        for start in range(0, order.size, cfg.batch_size):
            b = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(x[b], y[b], weights)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            opt.step(grads)
        vl = record(epoch)
        if vl < best_loss:
            best_loss, best_params, stale = vl, model.copy_params(), 0
            trace.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                trace.stopped_early = True
                break
    for p, best in zip(model.params, best_params):
        for k in p:
            p[k][...] = best[k]
    return model, trace
