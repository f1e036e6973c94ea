"""Mini-batch SGD training with validation-based checkpointing, and evaluation."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional
import csv
import logging
import math

import numpy as np

from . import checkpoint
from .checkpoint import CheckpointMeta
from .errors import BatchTooLargeError, DivergenceError, EmptySplitError, NoNegativesError
from .labels import CLASS_NAMES, FaultLabel
from .nn.layers import softmax_crossentropy
from .nn.optim import SGD
from .synth import Split

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "iteration", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.0
    shuffle_seed: int = 0
    val_accuracy_save_threshold: float = 0.99

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 2 or self.learning_rate < 0:
            raise ValueError(f"invalid training config {self}")


@dataclass
class TrainHistory:
    iteration_epoch: List[int] = field(default_factory=list)
    iteration_loss: List[float] = field(default_factory=list)
    iteration_acc: List[float] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_acc: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None


@dataclass
class TrainResult:
    history: TrainHistory
    best_checkpoint: Optional[bytes]
    final_checkpoint: bytes


@dataclass
class EvalResult:
    confusion: np.ndarray
    accuracy: float
    loss: float


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def batch_slices(n, batch_size):
    """Full batches, plus a ragged final batch of >= 2; a single leftover joins the last batch."""
    if n < 1:
        raise EmptySplitError("no training samples")
    if batch_size > n:
        raise BatchTooLargeError(f"batch size {batch_size} exceeds {n} training samples")
    bounds = list(range(0, n - n % batch_size + 1, batch_size))
    rem = n % batch_size
    if rem >= 2:
        bounds.append(n)
    elif rem == 1:
        bounds[-1] = n
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def confusion_matrix(y_true, y_pred, classes=5):
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def accuracy(cm):
    total = cm.sum()
    return float(np.trace(cm) / total) if total else math.nan


def fpr_normal(cm):
    """Share of truly faulty samples predicted Normal (the missed-fault rate)."""
    faulty = cm[1:].sum()
    if faulty == 0:
        raise NoNegativesError("no faulty samples in the confusion matrix")
    return float(cm[1:, FaultLabel.NORMAL].sum() / faulty)


def normal_false_alarm_rate(cm):
    """Share of truly Normal samples predicted as some fault."""
    normal = cm[FaultLabel.NORMAL].sum()
    if normal == 0:
        raise NoNegativesError("no Normal samples in the confusion matrix")
    return float((normal - cm[FaultLabel.NORMAL, FaultLabel.NORMAL]) / normal)


def precision_recall(cm):
    tp = np.diag(cm).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = tp / cm.sum(axis=0)
        recall = tp / cm.sum(axis=1)
    return precision, recall


def predict(model, x, batch_size=256):
    """Argmax class per sample; ties resolve to the lowest class code."""
    probs = model.predict_proba(x, batch_size)
    return np.argmax(probs, axis=1), probs


def evaluate(model, data, split=Split.TEST, batch_size=256):
    x, y = data.subset(split)
    if y.size == 0:
        raise EmptySplitError(f"{Split(split).name.lower()} split is empty")
    pred, probs = predict(model, x, batch_size)
    cm = confusion_matrix(y, pred, model.config.classes)
    p = np.clip(probs[np.arange(y.size), y], 1e-300, None)
    return EvalResult(confusion=cm, accuracy=accuracy(cm), loss=float(-np.mean(np.log(p))))


def train(model, data, cfg, seed=None, on_epoch=None):
    """Train ``model`` in place on the training split.

    Each epoch shuffles with a generator keyed on (shuffle_seed, epoch);
    dropout masks use a second stream with the same key. After every epoch
    the validation split is scored in infer mode, and a checkpoint is kept
    whenever validation accuracy reaches the threshold and beats the best
    so far. The final model is always checkpointed.
    """
    x_train, y_train = data.subset(Split.TRAIN)
    if y_train.size == 0:
        raise EmptySplitError("training split is empty")
    slices = batch_slices(y_train.size, cfg.batch_size)
    seed = cfg.shuffle_seed if seed is None else seed
    has_val = data.indices(Split.VAL).size > 0
    opt = SGD(cfg.learning_rate, cfg.momentum)
    hist = TrainHistory()
    best_acc = -math.inf
    best_ckpt = None

    def meta(epoch, val_acc):
        return CheckpointMeta(epoch=epoch, val_accuracy=val_acc, seed=seed,
                              stats=data.stats, sample_rate_hz=data.sample_rate_hz)

    for epoch in range(1, cfg.epochs + 1):
        order = _rng(cfg.shuffle_seed, epoch, 0).permutation(y_train.size)
        drop_rng = _rng(cfg.shuffle_seed, epoch, 1)
        losses, correct = [], 0
        for sl in slices:
            idx = order[sl]
            xb, yb = x_train[idx], y_train[idx]
            loss, grads, probs = model.loss_and_grads(xb, yb, rng=drop_rng)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, iteration {len(hist.iteration_loss) + 1}")
            opt.step(model.params, grads)
            hits = int(np.sum(np.argmax(probs, axis=1) == yb))
            correct += hits
            losses.append(loss)
            hist.iteration_epoch.append(epoch)
            hist.iteration_loss.append(loss)
            hist.iteration_acc.append(hits / yb.size)
        hist.train_loss.append(float(np.average(losses, weights=[s.stop - s.start for s in slices])))
        hist.train_acc.append(correct / y_train.size)
        if has_val:
            res = evaluate(model, data, Split.VAL)
            hist.val_loss.append(res.loss)
            hist.val_acc.append(res.accuracy)
            if res.accuracy >= cfg.val_accuracy_save_threshold and res.accuracy > best_acc:
                best_acc = res.accuracy
                best_ckpt = checkpoint.dumps(model, meta(epoch, res.accuracy))
                hist.best_epoch = epoch
        else:
            hist.val_loss.append(math.nan)
            hist.val_acc.append(math.nan)
        log.info("epoch %d: train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f",
                 epoch, hist.train_loss[-1], hist.train_acc[-1], hist.val_loss[-1], hist.val_acc[-1])
        if on_epoch is not None:
            on_epoch(epoch, hist)
    final = checkpoint.dumps(model, meta(cfg.epochs, hist.val_acc[-1]))
    return TrainResult(history=hist, best_checkpoint=best_ckpt, final_checkpoint=final)


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def export_history(hist, path):
    """CSV with one row per iteration followed by that epoch's summary row (blank iteration)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        it = 0
        for e in range(len(hist.train_loss)):
            epoch = e + 1
            while it < len(hist.iteration_loss) and hist.iteration_epoch[it] == epoch:
                w.writerow((epoch, it + 1, _fmt(hist.iteration_loss[it]), _fmt(hist.iteration_acc[it]), "", ""))
                it += 1
            w.writerow((epoch, "", _fmt(hist.train_loss[e]), _fmt(hist.train_acc[e]),
                        _fmt(hist.val_loss[e]), _fmt(hist.val_acc[e])))


def export_confusion(cm, path, names=CLASS_NAMES):
    """Integer grid, rows = true class, columns = predicted, with class-name headers."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("true\\predicted",) + tuple(names))
        for name, row in zip(names, cm):
            w.writerow((name,) + tuple(int(v) for v in row))


def read_confusion(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[int(v) for v in row[1:]] for row in rows[1:]], dtype=np.int64)
