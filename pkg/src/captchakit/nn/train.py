"""Mini-batch training loop with SGD+momentum and Adam.

The loop is fully deterministic given (spec, data, config): one Rng seeded
from the config drives initialization, epoch shuffles, and dropout masks in
that order. Multi-head losses are the sum of per-head cross-entropies, and
the returned model carries the weights of the best full-string validation
epoch (strictly better to replace, so earlier epochs win ties).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..rng import Rng
from .layers import softmax_xent
from .model import Model, ModelSpec, build_model, predict_strings

OPTIMIZERS = ("sgd", "adam")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lr < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.lr}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError(
                f"batch_size and epochs must be >= 1, got {self.batch_size}, {self.epochs}"
            )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    head_acc: tuple[float, ...]
    full_acc: float


class _Sgd:
    def __init__(self, cfg: TrainConfig, params):
        self.lr = cfg.lr
        self.mu = cfg.momentum
        self.vel = {name: np.zeros_like(p) for name, p in params}

    def step(self, params, grads):
        g = dict(grads)
        for name, p in params:
            v = self.vel[name]
            v *= self.mu
            v -= self.lr * g[name]
            p += v


class _Adam:
    def __init__(self, cfg: TrainConfig, params):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params}
        self.v = {name: np.zeros_like(p) for name, p in params}

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        g = dict(grads)
        for name, p in params:
            m, v = self.m[name], self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g[name]
            v *= c.beta2
            v += (1.0 - c.beta2) * g[name] * g[name]
            p -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def encode_labels(labels: list[str], charset: str, length: int) -> np.ndarray:
    """Label strings to an (n, length) array of charset indices; any bad
    string is reported before training touches a batch."""
    lut = {ch: i for i, ch in enumerate(charset)}
    out = np.zeros((len(labels), length), dtype=np.int32)
    for i, lab in enumerate(labels):
        if len(lab) != length:
            raise ValueError(f"label {i} is {lab!r}, expected length {length}")
        for j, ch in enumerate(lab):
            if ch not in lut:
                raise ValueError(f"label {i} ({lab!r}) has {ch!r} outside the charset")
            out[i, j] = lut[ch]
    return out


def _check_ids(name: str, ys: np.ndarray, n_heads: int, n_classes: int) -> np.ndarray:
    ys = np.asarray(ys)
    if ys.ndim != 2 or ys.shape[1] != n_heads:
        raise ValueError(f"{name} labels must be (n, {n_heads}), got {ys.shape}")
    if ys.size and (ys.min() < 0 or ys.max() >= n_classes):
        raise ValueError(f"{name} labels must be class ids in [0, {n_classes})")
    return ys.astype(np.int32)


def evaluate(model: Model, xs, y_ids, batch_size: int = 256) -> tuple[tuple[float, ...], float]:
    """Per-head and full-string accuracy in inference mode."""
    n = len(xs)
    n_heads = len(model.heads)
    head_hits = np.zeros(n_heads, dtype=np.int64)
    full_hits = 0
    for lo in range(0, n, batch_size):
        logits = model.forward(xs[lo : lo + batch_size], training=False)
        truth = y_ids[lo : lo + batch_size]
        ok = np.ones(len(truth), dtype=bool)
        for j, lg in enumerate(logits):
            hit = lg.argmax(axis=1) == truth[:, j]
            head_hits[j] += int(hit.sum())
            ok &= hit
        full_hits += int(ok.sum())
    return tuple(float(h) / n for h in head_hits), full_hits / n


def train(
    spec: ModelSpec,
    train_xs,
    train_ys,
    val_xs,
    val_ys,
    cfg: TrainConfig,
) -> tuple[Model, list[EpochStats]]:
    """Returns the model at its best full-string validation accuracy along
    with per-epoch statistics. `train_ys`/`val_ys` are (n, n_heads) class
    id arrays (see encode_labels)."""
    n_classes = len(spec.charset)
    train_ys = _check_ids("train", train_ys, spec.n_heads, n_classes)
    val_ys = _check_ids("val", val_ys, spec.n_heads, n_classes)
    if len(train_xs) != len(train_ys) or len(val_xs) != len(val_ys):
        raise ValueError("images and labels disagree in length")
    if len(train_xs) == 0 or len(val_xs) == 0:
        raise ValueError("train and val splits must be non-empty")

    rng = Rng(cfg.seed)
    model = build_model(spec, rng)
    xs = np.asarray(train_xs, dtype=model.dtype)
    eye = np.eye(n_classes, dtype=model.dtype)
    opt = (_Sgd if cfg.optimizer == "sgd" else _Adam)(cfg, model.param_items())

    history: list[EpochStats] = []
    best_acc = -1.0
    best_state = None
    order = np.arange(len(xs))
    for epoch in range(1, cfg.epochs + 1):
        rng.shuffle(order)
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            logits = model.forward(xs[batch], training=True, rng=rng)
            total = 0.0
            dlogits = []
            for j, lg in enumerate(logits):
                loss_j, dl = softmax_xent(lg, eye[train_ys[batch, j]])
                total += loss_j
                dlogits.append(dl)
            model.backward(dlogits)
            opt.step(model.param_items(), model.grad_items())
            losses.append(total)
        head_acc, full_acc = evaluate(model, val_xs, val_ys)
        history.append(EpochStats(epoch, float(np.mean(losses)), head_acc, full_acc))
        if full_acc > best_acc:
            best_acc = full_acc
            best_state = model.snapshot()
    model.restore(best_state)
    return model, history


def history_to_csv(history: list[EpochStats], path) -> None:
    n_heads = len(history[0].head_acc) if history else 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["epoch", "train_loss"]
            + [f"head{j}_val_acc" for j in range(n_heads)]
            + ["full_val_acc"]
        )
        for row in history:
            writer.writerow(
                [row.epoch, f"{row.train_loss:.6f}"]
                + [f"{a:.6f}" for a in row.head_acc]
                + [f"{row.full_acc:.6f}"]
            )
