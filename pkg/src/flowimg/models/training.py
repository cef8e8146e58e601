"""Deterministic from-scratch training loop.

Loss is mean squared percentage error, ((yhat - y) / y)^2 averaged over
samples with y > 0; zero-label samples get weight zero. Optimization is
momentum SGD with a fixed batch order drawn from the config seed, so the
trained weights are a pure function of (seed, data, config).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss
from .nets import CnnAggr, Mlp, NaiveCnn


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    momentum: float = 0.9
    patience: int = 5           # early stop on validation RMSPE
    loss: str = "mspe"

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "momentum": self.momentum,
            "patience": self.patience,
            "loss": self.loss,
        }


def mspe_loss(yhat: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """(loss, dloss/dyhat); samples with y <= 0 carry zero weight."""
    mask = y > 0.0
    n = int(mask.sum())
    if n == 0:
        return 0.0, np.zeros_like(yhat)
    safe = np.where(mask, y, 1.0)
    rel = np.where(mask, (yhat - y) / safe, 0.0)
    loss = float(np.dot(rel, rel) / n)
    grad = 2.0 * rel / (safe * n)
    return loss, grad


def _rmspe(yhat: np.ndarray, y: np.ndarray) -> float:
    mask = y > 0.0
    if not mask.any():
        return float("nan")
    rel = (yhat[mask] - y[mask]) / y[mask]
    return float(math.sqrt(float(np.mean(rel * rel))))


def softplus_inverse(y: float) -> float:
    # ln(e^y - 1), stable for small and large y
    if y <= 0.0:
        raise ValueError("softplus output is strictly positive")
    if y > 30.0:
        return y
    return math.log(math.expm1(y))


class MomentumSgd:
    def __init__(self, params: dict[str, np.ndarray], lr: float, momentum: float) -> None:
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for key, p in self.params.items():
            v = self.velocity[key]
            v *= self.momentum
            v -= self.lr * grads[key]
            p += v


@dataclass
class TrainResult:
    best_val_rmspe: float
    train_rmspe: float
    epochs_run: int
    label_scale: float
    history: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "best_val_rmspe": self.best_val_rmspe,
            "train_rmspe": self.train_rmspe,
            "epochs_run": self.epochs_run,
            "label_scale": self.label_scale,
            "history": list(self.history),
        }


def _label_scale(y_train: np.ndarray) -> float:
    pos = y_train[y_train > 0.0]
    return float(pos.mean()) if pos.size else 1.0


def _init_output_bias(model, y_scaled: np.ndarray) -> None:
    pos = y_scaled[y_scaled > 0.0]
    if pos.size == 0:
        return
    bias = softplus_inverse(float(pos.mean()))
    head = getattr(model, "out_layer", None) or getattr(model, "head")
    head.b[...] = bias


def _snapshot(model) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in {**model.params(), **model.state()}.items()}


def _restore(model, snap: dict[str, np.ndarray]) -> None:
    for key, arr in {**model.params(), **model.state()}.items():
        arr[...] = snap[key]


def _train_loop(
    model,
    forward_batch,          # (idx, train) -> yhat in scaled units
    n_train: int,
    y_train_scaled: np.ndarray,
    val_predict,            # () -> yhat over the validation set, scaled units
    y_val_scaled: np.ndarray,
    cfg: TrainConfig,
) -> TrainResult:
    if cfg.loss != "mspe":
        raise ValueError(f"unsupported loss {cfg.loss!r}")
    rng = np.random.default_rng(cfg.seed)
    opt = MomentumSgd(model.params(), cfg.lr, cfg.momentum)

    best_val = math.inf
    best_snap = _snapshot(model)
    best_epoch = 0
    stale = 0
    history: list[dict] = []
    train_rmspe = float("nan")

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n_train, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            yhat = forward_batch(idx, True)
            loss, dy = mspe_loss(yhat, y_train_scaled[idx])
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}: loss {loss!r}")
            model.backward(dy)
            opt.step(model.grads())
            epoch_loss += loss
            batches += 1

        val_rmspe = _rmspe(val_predict(), y_val_scaled)
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / max(batches, 1),
            "val_rmspe": val_rmspe,
        })
        if math.isnan(val_rmspe) or val_rmspe < best_val - 1e-12:
            if not math.isnan(val_rmspe):
                best_val = val_rmspe
            best_snap = _snapshot(model)
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break

    _restore(model, best_snap)
    final_train = _batched(
        lambda sl: forward_batch(np.arange(n_train)[sl], False),
        n_train, cfg.batch_size,
    )
    train_rmspe = _rmspe(final_train, y_train_scaled)
    return TrainResult(
        best_val_rmspe=best_val if math.isfinite(best_val) else float("nan"),
        train_rmspe=train_rmspe,
        epochs_run=best_epoch + 1,
        label_scale=model.label_scale,
        history=history,
    )


def train_mlp(
    x_train: np.ndarray, y_train: np.ndarray,
    x_val: np.ndarray, y_val: np.ndarray,
    cfg: TrainConfig,
) -> tuple[Mlp, TrainResult]:
    model = Mlp(in_dim=x_train.shape[1], seed=cfg.seed)
    scale = _label_scale(y_train)
    model.label_scale = scale
    ys = y_train / scale
    yvs = y_val / scale
    _init_output_bias(model, ys)
    xt = x_train.astype(np.float64, copy=False)
    xv = x_val.astype(np.float64, copy=False)

    result = _train_loop(
        model,
        lambda idx, train: model.forward(xt[idx], train=train),
        len(ys), ys,
        lambda: model.forward(xv, train=False),
        yvs, cfg,
    )
    return model, result


def train_naive_cnn(
    img_train: np.ndarray, y_train: np.ndarray,
    img_val: np.ndarray, y_val: np.ndarray,
    cfg: TrainConfig,
) -> tuple[NaiveCnn, TrainResult]:
    model = NaiveCnn(seed=cfg.seed)
    scale = _label_scale(y_train)
    model.label_scale = scale
    ys = y_train / scale
    yvs = y_val / scale
    _init_output_bias(model, ys)

    def val_predict() -> np.ndarray:
        return _batched(lambda sl: model.forward(img_val[sl], train=False)[1],
                        len(yvs), cfg.batch_size)

    result = _train_loop(
        model,
        lambda idx, train: model.forward(img_train[idx], train=train)[1],
        len(ys), ys,
        val_predict,
        yvs, cfg,
    )
    return model, result


def train_cnn_aggr(
    img_train: np.ndarray, feat_train: np.ndarray, y_train: np.ndarray,
    img_val: np.ndarray, feat_val: np.ndarray, y_val: np.ndarray,
    cfg: TrainConfig,
) -> tuple[CnnAggr, TrainResult]:
    model = CnnAggr(n_features=feat_train.shape[1], seed=cfg.seed)
    scale = _label_scale(y_train)
    model.label_scale = scale
    ys = y_train / scale
    yvs = y_val / scale
    _init_output_bias(model, ys)

    def val_predict() -> np.ndarray:
        return _batched(
            lambda sl: model.forward(img_val[sl], feat_val[sl], train=False)[1],
            len(yvs), cfg.batch_size,
        )

    result = _train_loop(
        model,
        lambda idx, train: model.forward(img_train[idx], feat_train[idx],
                                         train=train)[1],
        len(ys), ys,
        val_predict,
        yvs, cfg,
    )
    return model, result


def _batched(fn, n: int, batch_size: int) -> np.ndarray:
    parts = [fn(slice(lo, lo + batch_size)) for lo in range(0, n, batch_size)]
    return np.concatenate(parts) if parts else np.empty(0)
