"""Network definitions: feature MLP, image CNN, and the fused variant.

All predictions pass through a softplus, so they are strictly positive.
`label_scale` multiplies the softplus output back into label units; it is
set by the trainer from the mean positive training label and serialized
with the weights (relative-error metrics are invariant to the pairing).
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    GlobalAvgPool,
    Layer,
    MaxPool2d,
    Relu,
    Softplus,
)

MLP_HIDDEN = (128, 64)
CNN_WIDTHS = (16, 32, 64)
LATENT_DIM = 128


def _collect(layers: list[Layer], what: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for layer in layers:
        for key, arr in getattr(layer, what)().items():
            if key in out:
                raise ValueError(f"duplicate parameter name {key}")
            out[key] = arr
    return out


class _Net:
    layers: list[Layer]

    def params(self) -> dict[str, np.ndarray]:
        return _collect(self.layers, "params")

    def grads(self) -> dict[str, np.ndarray]:
        return _collect(self.layers, "grads")

    def state(self) -> dict[str, np.ndarray]:
        return _collect(self.layers, "state")

    def arrays(self) -> dict[str, np.ndarray]:
        """Everything a checkpoint must hold: weights plus running stats."""
        return {**self.params(), **self.state()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        slots = {**self.params(), **self.state()}
        missing = set(slots) - set(arrays)
        if missing:
            raise ShapeMismatch(f"checkpoint missing arrays {sorted(missing)[:4]}")
        for key, slot in slots.items():
            src = arrays[key]
            if src.shape != slot.shape:
                raise ShapeMismatch(
                    f"{key}: checkpoint shape {src.shape} != model {slot.shape}"
                )
            slot[...] = src


class Mlp(_Net):
    """in_dim -> 128 -> 64 -> 1 with ReLU hidden units and softplus output."""

    def __init__(self, in_dim: int = 393, hidden: tuple[int, ...] = MLP_HIDDEN,
                 seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        self.in_dim = in_dim
        self.hidden = tuple(hidden)
        self.label_scale = 1.0
        self.layers = []
        prev = in_dim
        for i, width in enumerate(hidden):
            self.layers.append(Dense(prev, width, rng, name=f"fc{i}"))
            self.layers.append(Relu(name=f"relu{i}"))
            prev = width
        self.out_layer = Dense(prev, 1, rng, name="out")
        self.layers.append(self.out_layer)
        self.layers.append(Softplus(name="head"))

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = x
        for layer in self.layers:
            h = layer.forward(h, train=train)
        return h[:, 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        g = dy[:, None]
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, train=False) * self.label_scale


class CnnTrunk(_Net):
    """Three conv blocks (conv -> batch-norm -> 2x2 max-pool -> ReLU) with
    widths 16/32/64, adaptive average pooling, then an affine+ReLU latent of
    width 128 regardless of input resolution."""

    def __init__(self, seed: int, in_ch: int = 3,
                 widths: tuple[int, ...] = CNN_WIDTHS,
                 latent_dim: int = LATENT_DIM) -> None:
        rng = np.random.default_rng(seed)
        self.latent_dim = latent_dim
        self.layers = []
        prev = in_ch
        for i, width in enumerate(widths):
            self.layers.append(Conv2d(prev, width, rng, name=f"conv{i}"))
            self.layers.append(BatchNorm2d(width, name=f"bn{i}"))
            self.layers.append(MaxPool2d(name=f"pool{i}"))
            self.layers.append(Relu(name=f"crelu{i}"))
            prev = width
        self.layers.append(GlobalAvgPool(name="gap"))
        self.layers.append(Dense(prev, latent_dim, rng, name="latent"))
        self.layers.append(Relu(name="latent_relu"))

    def forward(self, images: np.ndarray, train: bool = False) -> np.ndarray:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeMismatch(f"expected (batch, 3, m, n) images, got {images.shape}")
        h = images.astype(np.float64, copy=False)
        for layer in self.layers:
            h = layer.forward(h, train=train)
        return h

    def backward(self, dlatent: np.ndarray) -> np.ndarray:
        g = dlatent
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g


class NaiveCnn(_Net):
    """CNN trunk plus an affine regression from the 128 latent features."""

    def __init__(self, seed: int = 0) -> None:
        self.trunk = CnnTrunk(seed)
        rng = np.random.default_rng(seed + 1)
        self.head = Dense(self.trunk.latent_dim, 1, rng, name="reg")
        self.act = Softplus(name="head")
        self.layers = self.trunk.layers + [self.head, self.act]
        self.label_scale = 1.0

    def forward(self, images: np.ndarray, train: bool = False
                ) -> tuple[np.ndarray, np.ndarray]:
        latent = self.trunk.forward(images, train=train)
        y = self.act.forward(self.head.forward(latent, train=train), train=train)
        return latent, y[:, 0]

    def backward(self, dy: np.ndarray) -> None:
        g = self.act.backward(dy[:, None])
        g = self.head.backward(g)
        self.trunk.backward(g)

    def predict(self, images: np.ndarray) -> np.ndarray:
        return self.forward(images, train=False)[1] * self.label_scale


class CnnAggr(_Net):
    """CNN trunk fused with the feature vector: affine (128 + n_features) -> 1.

    With the feature branch zeroed the head reduces to an affine map of the
    latent alone, so weights copied from a NaiveCnn head reproduce its
    forward values exactly.
    """

    def __init__(self, n_features: int = 393, seed: int = 0) -> None:
        self.trunk = CnnTrunk(seed)
        rng = np.random.default_rng(seed + 1)
        self.n_features = n_features
        self.head = Dense(self.trunk.latent_dim + n_features, 1, rng, name="aggr")
        self.act = Softplus(name="head")
        self.layers = self.trunk.layers + [self.head, self.act]
        self.label_scale = 1.0

    def forward(self, images: np.ndarray, feats: np.ndarray, train: bool = False
                ) -> tuple[np.ndarray, np.ndarray]:
        if feats.shape[1] != self.n_features:
            raise ShapeMismatch(
                f"expected {self.n_features} features, got {feats.shape[1]}"
            )
        latent = self.trunk.forward(images, train=train)
        fused = np.concatenate([latent, feats.astype(np.float64, copy=False)], axis=1)
        y = self.act.forward(self.head.forward(fused, train=train), train=train)
        return latent, y[:, 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Returns the gradient w.r.t. the feature branch."""
        g = self.act.backward(dy[:, None])
        g = self.head.backward(g)
        dlatent = g[:, : self.trunk.latent_dim]
        dfeats = g[:, self.trunk.latent_dim :]
        self.trunk.backward(dlatent)
        return dfeats

    def predict(self, images: np.ndarray, feats: np.ndarray) -> np.ndarray:
        return self.forward(images, feats, train=False)[1] * self.label_scale


def naive_predict(naive_rv: np.ndarray) -> np.ndarray:
    """The naive guess: tomorrow's minute looks like the last one."""
    return np.asarray(naive_rv, dtype=np.float64).copy()
