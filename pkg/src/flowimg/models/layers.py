"""Plain-numpy layers with explicit forward/backward passes.

Everything is float64. Each layer owns its parameters and gradient buffers;
`backward` consumes the upstream gradient and returns the gradient w.r.t.
its input. Caches from the last forward pass are kept on the layer, so a
backward call must follow its matching forward call.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


class Layer:
    name: str = "layer"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trainable buffers (e.g. batch-norm running stats)."""
        return {}


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 name: str = "dense") -> None:
        self.name = name
        # He initialization; every draw order is fixed by construction order
        scale = np.sqrt(2.0 / in_dim)
        self.w = rng.standard_normal((in_dim, out_dim)) * scale
        self.b = np.zeros(out_dim)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.shape[1] != self.w.shape[0]:
            raise ShapeMismatch(
                f"{self.name}: input width {x.shape[1]} != {self.w.shape[0]}"
            )
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._x
        self.dw[...] = x.T @ grad
        self.db[...] = grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def grads(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class Relu(Layer):
    def __init__(self, name: str = "relu") -> None:
        self.name = name
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad, 0.0)


class Softplus(Layer):
    """ln(1 + e^x), numerically stable; keeps predictions strictly positive."""

    def __init__(self, name: str = "softplus") -> None:
        self.name = name
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._x
        sig = np.empty_like(x)
        pos = x >= 0
        sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        enx = np.exp(x[~pos])
        sig[~pos] = enx / (1.0 + enx)
        return grad * sig


class Conv2d(Layer):
    """3x3 same-padding stride-1 convolution via im2col."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 kernel: int = 3, name: str = "conv") -> None:
        if kernel % 2 != 1:
            raise ValueError("odd kernels only")
        self.name = name
        self.kernel = kernel
        self.pad = kernel // 2
        scale = np.sqrt(2.0 / (in_ch * kernel * kernel))
        self.w = rng.standard_normal((out_ch, in_ch, kernel, kernel)) * scale
        self.b = np.zeros(out_ch)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cols: np.ndarray | None = None
        self._xshape: tuple | None = None

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        k, p = self.kernel, self.pad
        b, c, h, w = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (b,c,h,w,k,k)
        return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * k * k, h * w)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        b, c, h, w = x.shape
        if c != self.w.shape[1]:
            raise ShapeMismatch(f"{self.name}: {c} channels, expected {self.w.shape[1]}")
        cols = self._im2col(x)
        self._cols = cols
        self._xshape = x.shape
        wmat = self.w.reshape(self.w.shape[0], -1)
        out = np.matmul(wmat, cols) + self.b[:, None]
        return out.reshape(b, self.w.shape[0], h, w)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        b, f, h, w = grad.shape
        k, p = self.kernel, self.pad
        _, c, hh, ww = self._xshape
        gmat = grad.reshape(b, f, h * w)
        wmat = self.w.reshape(f, -1)
        self.dw[...] = np.einsum("bfj,bcj->fc", gmat, self._cols).reshape(self.w.shape)
        self.db[...] = gmat.sum(axis=(0, 2))
        dcols = np.einsum("fc,bfj->bcj", wmat, gmat)
        dcols = dcols.reshape(b, c, k, k, hh, ww)
        dxp = np.zeros((b, c, hh + 2 * p, ww + 2 * p))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + hh, j : j + ww] += dcols[:, :, i, j]
        return dxp[:, :, p : p + hh, p : p + ww]

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def grads(self):
        return {f"{self.name}.w": self.dw, f"{self.name}.b": self.db}


class BatchNorm2d(Layer):
    def __init__(self, channels: int, name: str = "bn",
                 eps: float = 1e-5, momentum: float = 0.1) -> None:
        self.name = name
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.dgamma = np.zeros(channels)
        self.dbeta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = (1 - self.momentum) * self.running_mean \
                + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var \
                + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv[None, :, None, None]
        self._cache = (xhat, inv, train, x.shape)
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat, inv, train, shape = self._cache
        self.dgamma[...] = (grad * xhat).sum(axis=(0, 2, 3))
        self.dbeta[...] = grad.sum(axis=(0, 2, 3))
        ghat = grad * self.gamma[None, :, None, None]
        if not train:
            return ghat * inv[None, :, None, None]
        b, c, h, w = shape
        n = b * h * w
        sum_g = ghat.sum(axis=(0, 2, 3))
        sum_gx = (ghat * xhat).sum(axis=(0, 2, 3))
        return (inv[None, :, None, None] / n) * (
            n * ghat
            - sum_g[None, :, None, None]
            - xhat * sum_gx[None, :, None, None]
        )

    def params(self):
        return {f"{self.name}.gamma": self.gamma, f"{self.name}.beta": self.beta}

    def grads(self):
        return {f"{self.name}.gamma": self.dgamma, f"{self.name}.beta": self.dbeta}

    def state(self):
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }


class MaxPool2d(Layer):
    """2x2 stride-2 max pooling; odd trailing rows/columns are dropped."""

    def __init__(self, name: str = "pool") -> None:
        self.name = name
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        b, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        if h2 == 0 or w2 == 0:
            raise ShapeMismatch(f"{self.name}: input {h}x{w} too small to pool")
        xc = x[:, :, : 2 * h2, : 2 * w2]
        blocks = xc.reshape(b, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = blocks.reshape(b, c, h2, w2, 4)
        arg = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        self._cache = (arg, x.shape)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        arg, (b, c, h, w) = self._cache
        h2, w2 = h // 2, w // 2
        flat = np.zeros((b, c, h2, w2, 4))
        np.put_along_axis(flat, arg[..., None], grad[..., None], axis=-1)
        blocks = flat.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros((b, c, h, w))
        dx[:, :, : 2 * h2, : 2 * w2] = blocks.reshape(b, c, 2 * h2, 2 * w2)
        return dx


class GlobalAvgPool(Layer):
    """Adaptive average pool to 1x1, flattened to (batch, channels)."""

    def __init__(self, name: str = "gap") -> None:
        self.name = name
        self._shape: tuple | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        b, c, h, w = self._shape
        return np.broadcast_to(
            grad[:, :, None, None] / (h * w), (b, c, h, w)
        ).copy()
