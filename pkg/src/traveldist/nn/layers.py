"""Layers with explicit forward/backward passes over float64 numpy arrays.

Conv and pooling layers work channel-last on (batch, length, channels) arrays
and keep the length unchanged (stride 1, same padding).
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _pool_forward(x, width):
    """Windowed max over axis 1 with -inf padding; arg holds the winning tap (leftmost on ties)."""
    B, L, C = x.shape
    p = width // 2
    out = np.full(x.shape, -np.inf)
    arg = np.zeros(x.shape, np.int8)
    for b in range(B):
        for i in range(L):
            for j in range(width):
                t = i + j - p
                if t < 0 or t >= L:
                    continue
                for c in range(C):
                    v = x[b, t, c]
                    if v > out[b, i, c]:
                        out[b, i, c] = v
                        arg[b, i, c] = j
    return out, arg


@njit(cache=True)
def _pool_backward(g, arg, width):
    B, L, C = g.shape
    p = width // 2
    dx = np.zeros_like(g)
    for b in range(B):
        for i in range(L):
            for c in range(C):
                dx[b, i + arg[b, i, c] - p, c] += g[b, i, c]
    return dx


class ShapeError(ValueError):
    pass


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pattern(self):
        """Discrete state of the last forward pass (used to detect kinks in gradient checks)."""
        return None


class Conv1D(Layer):
    """Kernels are stored as (out_channels, in_channels, kernel)."""

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, rng: np.random.Generator | None = None):
        super().__init__()
        if kernel % 2 != 1:
            raise ShapeError("same padding needs an odd kernel")
        self.in_channels, self.out_channels, self.kernel = in_channels, out_channels, kernel
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel
        bound = np.sqrt(6.0 / fan_in)
        self.params["W"] = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel))
        self.params["b"] = rng.uniform(-1 / np.sqrt(fan_in), 1 / np.sqrt(fan_in), size=out_channels)

    def out_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[1] != self.in_channels:
            raise ShapeError(f"conv1d expects (L, {self.in_channels}), got {in_shape}")
        return (in_shape[0], self.out_channels)

    def _kernel_matrix(self) -> np.ndarray:
        # rows ordered (tap, in_channel) to match the column layout
        return self.params["W"].transpose(0, 2, 1).reshape(self.out_channels, -1)

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"conv1d expects (B, L, {self.in_channels}), got {x.shape}")
        B, L, C = x.shape
        p = self.kernel // 2
        xp = np.pad(x, ((0, 0), (p, p), (0, 0)))
        self._shape = x.shape
        self._cols = np.concatenate([xp[:, j:j + L, :] for j in range(self.kernel)], axis=2).reshape(B * L, -1)
        out = self._cols @ self._kernel_matrix().T + self.params["b"]
        return out.reshape(B, L, self.out_channels)

    def backward(self, g):
        B, L, C = self._shape
        k = self.kernel
        p = k // 2
        g2 = g.reshape(B * L, self.out_channels)
        dW = g2.T @ self._cols  # (out, k*C)
        self.grads["W"] = dW.reshape(self.out_channels, k, C).transpose(0, 2, 1).copy()
        self.grads["b"] = g2.sum(axis=0)
        dcols = (g2 @ self._kernel_matrix()).reshape(B, L, k, C)
        dxp = np.zeros((B, L + 2 * p, C))
        for j in range(k):
            dxp[:, j:j + L, :] += dcols[:, :, j, :]
        return dxp[:, p:p + L, :]


class MaxPool1D(Layer):
    kind = "maxpool1d"

    def __init__(self, width: int = 3):
        super().__init__()
        if width % 2 != 1:
            raise ShapeError("same padding needs an odd pooling width")
        self.width = width

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeError(f"maxpool1d expects (L, C), got {in_shape}")
        return in_shape

    def forward(self, x):
        self._shape = x.shape
        out, self._arg = _pool_forward(np.ascontiguousarray(x), self.width)
        return out

    def backward(self, g):
        return _pool_backward(np.ascontiguousarray(g), self._arg, self.width)

    def pattern(self):
        return self._arg


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, g):
        return np.where(self._mask, g, 0.0)

    def pattern(self):
        return self._mask


class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)


class Dense(Layer):
    kind = "fc"

    def __init__(self, in_units: int, out_units: int, rng: np.random.Generator | None = None, relu_gain: bool = True):
        super().__init__()
        self.in_units, self.out_units = in_units, out_units
        rng = rng or np.random.default_rng(0)
        bound = np.sqrt((6.0 if relu_gain else 3.0) / in_units)
        self.params["W"] = rng.uniform(-bound, bound, size=(in_units, out_units))
        self.params["b"] = rng.uniform(-1 / np.sqrt(in_units), 1 / np.sqrt(in_units), size=out_units)

    def out_shape(self, in_shape):
        if in_shape != (self.in_units,):
            raise ShapeError(f"fc expects ({self.in_units},), got {in_shape}")
        return (self.out_units,)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_units:
            raise ShapeError(f"fc expects (B, {self.in_units}), got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, g):
        self.grads["W"] = self._x.T @ g
        self.grads["b"] = g.sum(axis=0)
        return g @ self.params["W"].T


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y]))
    g = softmax(logits)
    g[np.arange(n), y] -= 1.0
    return loss, g / n
