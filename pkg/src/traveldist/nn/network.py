"""Sequential networks built from architecture descriptors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Conv1D, Dense, Flatten, Layer, MaxPool1D, ReLU, ShapeError, cross_entropy, softmax


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv1d | relu | maxpool1d | flatten | fc | output
    units: int = 0  # channels for conv1d, width for fc/output
    kernel: int = 3  # conv kernel or pooling width

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("conv1d", "fc", "output"):
            d["units"] = self.units
        if self.kind in ("conv1d", "maxpool1d"):
            d["kernel"] = self.kernel
        return d

    @classmethod
    def from_json(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], int(d.get("units", 0)), int(d.get("kernel", 3)))


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_dim: int
    layers: tuple[LayerSpec, ...]
    n_classes: int = 4

    @property
    def is_convolutional(self) -> bool:
        return any(l.kind == "conv1d" for l in self.layers)

    def describe(self) -> str:
        parts = []
        for l in self.layers:
            parts.append(f"{l.kind}({l.units})" if l.units else l.kind)
        return " -> ".join(parts)

    def to_json(self) -> dict:
        return {"name": self.name, "input_dim": self.input_dim, "n_classes": self.n_classes,
                "layers": [l.to_json() for l in self.layers]}

    @classmethod
    def from_json(cls, d: dict) -> "ArchitectureSpec":
        return cls(d["name"], int(d["input_dim"]), tuple(LayerSpec.from_json(x) for x in d["layers"]),
                   int(d.get("n_classes", 4)))


def _conv_block(channels: int) -> list[LayerSpec]:
    return [LayerSpec("conv1d", channels, 3), LayerSpec("relu"), LayerSpec("maxpool1d", kernel=3)]


def cnn_spec(name: str, n_conv: int, fc_units: tuple[int, ...], input_dim: int = 25, channels: int = 32) -> ArchitectureSpec:
    layers: list[LayerSpec] = []
    for _ in range(n_conv):
        layers += _conv_block(channels)
    layers.append(LayerSpec("flatten"))
    for u in fc_units:
        layers += [LayerSpec("fc", u), LayerSpec("relu")]
    layers.append(LayerSpec("output", 4))
    return ArchitectureSpec(name, input_dim, tuple(layers))


def mlp_spec(hidden: tuple[int, ...] = (1500,) * 5, input_dim: int = 25, name: str = "mlp") -> ArchitectureSpec:
    layers: list[LayerSpec] = []
    for u in hidden:
        layers += [LayerSpec("fc", u), LayerSpec("relu")]
    layers.append(LayerSpec("output", 4))
    return ArchitectureSpec(name, input_dim, tuple(layers))


ABLATION_ORDER = ("conv1_fco", "conv2_fco", "conv3_fco", "conv4_fco", "conv4_fc1_fco", "cnn")


def build_paper_architectures(input_dim: int = 25, channels: int = 32) -> dict[str, ArchitectureSpec]:
    """The proposed CNN, the MLP baseline, and the layer-ablation ladder."""
    archs = {
        "cnn": cnn_spec("cnn", 4, (500, 500), input_dim, channels),
        "mlp": mlp_spec((1500,) * 5, input_dim),
        "conv1_fco": cnn_spec("conv1_fco", 1, (), input_dim, channels),
        "conv2_fco": cnn_spec("conv2_fco", 2, (), input_dim, channels),
        "conv3_fco": cnn_spec("conv3_fco", 3, (), input_dim, channels),
        "conv4_fco": cnn_spec("conv4_fco", 4, (), input_dim, channels),
        "conv4_fc1_fco": cnn_spec("conv4_fc1_fco", 4, (500,), input_dim, channels),
    }
    return archs


class Network:
    """A sequential model; conv architectures read each row as input_dim positions x 1 channel."""

    def __init__(self, spec: ArchitectureSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = []
        shape: tuple[int, ...] = (spec.input_dim, 1) if spec.is_convolutional else (spec.input_dim,)
        self.input_shape = shape
        for i, ls in enumerate(spec.layers):
            if ls.kind == "conv1d":
                if len(shape) != 2:
                    raise ShapeError(f"layer {i}: conv1d after flatten")
                layer = Conv1D(shape[1], ls.units, ls.kernel, rng)
            elif ls.kind == "relu":
                layer = ReLU()
            elif ls.kind == "maxpool1d":
                layer = MaxPool1D(ls.kernel)
            elif ls.kind == "flatten":
                layer = Flatten()
            elif ls.kind in ("fc", "output"):
                if len(shape) != 1:
                    raise ShapeError(f"layer {i}: fc needs flattened input, got {shape}")
                layer = Dense(shape[0], ls.units, rng, relu_gain=ls.kind == "fc")
            else:
                raise ShapeError(f"unknown layer kind {ls.kind!r}")
            shape = layer.out_shape(shape)
            self.layers.append(layer)
        if shape != (spec.n_classes,):
            raise ShapeError(f"final output shape {shape}, expected ({spec.n_classes},)")

    # -- parameters

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{l.kind}.{k}", v) for i, l in enumerate(self.layers) for k, v in l.params.items()]

    def named_grads(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{l.kind}.{k}", l.grads[k]) for i, l in enumerate(self.layers) for k in l.params]

    def get_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for i, l in enumerate(self.layers):
            for k in l.params:
                name = f"{i}.{l.kind}.{k}"
                arr = np.asarray(params[name], dtype=float)
                if arr.shape != l.params[k].shape:
                    raise ShapeError(f"{name}: shape {arr.shape} != {l.params[k].shape}")
                l.params[k] = arr.copy()

    @property
    def n_params(self) -> int:
        return sum(v.size for _, v in self.named_params())

    # -- passes

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        h = X.reshape(X.shape[0], *self.input_shape)
        for i, layer in enumerate(self.layers):
            h = layer.forward(h)
            if not np.all(np.isfinite(h)):
                raise NumericError(f"non-finite activation after layer {i} ({layer.kind})")
        return h

    def backward(self, g: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g.reshape(g.shape[0], -1)

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, list[tuple[str, np.ndarray]]]:
        logits = self.forward(X)
        loss, g = cross_entropy(logits, np.asarray(y, dtype=int))
        self.backward(g)
        return loss, self.named_grads()

    def predict_proba(self, X: np.ndarray, batch_size: int = 2048) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = [softmax(self.forward(X[i:i + batch_size])) for i in range(0, len(X), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.spec.n_classes))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def target_prob_and_input_grad(self, X: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Softmax probability of ``target[i]`` for each row and its gradient with respect to the row."""
        X = np.asarray(X, dtype=float)
        target = np.asarray(target, dtype=int)
        p = softmax(self.forward(X))
        rows = np.arange(len(X))
        pt = p[rows, target]
        # d p_t / d z = p_t (onehot_t - p)
        g = -pt[:, None] * p
        g[rows, target] += pt
        dx = self.backward(g)
        if not np.all(np.isfinite(dx)):
            raise NumericError("non-finite input gradient")
        return pt, dx

    def patterns(self) -> list:
        return [l.pattern() for l in self.layers if l.pattern() is not None]
