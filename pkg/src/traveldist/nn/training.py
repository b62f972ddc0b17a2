"""Mini-batch Adam training with rotating validation folds, and gradient checking."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..metrics import basic_metrics, confusion
from ..serialization import load_arrays, save_arrays
from .network import ArchitectureSpec, Network

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    channels: int = 32

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class TrainedModel:
    spec: ArchitectureSpec
    network: Network
    training_log: list[dict] = field(default_factory=list)
    seed: int = 0
    config: TrainingConfig | None = None
    best_epoch: int | None = None

    def predict_proba(self, X):
        return self.network.predict_proba(X)

    def predict(self, X):
        return self.network.predict(X)

    def save(self, stem: str | Path):
        meta = {
            "architecture": self.spec.to_json(),
            "seed": self.seed,
            "config": asdict(self.config) if self.config else None,
            "best_epoch": self.best_epoch,
            "training_log": self.training_log,
        }
        return save_arrays(stem, "neural_network", meta, self.network.get_params())

    @classmethod
    def load(cls, stem: str | Path) -> "TrainedModel":
        kind, meta, arrays = load_arrays(stem)
        if kind != "neural_network":
            raise TrainingError(f"{stem}: expected a neural network, found {kind!r}")
        spec = ArchitectureSpec.from_json(meta["architecture"])
        net = Network(spec, seed=meta["seed"])
        net.set_params(arrays)
        cfg = TrainingConfig(**meta["config"]) if meta.get("config") else None
        return cls(spec, net, meta["training_log"], meta["seed"], cfg, meta.get("best_epoch"))


class Adam:
    def __init__(self, params: list[tuple[str, np.ndarray]], cfg: TrainingConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params}
        self.v = {k: np.zeros_like(v) for k, v in params}
        self.t = 0

    def step(self, params: list[tuple[str, np.ndarray]], grads: list[tuple[str, np.ndarray]]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for (name, p), (_, g) in zip(params, grads):
            m, v = self.m[name], self.v[name]
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(spec: ArchitectureSpec, X: np.ndarray, y: np.ndarray, folds: Sequence[np.ndarray] | None,
          config: TrainingConfig = TrainingConfig()) -> TrainedModel:
    """Train ``spec`` on (X, y).

    With folds (row positions into X), epoch ``e`` holds out fold ``e mod k`` for
    validation and trains on the rest. The kept parameters are those of the
    epoch with the best mean validation macro-F1 over the last k epochs (one
    full rotation); training stops after ``patience`` epochs without improvement.
    Without folds every epoch trains on all rows and the last epoch is kept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    net = Network(spec, seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    opt = Adam(net.named_params(), config)
    folds = [np.asarray(f, dtype=int) for f in folds] if folds else []
    all_rows = np.arange(len(X))
    history: list[dict] = []
    best_score, best_params, best_epoch, stale = -np.inf, None, None, 0
    recent: list[float] = []

    for epoch in range(config.max_epochs):
        if folds:
            k = epoch % len(folds)
            val_rows = folds[k]
            train_rows = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != k]))
        else:
            val_rows, train_rows = None, all_rows
        order = train_rows[rng.permutation(len(train_rows))]
        losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss, grads = net.loss_and_grads(X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"{spec.name}: non-finite loss at epoch {epoch}, batch {b}")
            opt.step(net.named_params(), grads)
            losses.append(loss * len(idx))
        entry = {"epoch": epoch, "train_loss": float(np.sum(losses) / max(1, len(order)))}
        if val_rows is not None:
            pred = net.predict(X[val_rows])
            rep = basic_metrics(confusion(y[val_rows], pred, spec.n_classes))
            recent = (recent + [rep.macro["f1"]])[-len(folds):]
            score = float(np.mean(recent))
            entry.update(val_fold=int(k), val_macro_f1=rep.macro["f1"], val_accuracy=rep.overall_accuracy,
                         selection_score=score)
            if score > best_score:
                best_score, best_params, best_epoch, stale = score, net.get_params(), epoch, 0
            else:
                stale += 1
        history.append(entry)
        log.info("%s epoch %d %s", spec.name, epoch, entry)
        if val_rows is not None and stale >= config.patience:
            break

    if best_params is not None:
        net.set_params(best_params)
    elif history:
        best_epoch = len(history) - 1
    return TrainedModel(spec, net, history, config.seed, config, best_epoch)


# ------------------------------------------------------------ gradient checking

def relative_error(a: float, b: float, floor: float = 1e-7) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _summed_loss(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    from .layers import cross_entropy
    loss, _ = cross_entropy(net.forward(X), y)
    return loss * len(X)


def _same_patterns(a: list, b: list) -> bool:
    return all(np.array_equal(p, q) for p, q in zip(a, b))


def gradient_check(net: Network, X: np.ndarray, y: np.ndarray, eps: float = 1e-5, probes_per_param: int = 12,
                   check_input: bool = True, seed: int = 0) -> float:
    """Max relative error between backprop and central differences of the summed loss.

    Each parameter tensor is probed at up to ``probes_per_param`` random entries.
    Probes whose +/-eps evaluations switch a ReLU or pooling decision (a kink of
    the piecewise-linear network) are redrawn.
    """
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    net.forward(X)
    from .layers import cross_entropy
    logits = net.forward(X)
    _, g = cross_entropy(logits, y)
    dX = net.backward(g * len(X))
    analytic = {k: v.copy() for k, v in net.named_grads()}
    worst = 0.0

    def probe(get, setv, a_val) -> float | None:
        orig = get()
        setv(orig + eps)
        fp = _summed_loss(net, X, y)
        pat_p = [p.copy() for p in net.patterns()]
        setv(orig - eps)
        fm = _summed_loss(net, X, y)
        pat_m = [p.copy() for p in net.patterns()]
        setv(orig)
        if not _same_patterns(pat_p, pat_m):
            return None
        return relative_error(a_val, (fp - fm) / (2 * eps))

    for name, p in net.named_params():
        flat = p.reshape(-1)
        candidates = rng.permutation(flat.size)
        done = 0
        for j in candidates:
            if done >= probes_per_param:
                break

            def setv(val, j=j):
                flat[j] = val

            err = probe(lambda j=j: flat[j], setv, analytic[name].reshape(-1)[j])
            if err is None:
                continue
            worst = max(worst, err)
            done += 1
    if check_input:
        flatx = X.reshape(-1)
        done = 0
        for j in rng.permutation(flatx.size):
            if done >= probes_per_param:
                break

            def setx(val, j=j):
                flatx[j] = val

            err = probe(lambda j=j: flatx[j], setx, dX.reshape(-1)[j])
            if err is None:
                continue
            worst = max(worst, err)
            done += 1
    return worst
