"""Conventional learners: one-vs-rest logistic regression, linear SVM and a Gini random forest."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .serialization import load_arrays, save_arrays

log = logging.getLogger(__name__)

N_CLASSES = 4


class BaselineError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


def _check_dim(X: np.ndarray, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, d)
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionError(f"expected (n, {d}) input, got {X.shape}")
    return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ------------------------------------------------------------------ linear models

@dataclass
class LinearOvrModel:
    kind: str  # "logistic" or "svm"
    W: np.ndarray  # (n_classes, d)
    b: np.ndarray  # (n_classes,)
    converged: bool = True
    history: list[list[float]] = field(default_factory=list)  # per class objective trace

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = _check_dim(X, self.input_dim)
        return X @ self.W.T + self.b

    def predict(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Labels and per-class scores (probabilities for logistic, margins for svm)."""
        z = self.decision(X)
        scores = _sigmoid(z) if self.kind == "logistic" else z
        return z.argmax(axis=1) if len(z) else np.zeros(0, dtype=int), scores

    def save(self, stem: str | Path):
        meta = {"kind": self.kind, "converged": self.converged}
        return save_arrays(stem, "linear_ovr", meta, {"W": self.W, "b": self.b})


@dataclass(frozen=True)
class LinearConfig:
    max_iter: int = 500
    tol: float = 1e-7
    l2: float = 0.0  # logistic only


def _lipschitz_step(Xb: np.ndarray) -> float:
    """1/L for the mean log-loss, L = lambda_max(X^T X) / (4n)."""
    n = len(Xb)
    lam = np.linalg.eigvalsh(Xb.T @ Xb)[-1]
    return 4.0 * n / max(lam, 1e-12)


def train_logreg_ovr(X: np.ndarray, y: np.ndarray, config: LinearConfig = LinearConfig(),
                     n_classes: int = N_CLASSES) -> LinearOvrModel:
    """Full-batch gradient descent on mean log-loss per class with a 1/L step (monotone loss)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    step = 1.0 / (1.0 / _lipschitz_step(Xb) + config.l2)
    W = np.zeros((n_classes, d + 1))
    history = []
    for c in range(n_classes):
        t = np.where(y == c, 1.0, -1.0)
        w = W[c]
        trace = []
        prev = np.inf
        for it in range(config.max_iter):
            m = t * (Xb @ w)
            loss = float(np.mean(np.logaddexp(0.0, -m)) + 0.5 * config.l2 * w @ w)
            if not np.isfinite(loss):
                raise BaselineError(f"logistic regression diverged for class {c} at iteration {it}")
            trace.append(loss)
            if prev - loss < config.tol:
                break
            prev = loss
            grad = -(Xb.T @ (t * _sigmoid(-m))) / n + config.l2 * w
            w -= step * grad
        history.append(trace)
    return LinearOvrModel("logistic", W[:, :d].copy(), W[:, d].copy(), True, history)


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, t: np.ndarray, C: float) -> float:
    """0.5*(|w|^2 + b^2) + C*sum(hinge); the bias is a weight on a constant feature."""
    hinge = np.maximum(0.0, 1.0 - t * (X @ w + b))
    return float(0.5 * (w @ w + b * b) + C * hinge.sum())


SVM_CONFIG = LinearConfig(max_iter=1000, tol=0.1)


@njit(cache=True)
def _svm_dual_cd(Xa, t, C, max_epochs, tol, order_keys):
    """Dual coordinate descent for the L1-loss linear SVM (box constraint 0 <= a_i <= C).

    Returns (w, epochs, converged, gap_trace). Convergence means the spread of
    the projected gradient over one sweep fell below ``tol``.
    """
    n, d = Xa.shape
    a = np.zeros(n)
    w = np.zeros(d)
    q = np.zeros(n)
    for i in range(n):
        q[i] = (Xa[i] * Xa[i]).sum()
    gaps = np.zeros(max_epochs)
    for ep in range(max_epochs):
        order = np.argsort(order_keys[ep % order_keys.shape[0]])
        pg_max, pg_min = -np.inf, np.inf
        for jj in range(n):
            i = order[jj]
            if q[i] == 0.0:
                continue
            g = t[i] * (Xa[i] @ w) - 1.0
            if a[i] == 0.0:
                pg = min(g, 0.0)
            elif a[i] == C:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(a[i] - g / q[i], 0.0), C)
                w += (new - a[i]) * t[i] * Xa[i]
                a[i] = new
        gaps[ep] = pg_max - pg_min
        if gaps[ep] < tol:
            return w, ep + 1, True, gaps[:ep + 1]
    return w, max_epochs, False, gaps


def train_svm_ovr(X: np.ndarray, y: np.ndarray, C: float = 0.2, config: LinearConfig = SVM_CONFIG,
                  n_classes: int = N_CLASSES, seed: int = 0) -> LinearOvrModel:
    """Per class, minimize 0.5*(|w|^2 + b^2) + C*sum(hinge) exactly in the dual.

    Sweeps visit the rows in a seeded random order; ``max_iter`` caps the
    number of sweeps and ``tol`` bounds the projected-gradient spread used as
    the stopping rule. ``history`` holds that spread per sweep.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if C < 0:
        raise BaselineError("C must be non-negative")
    n, d = X.shape
    Xa = np.ascontiguousarray(np.column_stack([X, np.ones(n)]))
    keys = np.random.default_rng(seed).random((min(config.max_iter, 50), n))
    W = np.zeros((n_classes, d))
    B = np.zeros(n_classes)
    converged, history = True, []
    for c in range(n_classes):
        t = np.where(y == c, 1.0, -1.0)
        w, _, ok, gaps = _svm_dual_cd(Xa, t, float(C), int(config.max_iter), float(config.tol), keys)
        if not np.all(np.isfinite(w)):
            raise BaselineError(f"svm diverged for class {c}")
        W[c], B[c] = w[:d], w[d]
        history.append(gaps.tolist())
        converged &= bool(ok)
    if not converged:
        log.warning("svm: dual coordinate descent hit the sweep limit before the tolerance")
    return LinearOvrModel("svm", W, B, converged, history)


# ------------------------------------------------------------------ random forest

@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    feature_subset: int = 5
    max_depth: int | None = None
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count rows."""
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / tot[..., None]
    return np.where(tot > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


@dataclass
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (nodes, n_classes) class probabilities

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@njit(cache=True)
def _grow(X, y, n_classes, k, max_depth, min_leaf, keys):
    """Array-based tree growth; node ``i`` owns rows idx[lo[i]:hi[i]]."""
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, n_classes))
    lo = np.zeros(cap, np.int64)
    hi = np.zeros(cap, np.int64)
    depth = np.zeros(cap, np.int64)
    idx = np.arange(n)
    hi[0] = n
    n_nodes = 1
    stack = np.zeros(cap, np.int64)
    top = 1
    lc = np.zeros(n_classes)
    while top > 0:
        top -= 1
        node = stack[top]
        a, b = lo[node], hi[node]
        m = b - a
        for i in range(a, b):
            counts[node, y[idx[i]]] += 1.0
        nonzero = 0
        for c in range(n_classes):
            if counts[node, c] > 0:
                nonzero += 1
        if nonzero <= 1 or m < 2 * min_leaf or (max_depth >= 0 and depth[node] >= max_depth):
            continue
        perm = np.argsort(keys[node])
        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(d):
            if j == k and best_f >= 0:
                break
            f = perm[j]
            rows = idx[a:b]
            xs_all = X[rows, f]
            order = np.argsort(xs_all)
            lc[:] = 0.0
            for i in range(m - 1):
                lc[y[rows[order[i]]]] += 1.0
                x0 = xs_all[order[i]]
                x1 = xs_all[order[i + 1]]
                if not x1 > x0:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lc[c] * lc[c]
                    rc = counts[node, c] - lc[c]
                    sr += rc * rc
                # weighted child impurity times m
                score = m - sl / nl - sr / nr
                if score < best_score:
                    best_score = score
                    best_f = f
                    t = 0.5 * (x0 + x1)
                    best_thr = t if t < x1 else x0
        if best_f < 0:
            continue
        # partition rows in place: left block first
        i, jj = a, b - 1
        while i <= jj:
            if X[idx[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[jj]
                idx[jj] = tmp
                jj -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        l, r = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = l, r
        lo[l], hi[l], lo[r], hi[r] = a, i, i, b
        depth[l] = depth[node] + 1
        depth[r] = depth[node] + 1
        stack[top] = r
        stack[top + 1] = l
        top += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], counts[:n_nodes]


def grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_subset: int,
              max_depth: int | None = None, min_samples_leaf: int = 1, n_classes: int = N_CLASSES) -> Tree:
    """Greedy Gini tree; each node draws ``feature_subset`` candidate features.

    When none of the drawn features can split the node, the remaining features
    are tried (in the drawn order) before the node becomes a leaf. Split
    candidates are midpoints between consecutive distinct values; rows with
    x <= threshold go left.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    keys = rng.random((2 * n + 1, d))
    f, thr, l, r, counts = _grow(X, y, n_classes, min(feature_subset, d),
                                 -1 if max_depth is None else int(max_depth), int(min_samples_leaf), keys)
    value = counts / counts.sum(axis=1, keepdims=True)
    return Tree(f.copy(), thr.copy(), l.copy(), r.copy(), value)


@dataclass
class ForestModel:
    trees: list[Tree]
    input_dim: int
    config: ForestConfig
    tree_seeds: list[int]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_dim(X, self.input_dim)
        acc = np.zeros((len(X), N_CLASSES))
        for t in self.trees:
            acc += t.predict_proba(X)
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.predict_proba(X)
        return p.argmax(axis=1) if len(p) else np.zeros(0, dtype=int), p

    def save(self, stem: str | Path):
        arrays = {}
        for i, t in enumerate(self.trees):
            arrays[f"{i}.feature"] = t.feature.astype(float)
            arrays[f"{i}.threshold"] = t.threshold
            arrays[f"{i}.left"] = t.left.astype(float)
            arrays[f"{i}.right"] = t.right.astype(float)
            arrays[f"{i}.value"] = t.value
        meta = {"input_dim": self.input_dim, "config": self.config.__dict__, "tree_seeds": self.tree_seeds}
        return save_arrays(stem, "forest", meta, arrays)


def train_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig()) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise BaselineError("random forest needs at least 2 classes")
    seeds = np.random.SeedSequence(config.seed).generate_state(config.n_trees).tolist()
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        rows = rng.integers(0, len(X), len(X)) if config.bootstrap else np.arange(len(X))
        trees.append(grow_tree(X[rows], y[rows], rng, config.feature_subset, config.max_depth,
                               config.min_samples_leaf))
    return ForestModel(trees, X.shape[1], config, [int(s) for s in seeds])


# ------------------------------------------------------------------ loading

def load_baseline(stem: str | Path) -> LinearOvrModel | ForestModel:
    kind, meta, arrays = load_arrays(stem)
    if kind == "linear_ovr":
        return LinearOvrModel(meta["kind"], arrays["W"], arrays["b"], meta["converged"])
    if kind == "forest":
        trees = []
        for i in range(len(meta["tree_seeds"])):
            trees.append(Tree(arrays[f"{i}.feature"].astype(np.int64), arrays[f"{i}.threshold"],
                              arrays[f"{i}.left"].astype(np.int64), arrays[f"{i}.right"].astype(np.int64),
                              arrays[f"{i}.value"]))
        return ForestModel(trees, meta["input_dim"], ForestConfig(**meta["config"]), meta["tree_seeds"])
    raise BaselineError(f"{stem}: not a baseline model ({kind!r})")
