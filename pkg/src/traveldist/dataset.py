"""Feature vectors, scaling, train/test split with undersampling, correlation and PCA."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import VisitFeatures

FEATURE_NAMES = (
    "age", "gender", "low_income", "total_visits", "total_diseases", "total_chronic",
    "upc", "lupc", "secoc", "coci", "cci", "physician_density", "mfpc", "lfpc",
    "region_north", "region_central", "region_south", "region_east", "region_island",
    "acc_index", "is_surgery", "is_emergency", "is_severe", "is_workday", "dir",
)
N_FEATURES = len(FEATURE_NAMES)
N_CLASSES = 4

# Columns already encoded as +/-1 or 0/1 indicators; everything else is min-max scaled.
CATEGORICAL = frozenset({
    "gender", "low_income", "region_north", "region_central", "region_south",
    "region_east", "region_island", "is_surgery", "is_emergency", "is_severe", "is_workday",
})
NUMERIC_MASK = np.array([n not in CATEGORICAL for n in FEATURE_NAMES])


class AssemblyError(ValueError):
    pass


class BalanceError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    label: int
    visit_id: str
    km: float = 0.0


def _values(row: VisitFeatures) -> dict[str, float]:
    p, q, i = row.patient, row.provider, row.incident
    vals = {
        "age": row.age, "gender": p.gender_flag, "low_income": p.low_income_flag,
        "total_visits": p.total_visits, "total_diseases": p.total_diseases,
        "total_chronic": p.total_chronic, "upc": p.upc, "lupc": p.lupc,
        "secoc": p.secoc, "coci": p.coci, "cci": p.cci,
        "physician_density": q.physician_density, "mfpc": q.mfpc, "lfpc": q.lfpc,
        "acc_index": q.acc_index, "is_surgery": i.is_surgery, "is_emergency": i.is_emergency,
        "is_severe": i.is_severe, "is_workday": i.is_workday, "dir": i.dir,
    }
    if q.region_onehot is not None:
        for name, v in zip(FEATURE_NAMES[14:19], q.region_onehot):
            vals[name] = v
    return vals


def assemble(rows: Iterable[VisitFeatures]) -> list[FeatureVector]:
    out = []
    for row in rows:
        vals = _values(row)
        for name in FEATURE_NAMES:
            v = vals.get(name)
            if v is None or not np.isfinite(float(v)):
                raise AssemblyError(f"visit {row.visit_id}: feature {name!r} missing")
        out.append(FeatureVector(tuple(float(vals[n]) for n in FEATURE_NAMES), int(row.label), row.visit_id, float(row.km)))
    return out


def to_arrays(vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([v.values for v in vectors], dtype=float).reshape(len(vectors), N_FEATURES)
    y = np.array([v.label for v in vectors], dtype=int)
    return X, y


FEATURE_CSV_COLUMNS = ("visit_id", *FEATURE_NAMES, "km", "label")


def write_vectors(path: str | Path, vectors: Sequence[FeatureVector]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_CSV_COLUMNS)
        for v in vectors:
            w.writerow([v.visit_id, *(repr(x) for x in v.values), repr(v.km), v.label])


def read_vectors(path: str | Path) -> list[FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            FeatureVector(tuple(float(r[n]) for n in FEATURE_NAMES), int(r["label"]), r["visit_id"], float(r["km"]))
            for r in reader
        ]


# ------------------------------------------------------------ normalization

@dataclass(frozen=True)
class Normalizer:
    """Train-split min-max scaling of numeric columns onto [-1, 1].

    Indicator columns pass through unchanged. Any column that is constant on the
    training split maps to 0, the attribution baseline, since it carries no information.
    """

    lo: np.ndarray
    hi: np.ndarray
    numeric: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = X.copy()
        span = self.hi - self.lo
        scaled = np.zeros_like(X)
        nz = span > 0
        scaled[:, nz] = 2.0 * (X[:, nz] - self.lo[nz]) / span[nz] - 1.0
        scaled = np.clip(scaled, -1.0, 1.0)
        out[:, self.numeric] = scaled[:, self.numeric]
        out[:, ~nz] = 0.0
        return out

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        out = Z.copy()
        span = self.hi - self.lo
        raw = (Z + 1.0) / 2.0 * span + self.lo
        out[:, self.numeric] = raw[:, self.numeric]
        out[:, span == 0] = self.lo[span == 0]
        return out

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "numeric": self.numeric.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Normalizer":
        return cls(np.array(d["lo"], dtype=float), np.array(d["hi"], dtype=float), np.array(d["numeric"], dtype=bool))


def fit_normalizer(X_train: np.ndarray, numeric: np.ndarray | None = None) -> Normalizer:
    X_train = np.asarray(X_train, dtype=float)
    if X_train.shape[0] == 0:
        raise ValueError("cannot fit a normalizer on an empty training set")
    if numeric is None:
        numeric = NUMERIC_MASK if X_train.shape[1] == N_FEATURES else np.ones(X_train.shape[1], dtype=bool)
    return Normalizer(X_train.min(axis=0), X_train.max(axis=0), np.asarray(numeric, dtype=bool))


# ------------------------------------------------------------ split and balance

@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train: np.ndarray
    test: np.ndarray
    balanced: np.ndarray
    folds: tuple[np.ndarray, ...]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "train": self.train.tolist(),
            "test": self.test.tolist(),
            "balanced": self.balanced.tolist(),
            "folds": [f.tolist() for f in self.folds],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SplitPlan":
        arr = lambda v: np.array(v, dtype=np.int64)  # noqa: E731
        return cls(int(d["seed"]), arr(d["train"]), arr(d["test"]), arr(d["balanced"]), tuple(arr(f) for f in d["folds"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitPlan":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def split_and_balance(y: np.ndarray, seed: int, train_fraction: float = 0.8, n_folds: int = 5,
                      n_classes: int = N_CLASSES) -> SplitPlan:
    """Random train/test split, class undersampling of the training part, then folds.

    Indices refer to rows of ``y``. The test part keeps its natural label mix.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    n_train = int(round(train_fraction * len(y)))
    train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    counts = np.bincount(y[train], minlength=n_classes)
    if counts.min() == 0:
        missing = [c for c in range(n_classes) if counts[c] == 0]
        raise BalanceError(f"classes {missing} absent from the training split")
    m = counts.min()
    keep = []
    for c in range(n_classes):
        members = train[y[train] == c]
        keep.append(members if len(members) == m else rng.choice(members, size=m, replace=False))
    balanced = np.sort(np.concatenate(keep))
    folds = tuple(np.sort(f) for f in np.array_split(rng.permutation(balanced), n_folds))
    return SplitPlan(seed, train, test, balanced, folds)


# ------------------------------------------------------------ correlation

@dataclass(frozen=True)
class CorrelationResult:
    names: tuple[str, ...]
    matrix: np.ndarray
    flagged: tuple[tuple[str, str, float], ...]
    constant: tuple[str, ...]


def pearson_matrix(X: np.ndarray, names: Sequence[str], threshold: float = 0.7) -> CorrelationResult:
    """Pearson r between all columns; pairs with |r| above ``threshold`` are flagged.

    Constant columns get r = 0 against everything (diagonal included) and are listed.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    Z = X - X.mean(axis=0)
    sd = np.sqrt((Z * Z).sum(axis=0))
    ok = sd > 0
    Z[:, ok] /= sd[ok]
    Z[:, ~ok] = 0.0
    R = np.clip(Z.T @ Z, -1.0, 1.0)
    R = (R + R.T) / 2
    idx = np.flatnonzero(ok)
    R[idx, idx] = 1.0
    flagged = []
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            if abs(R[a, b]) > threshold:
                flagged.append((names[a], names[b], float(R[a, b])))
    return CorrelationResult(tuple(names), R, tuple(flagged), tuple(n for n, k in zip(names, ok) if not k))


# ------------------------------------------------------------ PCA

def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Stops once the off-diagonal Frobenius norm falls below ``tol`` times the
    matrix norm. Returns eigenvalues in descending order and eigenvectors as columns.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise FloatingPointError("non-finite entries in covariance")
    A = (A + A.T) / 2
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(A * A) - np.sum(np.diag(A) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:  # theta**2 would overflow; t -> 1 / (2 theta)
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class Projection:
    mean: np.ndarray
    components: np.ndarray  # d x k, columns are principal axes
    eigenvalues: np.ndarray  # all d, descending
    k: int

    @property
    def explained_ratio(self) -> np.ndarray:
        total = self.eigenvalues.clip(min=0).sum()
        return self.eigenvalues.clip(min=0) / total if total > 0 else np.zeros_like(self.eigenvalues)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def reconstruct(self, Z: np.ndarray) -> np.ndarray:
        return Z @ self.components.T + self.mean

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "components": self.components.tolist(),
                "eigenvalues": self.eigenvalues.tolist(), "k": self.k}

    @classmethod
    def from_json(cls, d: dict) -> "Projection":
        comps = np.array(d["components"], dtype=float).reshape(len(d["mean"]), d["k"])
        return cls(np.array(d["mean"], dtype=float), comps, np.array(d["eigenvalues"], dtype=float), int(d["k"]))


def pca_fit(X: np.ndarray, variance_target: float = 0.95, k: int | None = None) -> Projection:
    """Keep the fewest components whose cumulative explained variance reaches the target."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(1, X.shape[0] - 1)
    if not np.all(np.isfinite(cov)):
        raise FloatingPointError("covariance is not finite")
    w, V = jacobi_eigh(cov)
    if k is None:
        pos = w.clip(min=0)
        total = pos.sum()
        if total == 0:
            k = 1
        else:
            cum = np.cumsum(pos) / total
            hits = np.flatnonzero(cum >= variance_target)
            k = int(hits[0]) + 1 if len(hits) else len(w)
    return Projection(mean, V[:, :k].copy(), w, k)


def pca_apply(proj: Projection, X: np.ndarray) -> np.ndarray:
    return proj.apply(X)
