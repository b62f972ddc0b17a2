"""Integrated Gradients over networks with an input-gradient method."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .dataset import FEATURE_NAMES


class AttributionError(ValueError):
    pass


class Differentiable(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...

    def target_prob_and_input_grad(self, X: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


def _path_points(x: np.ndarray, baseline: np.ndarray, m: int) -> np.ndarray:
    alphas = (np.arange(1, m + 1) - 0.5) / m
    return baseline[None, :] + alphas[:, None] * (x - baseline)[None, :]


def integrated_gradients_batch(model: Differentiable, X: np.ndarray, baseline: np.ndarray | None = None,
                               m: int = 50, target: np.ndarray | None = None,
                               chunk_rows: int = 4096) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """IG rows for every sample of X with the midpoint rule on the straight path.

    Returns (ig, target, residual) where residual = sum(ig) - (F(x) - F(baseline))
    and F is the softmax probability of ``target`` (the predicted class by default).
    """
    if m < 1:
        raise AttributionError("step count m must be >= 1")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise AttributionError("need a non-empty 2-D sample matrix")
    n, d = X.shape
    baseline = np.zeros(d) if baseline is None else np.asarray(baseline, dtype=float)
    if target is None:
        target = model.predict_proba(X).argmax(axis=1)
    target = np.asarray(target, dtype=int)
    per_chunk = max(1, chunk_rows // m)
    ig = np.zeros((n, d))
    for s in range(0, n, per_chunk):
        xs = X[s:s + per_chunk]
        pts = np.concatenate([_path_points(x, baseline, m) for x in xs])
        _, g = model.target_prob_and_input_grad(pts, np.repeat(target[s:s + per_chunk], m))
        if not np.all(np.isfinite(g)):
            raise AttributionError("non-finite gradient along the integration path")
        avg = g.reshape(len(xs), m, d).mean(axis=1)
        ig[s:s + per_chunk] = (xs - baseline) * avg
    rows = np.arange(n)
    fx = model.predict_proba(X)[rows, target]
    fb = model.predict_proba(np.repeat(baseline[None, :], n, axis=0))[rows, target]
    residual = ig.sum(axis=1) - (fx - fb)
    return ig, target, residual


def integrated_gradients(model: Differentiable, x: np.ndarray, baseline: np.ndarray | None = None, m: int = 50,
                         target: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = None if target is None else np.array([target])
    ig, _, _ = integrated_gradients_batch(model, x[None, :], baseline, m, t)
    return ig[0]


@dataclass
class AttributionReport:
    feature_names: tuple[str, ...]
    weights: np.ndarray  # signed mean IG per feature
    baseline: np.ndarray
    m: int
    residuals: np.ndarray
    sample_source: str = "test"
    target_policy: str = "predicted"
    per_sample: np.ndarray | None = field(default=None, repr=False)

    def ranked(self) -> list[tuple[str, float]]:
        """Features sorted by |weight|, largest first (ties keep feature order)."""
        order = np.argsort(-np.abs(self.weights), kind="stable")
        return [(self.feature_names[i], float(self.weights[i])) for i in order]

    def to_json(self) -> dict:
        return {
            "features": list(self.feature_names),
            "weights": self.weights.tolist(),
            "ranked": [{"feature": f, "weight": w} for f, w in self.ranked()],
            "baseline": self.baseline.tolist(),
            "m": self.m,
            "n_samples": int(len(self.residuals)),
            "max_abs_residual": float(np.max(np.abs(self.residuals))),
            "mean_abs_residual": float(np.mean(np.abs(self.residuals))),
            "sample_source": self.sample_source,
            "target_policy": self.target_policy,
        }

    def write(self, json_path: str | Path, csv_path: str | Path) -> None:
        Path(json_path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "feature", "weight", "abs_weight"])
            for r, (f, v) in enumerate(self.ranked(), 1):
                w.writerow([r, f, repr(v), repr(abs(v))])


def attribute_dataset(model: Differentiable, X: np.ndarray, baseline: np.ndarray | None = None, m: int = 50,
                      feature_names: Sequence[str] = FEATURE_NAMES, sample_source: str = "test",
                      keep_samples: bool = False) -> AttributionReport:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise AttributionError("empty sample set")
    base = np.zeros(X.shape[1]) if baseline is None else np.asarray(baseline, dtype=float)
    ig, _, residual = integrated_gradients_batch(model, X, base, m)
    return AttributionReport(tuple(feature_names), ig.mean(axis=0), base, m, residual, sample_source,
                             "predicted", ig if keep_samples else None)
