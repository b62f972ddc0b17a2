"""Stage runner: synth -> ingest -> por -> featurize -> prep -> train -> evaluate -> explain -> report.

Every stage reads its inputs from the output tree, writes its own directory and
records timings, seeds and artifact digests in ``manifest.json``. Stages never
rewrite upstream artifacts, and identical config plus seed reproduces
identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
import zlib
from copy import deepcopy
from dataclasses import asdict, replace
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import attribute_dataset
from .baselines import (SVM_CONFIG, ForestConfig, LinearConfig, load_baseline, train_forest, train_logreg_ovr,
                        train_svm_ovr)
from .data_model import FILE_NAMES, apply_exclusions, load_corpus, write_corpus
from .dataset import (FEATURE_NAMES, N_FEATURES, Normalizer, Projection, SplitPlan, assemble, fit_normalizer,
                      pca_fit, pearson_matrix, read_vectors, split_and_balance, to_arrays, write_vectors)
from .features import DecayConfig, acc_index, featurize
from .geo import estimate_all
from .metrics import METRIC_NAMES, evaluate
from .nn.network import ABLATION_ORDER, build_paper_architectures
from .nn.training import TrainedModel, TrainingConfig, train
from .synth import SynthConfig, generate, preset, study_window

log = logging.getLogger(__name__)

STAGES = ("synth", "ingest", "por", "featurize", "prep", "train", "evaluate", "explain", "report")
CONVENTIONAL = ("ra", "ra_pca", "rf", "rf_pca", "svm", "svm_pca")
NEURAL = ("mlp", "cnn", "conv1_fco", "conv2_fco", "conv3_fco", "conv4_fco", "conv4_fc1_fco")
ALL_MODELS = CONVENTIONAL + NEURAL
ALIASES = {"cnn_proposed": "cnn"}
TABLE_V = (("ra", "RA"), ("ra_pca", "RA+PCA"), ("rf", "RF"), ("rf_pca", "RF+PCA"), ("svm", "SVM"),
           ("svm_pca", "SVM+PCA"), ("mlp", "MLP"), ("cnn", "CNN"))
ABLATION_LABELS = {
    "conv1_fco": "1 Conv + FCO", "conv2_fco": "2 Conv + FCO", "conv3_fco": "3 Conv + FCO",
    "conv4_fco": "4 Conv + FCO", "conv4_fc1_fco": "4 Conv + 1 FC + FCO", "cnn": "4 Conv + 2 FC + FCO (proposed)",
}
TABLE_ROWS = (("accuracy", "Accuracy (macro one-vs-rest)"), ("multiclass_accuracy", "Accuracy (multiclass)"),
              ("sensitivity", "Sensitivity"), ("specificity", "Specificity"), ("precision", "Precision"),
              ("f1", "F1"), ("auc", "AUC (macro)"))

DEFAULT_CONFIG: dict = {
    "seed": 7,
    "preset": "default",
    "synth": {},
    "corpus_dir": None,
    "window": None,
    "decay": {"edges_km": [0.0, 10.0, 20.0, 30.0], "weights": [1.0, 0.42, 0.09]},
    "prep": {"train_fraction": 0.8, "n_folds": 5, "variance_target": 0.95, "corr_threshold": 0.7},
    "training": {"learning_rate": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "batch_size": 256,
                 "max_epochs": 40, "patience": 5, "channels": 32},
    "training_overrides": {"mlp": {"max_epochs": 8}},
    "logreg": {"max_iter": 500, "tol": 1e-7, "l2": 0.0},
    "svm": {"C": 0.2, "max_iter": 1000, "tol": 0.1},
    "forest": {"n_trees": 100, "feature_subset": 5, "max_depth": None, "min_samples_leaf": 1, "bootstrap": True},
    "explain": {"model": "cnn", "m": 50, "samples": 1000, "source": "test", "baseline": "zero"},
    "models": list(ALL_MODELS),
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, dependency: str | None = None):
        super().__init__(message)
        self.stage, self.dependency = stage, dependency

    def to_json(self) -> dict:
        return {"error": "StageError", "stage": self.stage, "message": str(self), "dependency": self.dependency}


def merge_config(base: dict, override: dict) -> dict:
    out = deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = deepcopy(v)
    return out


def load_config(path: str | Path | None, seed: int | None = None, preset_name: str | None = None) -> dict:
    cfg = deepcopy(DEFAULT_CONFIG)
    if path is not None:
        cfg = merge_config(cfg, json.loads(Path(path).read_text(encoding="utf-8")))
    if seed is not None:
        cfg["seed"] = int(seed)
    if preset_name is not None:
        cfg["preset"] = preset_name
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def derive_seed(root: int, name: str) -> int:
    """Independent child seed per consumer, fixed by the root seed and the consumer name."""
    return int(np.random.SeedSequence([int(root), zlib.crc32(name.encode())]).generate_state(1)[0])


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def write_rows(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


class Pipeline:
    def __init__(self, config: dict, out_dir: str | Path):
        self.cfg = config
        self.out = Path(out_dir)
        self.seed = int(config["seed"])

    # -- paths

    @property
    def corpus_dir(self) -> Path:
        return Path(self.cfg["corpus_dir"]) if self.cfg.get("corpus_dir") else self.out / "corpus"

    def path(self, *parts: str) -> Path:
        return self.out.joinpath(*parts)

    def _require(self, stage: str, *paths: Path) -> None:
        for p in paths:
            if not p.exists():
                raise StageError(stage, f"missing upstream artifact {p}", str(p))

    # -- configuration helpers

    def synth_config(self) -> SynthConfig:
        base = preset(self.cfg["preset"], seed=self.seed)
        over = dict(self.cfg.get("synth") or {})
        return SynthConfig.from_json({**base.to_json(), **over}) if over else base

    def window(self) -> tuple[date, date] | None:
        w = self.cfg.get("window")
        if w:
            return date.fromisoformat(w[0]), date.fromisoformat(w[1])
        settings = self.corpus_dir / "synth_config.json"
        if settings.exists():
            return study_window(SynthConfig.from_json(read_json(settings)))
        return None

    def decay(self) -> DecayConfig:
        d = self.cfg["decay"]
        return DecayConfig(tuple(float(x) for x in d["edges_km"]), tuple(float(x) for x in d["weights"]))

    def training_config(self, arch: str) -> TrainingConfig:
        t = dict(self.cfg["training"])
        t.update((self.cfg.get("training_overrides") or {}).get(arch, {}))
        t["seed"] = derive_seed(self.seed, f"train:{arch}")
        return TrainingConfig.from_dict(t)

    # -- manifest

    def _update_manifest(self, stage: str, seconds: float, artifacts: list[Path], seeds: dict | None = None) -> None:
        path = self.path("manifest.json")
        man = read_json(path) if path.exists() else {}
        man["config"] = self.cfg
        man["config_hash"] = hashlib.sha256(canonical_json(self.cfg).encode()).hexdigest()
        man["root_seed"] = self.seed
        man["versions"] = {"traveldist": __version__, "python": platform.python_version(), "numpy": np.__version__}
        if self.corpus_dir.exists():
            man["inputs"] = {n: sha256_file(self.corpus_dir / f) for n, f in sorted(FILE_NAMES.items())
                             if (self.corpus_dir / f).exists()}
        stages = man.setdefault("stages", {})
        stages[stage] = {
            "seconds": round(seconds, 3),
            "artifacts": {str(p.relative_to(self.out)): sha256_file(p) for p in sorted(artifacts) if p.is_file()},
        }
        if seeds:
            stages[stage]["seeds"] = seeds
        write_json(path, man)

    def run_stage(self, stage: str, arch: str | None = None) -> list[Path]:
        if stage not in STAGES:
            raise StageError(stage, f"unknown stage {stage!r}")
        t0 = time.perf_counter()
        if stage == "train":
            artifacts, seeds = self.stage_train(arch or "all")
        else:
            artifacts, seeds = getattr(self, f"stage_{stage}")()
        name = f"train:{arch}" if stage == "train" and arch not in (None, "all") else stage
        self._update_manifest(name, time.perf_counter() - t0, artifacts, seeds)
        log.info("stage %s done in %.1fs", name, time.perf_counter() - t0)
        return artifacts

    def run_all(self) -> None:
        for stage in STAGES:
            if stage == "synth" and self.cfg.get("corpus_dir"):
                continue
            self.run_stage(stage)

    # -- stages

    def stage_synth(self):
        cfg = self.synth_config()
        out = generate(cfg, self.out / "corpus")
        return sorted(out.iterdir()), {"synth": cfg.seed}

    def stage_ingest(self):
        self._require("ingest", *(self.corpus_dir / f for f in ("visits.csv", "patients.csv", "providers.csv",
                                                                "districts.csv", "adjacency.csv")))
        corpus = load_corpus(self.corpus_dir)
        _, inaccessible = acc_index(corpus.districts.subset(
            d.district_id for d in corpus.districts if d.has_accessibility_inputs), self.decay())
        retained, report = apply_exclusions(corpus, self.window(), inaccessible=inaccessible)
        out = write_corpus(retained, self.path("ingest", "corpus"))
        arts = [write_json(self.path("ingest", "exclusions.json"), report.to_json()),
                write_json(self.path("ingest", "load_issues.json"), [str(i) for i in corpus.issues])]
        return arts + sorted(out.iterdir()), None

    def stage_por(self):
        src = self.path("ingest", "corpus")
        self._require("por", src / "visits.csv")
        corpus = load_corpus(src)
        por = estimate_all(corpus.patients, corpus.visits_by_patient(), corpus.provider_index(),
                           corpus.districts, corpus.aux)
        retained, report = apply_exclusions(corpus, self.window(), {k: v.por_district for k, v in por.items()})
        out = write_corpus(retained, self.path("por", "corpus"))
        rows = [(a.patient_id, a.por_district or "", a.rule_used) for a in por.values()]
        arts = [write_rows(self.path("por", "por.csv"), ("patient_id", "por_district", "rule_used"), rows),
                write_json(self.path("por", "exclusions.json"), report.to_json())]
        return arts + sorted(out.iterdir()), None

    def _load_por(self, stage: str):
        from .geo import PorAssignment
        p = self.path("por", "por.csv")
        self._require(stage, p)
        with open(p, newline="", encoding="utf-8") as fh:
            return {r["patient_id"]: PorAssignment(r["patient_id"], r["por_district"] or None, r["rule_used"])
                    for r in csv.DictReader(fh)}

    def stage_featurize(self):
        src = self.path("por", "corpus")
        self._require("featurize", src / "visits.csv")
        corpus = load_corpus(src)
        fs = featurize(corpus, self._load_por("featurize"), self.decay())
        vectors = assemble(fs.rows)
        p = self.path("features", "features.csv")
        p.parent.mkdir(parents=True, exist_ok=True)
        write_vectors(p, vectors)
        arts = [p,
                write_rows(self.path("features", "provider_votes.csv"), ("provider_id", "mfpc", "lfpc"),
                           [(k, a, b) for k, (a, b) in sorted(fs.votes.items())]),
                write_rows(self.path("features", "acc_index.csv"), ("district_id", "acc_index"),
                           [(k, repr(v)) for k, v in sorted(fs.acc.items())])]
        return arts, None

    def _features(self, stage: str):
        p = self.path("features", "features.csv")
        self._require(stage, p)
        vectors = read_vectors(p)
        X, y = to_arrays(vectors)
        km = np.array([v.km for v in vectors])
        return X, y, km

    def stage_prep(self):
        X, y, km = self._features("prep")
        pc = self.cfg["prep"]
        split_seed = derive_seed(self.seed, "split")
        plan = split_and_balance(y, split_seed, pc["train_fraction"], pc["n_folds"])
        norm = fit_normalizer(X[plan.train])
        Z = norm.apply(X)
        proj = pca_fit(Z[plan.balanced], pc["variance_target"])
        names = (*FEATURE_NAMES, "distance_km")
        corr = pearson_matrix(np.column_stack([X[plan.train], km[plan.train]]), names, pc["corr_threshold"])
        d = self.path("prep")
        d.mkdir(parents=True, exist_ok=True)
        plan.save(d / "split.json")
        summary = {
            "n_rows": int(len(y)),
            "class_counts": np.bincount(y, minlength=4).tolist(),
            "train_class_counts": np.bincount(y[plan.train], minlength=4).tolist(),
            "balanced_class_counts": np.bincount(y[plan.balanced], minlength=4).tolist(),
            "test_class_counts": np.bincount(y[plan.test], minlength=4).tolist(),
            "pca_k": proj.k,
            "pca_explained_ratio": proj.explained_ratio.tolist(),
            "correlated_pairs": [{"a": a, "b": b, "r": r} for a, b, r in corr.flagged],
            "constant_columns": list(corr.constant),
            "split_seed": split_seed,
        }
        arts = [d / "split.json",
                write_json(d / "normalizer.json", norm.to_json()),
                write_json(d / "pca.json", proj.to_json()),
                write_json(d / "prep.json", summary),
                write_rows(d / "correlation.csv", ("feature", *names),
                           [(n, *(repr(float(v)) for v in row)) for n, row in zip(names, corr.matrix)])]
        return arts, {"split": split_seed}

    def _prepared(self, stage: str):
        X, y, _ = self._features(stage)
        d = self.path("prep")
        self._require(stage, d / "split.json", d / "normalizer.json", d / "pca.json")
        plan = SplitPlan.load(d / "split.json")
        norm = Normalizer.from_json(read_json(d / "normalizer.json"))
        proj = Projection.from_json(read_json(d / "pca.json"))
        return norm.apply(X), y, plan, proj

    def stage_train(self, arch: str):
        arch = ALIASES.get(arch, arch)
        names = [m for m in self.cfg["models"]] if arch == "all" else [arch]
        for n in names:
            if n not in ALL_MODELS:
                raise StageError("train", f"unknown architecture {n!r}; choose from {', '.join(ALL_MODELS)}")
        Z, y, plan, proj = self._prepared("train")
        Xb, yb = Z[plan.balanced], y[plan.balanced]
        pos = {int(r): i for i, r in enumerate(plan.balanced)}
        folds = [np.array([pos[int(r)] for r in f], dtype=int) for f in plan.folds]
        archs = build_paper_architectures(N_FEATURES, int(self.cfg["training"].get("channels", 32)))
        arts, seeds = [], {}
        for n in names:
            stem = self.path("models", n)
            stem.parent.mkdir(parents=True, exist_ok=True)
            log.info("training %s on %d balanced rows", n, len(yb))
            if n in NEURAL:
                tc = self.training_config(n)
                seeds[n] = tc.seed
                model = train(archs[n], Xb, yb, folds, tc)
                arts += list(model.save(stem))
                continue
            base, use_pca = n.replace("_pca", ""), n.endswith("_pca")
            Xin = proj.apply(Xb) if use_pca else Xb
            if base == "ra":
                model = train_logreg_ovr(Xin, yb, LinearConfig(**self.cfg["logreg"]))
            elif base == "svm":
                s = dict(self.cfg["svm"])
                C = float(s.pop("C"))
                model = train_svm_ovr(Xin, yb, C, replace(SVM_CONFIG, **s))
            else:
                fseed = derive_seed(self.seed, f"train:{n}")
                seeds[n] = fseed
                model = train_forest(Xin, yb, ForestConfig(**self.cfg["forest"], seed=fseed))
            arts += list(model.save(stem))
        return arts, seeds

    def _trained(self) -> list[str]:
        return [n for n in ALL_MODELS if self.path("models", n + ".json").exists()]

    def _predict(self, name: str, Z: np.ndarray, proj: Projection):
        stem = self.path("models", name)
        if name in NEURAL:
            model = TrainedModel.load(stem)
            scores = model.predict_proba(Z)
            return scores.argmax(axis=1), scores, model
        model = load_baseline(stem)
        Xin = proj.apply(Z) if name.endswith("_pca") else Z
        labels, scores = model.predict(Xin)
        return labels, scores, model

    def stage_evaluate(self):
        names = self._trained()
        if not names:
            raise StageError("evaluate", "no trained model found; run `train` first", str(self.path("models")))
        Z, y, plan, proj = self._prepared("evaluate")
        Zt, yt = Z[plan.test], y[plan.test]
        arts = []
        summary = {}
        for n in names:
            labels, scores, model = self._predict(n, Zt, proj)
            rep = evaluate(yt, labels, scores)
            out = rep.to_json()
            if isinstance(model, TrainedModel):
                val = [e["val_macro_f1"] for e in model.training_log if "val_macro_f1" in e]
                out["validation"] = {"best_epoch": model.best_epoch, "epochs_run": len(model.training_log),
                                     "mean_fold_macro_f1": float(np.mean(val)) if val else None,
                                     "selection_score": model.training_log[model.best_epoch]["selection_score"]
                                     if model.best_epoch is not None and val else None}
            elif getattr(model, "converged", True) is False:
                out["warnings"] = ["optimizer did not converge within the iteration budget"]
            arts.append(write_json(self.path("eval", "metrics", n + ".json"), out))
            curves = []
            for c, curve in enumerate(rep.roc or []):
                if curve is None:
                    continue
                for fpr, tpr in zip(*curve):
                    curves.append((c, repr(float(fpr)), repr(float(tpr))))
            arts.append(write_rows(self.path("eval", "roc", n + ".csv"), ("class", "fpr", "tpr"), curves))
            summary[n] = {**{m: rep.macro[m] for m in METRIC_NAMES}, "multiclass_accuracy": rep.overall_accuracy,
                          "auc": rep.macro_auc}
        arts.append(write_json(self.path("eval", "summary.json"), summary))
        return arts, None

    def stage_explain(self):
        ec = self.cfg["explain"]
        name = ALIASES.get(ec["model"], ec["model"])
        stem = self.path("models", name)
        self._require("explain", stem.with_suffix(".json"))
        model = TrainedModel.load(stem)
        Z, y, plan, _ = self._prepared("explain")
        rows = {"test": plan.test, "train": plan.balanced}[ec["source"]]
        seed = derive_seed(self.seed, "explain")
        if ec.get("samples") and len(rows) > ec["samples"]:
            rows = np.sort(np.random.default_rng(seed).choice(rows, size=int(ec["samples"]), replace=False))
        # zero is the origin of the normalized space; train_mean is the average balanced training visit
        if ec["baseline"] == "zero":
            base = np.zeros(Z.shape[1])
        elif ec["baseline"] == "train_mean":
            base = Z[plan.balanced].mean(axis=0)
        else:
            raise StageError("explain", f"unknown baseline policy {ec['baseline']!r}; use zero or train_mean")
        report = attribute_dataset(model.network, Z[rows], base, m=int(ec["m"]), sample_source=ec["source"])
        out = report.to_json()
        out["model"] = name
        out["baseline_policy"] = ec["baseline"]
        js = write_json(self.path("explain", "ig.json"), out)
        cs = write_rows(self.path("explain", "ig.csv"), ("rank", "feature", "weight", "abs_weight"),
                        [(r, f, repr(w), repr(abs(w))) for r, (f, w) in enumerate(report.ranked(), 1)])
        return [js, cs], {"explain": seed}

    def stage_report(self):
        summary_p = self.path("eval", "summary.json")
        self._require("report", summary_p, self.path("prep", "correlation.csv"))
        summary = read_json(summary_p)
        d = self.path("report")
        d.mkdir(parents=True, exist_ok=True)
        arts = []
        cols_v = [(k, lab) for k, lab in TABLE_V if k in summary]
        arts.append(write_rows(d / "table_v.csv", ("metric", *(lab for _, lab in cols_v)),
                               [(lab, *(_fmt(summary[k][m]) for k, _ in cols_v)) for m, lab in TABLE_ROWS]))
        cols_vi = [k for k in ABLATION_ORDER if k in summary]
        arts.append(write_rows(d / "table_vi.csv", ("metric", *(ABLATION_LABELS[k] for k in cols_vi)),
                               [(lab, *(_fmt(summary[k][m]) for k in cols_vi)) for m, lab in TABLE_ROWS]))
        arts.append(write_rows(d / "ablation_trend.csv", ("step", "model", "label", "multiclass_accuracy",
                                                          "macro_accuracy", "macro_auc"),
                               [(i, k, ABLATION_LABELS[k], _fmt(summary[k]["multiclass_accuracy"]),
                                 _fmt(summary[k]["accuracy"]), _fmt(summary[k]["auc"]))
                                for i, k in enumerate(cols_vi, 1)]))
        heat = d / "heatmap.csv"
        heat.write_bytes(self.path("prep", "correlation.csv").read_bytes())
        arts.append(heat)
        for n in summary:
            src = self.path("eval", "roc", n + ".csv")
            if src.exists():
                dst = d / "roc" / (n + ".csv")
                dst.parent.mkdir(exist_ok=True)
                dst.write_bytes(src.read_bytes())
                arts.append(dst)
        ig = read_json(self.path("explain", "ig.json")) if self.path("explain", "ig.json").exists() else None
        if ig:
            arts.append(write_rows(d / "ig_bars.csv", ("rank", "feature", "weight"),
                                   [(i, r["feature"], repr(r["weight"])) for i, r in enumerate(ig["ranked"], 1)]))
        prep = read_json(self.path("prep", "prep.json"))
        arts.append(self._write_summary(d / "summary.md", summary, prep, ig))
        return arts, None

    def _write_summary(self, path: Path, summary: dict, prep: dict, ig: dict | None) -> Path:
        lines = ["# Travel-distance prediction report", ""]
        lines += [f"Root seed {self.seed}, preset `{self.cfg['preset']}`.", ""]
        cc = prep["class_counts"]
        lines += ["## Data", "",
                  f"- Visits: {prep['n_rows']} (L0/L1/L2/L3 = {' / '.join(map(str, cc))})",
                  f"- Balanced training rows: {sum(prep['balanced_class_counts'])} "
                  f"({prep['balanced_class_counts'][0]} per class)",
                  f"- Test rows: {sum(prep['test_class_counts'])}",
                  f"- PCA components kept: {prep['pca_k']} of {N_FEATURES}",
                  f"- Feature pairs with |r| > {self.cfg['prep']['corr_threshold']}: {len(prep['correlated_pairs'])}",
                  ""]
        for a in prep["correlated_pairs"]:
            lines.append(f"  - {a['a']} / {a['b']}: r = {a['r']:.3f}")
        lines += ["", f"## Models evaluated ({len(summary)})", "",
                  "| model | accuracy (multiclass) | accuracy (macro OvR) | sensitivity | specificity | precision | F1 | AUC |",
                  "|---|---|---|---|---|---|---|---|"]
        for n in ALL_MODELS:
            if n in summary:
                s = summary[n]
                auc = "n/a" if s["auc"] is None else f"{s['auc']:.4f}"
                lines.append(f"| {n} | {s['multiclass_accuracy']:.4f} | {s['accuracy']:.4f} | {s['sensitivity']:.4f} | "
                             f"{s['specificity']:.4f} | {s['precision']:.4f} | {s['f1']:.4f} | {auc} |")
        if ig:
            lines += ["", f"## Integrated Gradients ({ig['model']}, {ig['n_samples']} {ig['sample_source']} samples, "
                          f"m = {ig['m']}, {ig.get('baseline_policy', 'zero')} baseline)", "",
                      "| rank | feature | mean IG |", "|---|---|---|"]
            for i, r in enumerate(ig["ranked"][:10], 1):
                lines.append(f"| {i} | {r['feature']} | {r['weight']:.6f} |")
            lines += ["", f"Largest completeness residual: {ig['max_abs_residual']:.2e}"]
        lines += ["", "Plot data: `heatmap.csv`, `roc/<model>.csv`, `ablation_trend.csv`, `ig_bars.csv`.", ""]
        path.write_text("\n".join(lines), encoding="utf-8")
        return path
