import json
import math
from collections import Counter

import numpy as np
import pytest

from traveldist import data_model as dm
from traveldist.baselines import ForestConfig, train_forest, train_logreg_ovr
from traveldist.dataset import assemble, fit_normalizer, to_arrays
from traveldist.features import featurize
from traveldist.geo import estimate_all
from traveldist.pipeline import Pipeline, load_config
from traveldist.synth import PRESETS, SynthConfig, SynthError, generate, generate_corpus, preset, study_window


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def _featurized(cfg):
    corpus = generate_corpus(cfg)
    window = study_window(cfg)
    kept, _ = dm.apply_exclusions(corpus, window)
    por = estimate_all(kept.patients, kept.visits_by_patient(), kept.provider_index(), kept.districts, kept.aux)
    kept, _ = dm.apply_exclusions(kept, window, {k: v.por_district for k, v in por.items()})
    res = featurize(kept, por)
    X, y = to_arrays(assemble(res.rows))
    pids = np.array([r.patient_id for r in res.rows])
    return X, y, pids


def _km(a, b):
    # plain spherical law of cosines, independent of the package's haversine
    la1, lo1, la2, lo2 = map(math.radians, (a.latitude, a.longitude, b.latitude, b.longitude))
    c = math.sin(la1) * math.sin(la2) + math.cos(la1) * math.cos(la2) * math.cos(lo2 - lo1)
    return 6371.0088 * math.acos(min(1.0, c))


def test_same_seed_gives_byte_identical_files(tmp_path):
    cfg = preset("clean", seed=11)
    a, b = generate(cfg, tmp_path / "a"), generate(cfg, tmp_path / "b")
    fa, fb = _files(a), _files(b)
    assert fa == fb
    assert {"visits.csv", "patients.csv", "providers.csv", "districts.csv", "adjacency.csv"} <= set(fa)


def test_different_seeds_differ(tmp_path):
    a = generate(preset("clean", seed=1), tmp_path / "a")
    b = generate(preset("clean", seed=2), tmp_path / "b")
    assert (a / "visits.csv").read_bytes() != (b / "visits.csv").read_bytes()


def test_clean_preset_has_no_exclusions(small_synth_corpus):
    cfg = preset("clean", seed=3)
    kept, rep = dm.apply_exclusions(small_synth_corpus, study_window(cfg))
    assert rep.total() == 0
    por = estimate_all(kept.patients, kept.visits_by_patient(), kept.provider_index(), kept.districts, kept.aux)
    _, rep2 = dm.apply_exclusions(kept, study_window(cfg), {k: v.por_district for k, v in por.items()})
    assert rep2.total() == 0


def test_dirty_preset_plants_every_category(tmp_path):
    cfg = load_config(None, 5, "dirty")
    pipe = Pipeline(cfg, tmp_path)
    for stage in ("synth", "ingest", "por"):
        pipe.run_stage(stage)
    seen = set()
    for p in (tmp_path / "ingest" / "exclusions.json", tmp_path / "por" / "exclusions.json"):
        for kind, cats in json.loads(p.read_text())["excluded"].items():
            seen |= {c for c, n in cats.items() if n > 0}
    expected = {
        dm.MISSING_BIRTHDATE_OR_GENDER, dm.CONFLICTING_GENDER, dm.BIRTHDATE_AFTER_VISIT, dm.NO_VISITS,
        dm.POR_UNDETERMINED, dm.MISSING_DATE, dm.OUTSIDE_WINDOW, dm.MISSING_PRIMARY_DX,
        dm.UNRESOLVABLE_PROVIDER, dm.UNKNOWN_PATIENT, dm.PATIENT_EXCLUDED, dm.UNKNOWN_DISTRICT,
        dm.DISTRICT_EXCLUDED, dm.NO_ACCESSIBILITY, "duplicate row",
    }
    assert expected <= seen


def test_adjacency_symmetric_and_matches_coordinates(small_synth_corpus):
    table = small_synth_corpus.districts
    ids = [d.district_id for d in table]
    spacing = PRESETS["clean"].spacing_km
    for a in ids:
        for b in table.neighbors(a):
            assert a in table.neighbors(b)
    for i, a in enumerate(table):
        for b in list(table)[i + 1:]:
            near = _km(a, b) <= 1.6 * spacing
            assert near == (b.district_id in table.neighbors(a.district_id)), (a.district_id, b.district_id)


def test_centroid_spacing_about_five_km(small_synth_corpus):
    table = small_synth_corpus.districts
    d = [_km(a, table[b]) for a in table for b in table.neighbors(a.district_id)]
    assert 4.5 < min(d) and min(d) < 5.5


def test_default_preset_label_mix():
    _, y, _ = _featurized(preset("default", patients=1000))
    share = np.bincount(y, minlength=4) / len(y)
    assert 0.60 <= share[0] <= 0.70
    assert share.max() >= 3 * share.min()
    assert share.min() > 0


def test_null_signal_is_near_chance_on_unseen_patients():
    X, y, pids = _featurized(preset("null", patients=1200))
    rng = np.random.default_rng(0)
    people = np.unique(pids)
    held = np.isin(pids, rng.choice(people, len(people) // 5, replace=False))
    tr, te = np.flatnonzero(~held), np.flatnonzero(held)

    def balanced(rows):
        m = np.bincount(y[rows], minlength=4).min()
        return np.concatenate([rng.choice(rows[y[rows] == c], m, replace=False) for c in range(4)])

    bal, bt = balanced(tr), balanced(te)
    norm = fit_normalizer(X[tr])
    Xb, Xt = norm.apply(X[bal]), norm.apply(X[bt])
    for model in (train_logreg_ovr(Xb, y[bal]), train_forest(Xb, y[bal], ForestConfig(n_trees=30))):
        pred = model.predict(Xt)[0]
        acc = np.mean(pred == y[bt])
        recall = [np.mean(pred[y[bt] == c] == c) for c in range(4)]
        assert 0.17 < acc < 0.33, acc
        assert max(recall) < 0.5, recall


def test_null_preset_switches_signal_off():
    assert PRESETS["null"].null_signal
    assert not PRESETS["default"].null_signal


@pytest.mark.parametrize("bad", [
    dict(patients=0), dict(grid_rows=0), dict(clinics_per_district=(0, 2)),
    dict(type_a_share=1.5), dict(kind_weights=(0.0, 0.0, 0.0)), dict(hub_step=0),
])
def test_invalid_config_raises(bad):
    with pytest.raises(SynthError):
        generate_corpus(SynthConfig(**bad))


def test_no_hospitals_is_infeasible():
    # a grid too small to hold a hub, with hospitals switched off elsewhere
    cfg = SynthConfig(grid_rows=1, grid_cols=1, hub_step=4, district_hospital_share=0.0, town_share=0.0,
                      patients=10)
    with pytest.raises(SynthError):
        generate_corpus(cfg)


def test_unknown_preset_and_settings_rejected():
    with pytest.raises(SynthError):
        preset("nope")
    with pytest.raises(SynthError):
        SynthConfig.from_json({"bogus": 1})


def test_config_round_trip():
    cfg = preset("small", seed=9)
    assert SynthConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_hospital_levels_and_region_groups(small_synth_corpus):
    levels = Counter(p.level for p in small_synth_corpus.providers)
    assert levels["clinic"] > 0 and levels["medical_center"] > 0
    assert {d.region_group for d in small_synth_corpus.districts} <= set(dm.REGIONS)
