"""Deterministic synthetic claims corpora on a grid of districts with a planted travel signal.

World model
-----------
Districts sit on a rows x cols grid with ``spacing_km`` between centroids, so the
Chebyshev ring between two districts fixes the distance label: same district
-> L0, ring 1 -> L1 (5.2-7.4 km), ring 2 -> L2 (10.4-14.7 km), ring >= 3 -> L3.

Three district kinds carry hospitals: hubs (highest physician density, medical
centers), towns (medium density, regional hospitals) and a share of ordinary
districts (district hospitals). Every district has clinics, and each patient
has a main clinic at home.

Per visit, a far trip happens with probability
``sigmoid(b + s_chronic*z(K) + s_severity*severe - s_density*z(home density))``
with ``b`` calibrated to the target local share. A far trip goes to a hospital
whose ring is a fixed function of (hospital kind, chronic band of the patient),
so the label is recoverable from destination density, provider popularity
(clinics collect the usual-provider votes) and the chronic-disease count.
With probability ``1 - popularity_strength`` the trip instead lands on any
provider in a random ring. All-zero strengths remove every link between the
features and the label.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .data_model import (AuxTables, Corpus, District, DistrictTable, PatientProfile, ProviderProfile,
                         VisitRecord, write_corpus)
from .geo import EARTH_RADIUS_KM


class SynthError(ValueError):
    pass


CHRONIC_POOL = ("E11", "I10", "E78", "I25", "J44", "N18", "M17", "K21", "I48", "F32", "G40", "E03")
ACUTE_POOL = ("R50", "M54", "K29", "L30", "H10", "A09", "S93", "T14", "R10", "N39", "R51", "K52")
FLU_POOL = ("J06", "J10", "J11", "J20", "J02")
CANCER_POOL = ("C50", "C34", "C18")
ER_POOL = ("S06", "R07", "I21", "T78", "R55")

# ring of a far trip by (chronic band, hospital reach kind 1..3)
RING_TABLE = ((1, 1, 2), (1, 2, 3), (3, 3, 3))
LEVEL_OF_KIND = {1: "district_hospital", 2: "regional", 3: "medical_center"}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    grid_rows: int = 12
    grid_cols: int = 12
    spacing_km: float = 5.2
    origin: tuple[float, float] = (23.5, 120.5)
    patients: int = 2500
    type_a_share: float = 0.6
    moved_share: float = 0.1  # non-type-A patients registered far from home
    er_rule_share: float = 0.15  # non-type-A patients identified by emergencies instead of flu visits
    visits_base: int = 6
    visits_rate: float = 6.0
    visits_per_chronic: float = 4.0
    chronic_prob: float = 0.3  # K ~ Binomial(8, chronic_prob)
    cancer_share: float = 0.06
    er_rate: float = 0.02
    clinics_per_district: tuple[int, int] = (2, 4)
    hub_step: int = 4
    town_share: float = 0.25
    district_hospital_share: float = 0.4
    kind_weights: tuple[float, float, float] = (0.55, 0.2, 0.25)
    local_target: float = 0.65
    chronic_strength: float = 1.0
    density_strength: float = 0.5
    severity_strength: float = 1.0
    popularity_strength: float = 0.97
    main_clinic_share: float = 0.85
    year: int = 2019
    dirty: bool = False

    def validate(self) -> None:
        if min(self.grid_rows, self.grid_cols, self.patients, self.visits_base + 1) <= 0:
            raise SynthError("grid size, patient count and visit counts must be positive")
        if self.clinics_per_district[0] < 1 or self.clinics_per_district[1] < self.clinics_per_district[0]:
            raise SynthError("need at least one clinic per district")
        for name in ("type_a_share", "moved_share", "er_rule_share", "chronic_prob", "cancer_share", "er_rate",
                     "town_share", "district_hospital_share", "local_target", "popularity_strength",
                     "main_clinic_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1], got {v}")
        if min(self.kind_weights) < 0 or sum(self.kind_weights) <= 0:
            raise SynthError("kind_weights must be non-negative with a positive sum")
        if self.hub_step < 1:
            raise SynthError("hub_step must be positive")

    @property
    def null_signal(self) -> bool:
        return self.chronic_strength == 0 and self.density_strength == 0 and self.severity_strength == 0 \
            and self.popularity_strength == 0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for k in ("origin", "clinics_per_district", "kind_weights"):
            if k in d:
                d[k] = tuple(d[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SynthError(f"unknown synth settings {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    "default": SynthConfig(),
    "clean": SynthConfig(patients=300, grid_rows=8, grid_cols=8),
    "dirty": SynthConfig(patients=300, grid_rows=8, grid_cols=8, dirty=True),
    "small": SynthConfig(patients=700, grid_rows=10, grid_cols=10),
    # signal carried by physician density, provider popularity and chronic count only
    "planted": SynthConfig(chronic_strength=2.0, density_strength=1.5, severity_strength=0.0, cancer_share=0.0,
                           er_rate=0.0, er_rule_share=0.0),
    "null": SynthConfig(chronic_strength=0.0, density_strength=0.0, severity_strength=0.0,
                        popularity_strength=0.0, er_rule_share=0.0, er_rate=0.0, type_a_share=1.0),
}


def preset(name: str, seed: int | None = None, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise SynthError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[name]
    if seed is not None:
        overrides["seed"] = seed
    return replace(cfg, **overrides) if overrides else cfg


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class _World:
    districts: list[District]
    cells: np.ndarray  # (n, 2) grid row/col
    kind: np.ndarray  # 0 ordinary, 1 has district hospital, 2 town, 3 hub
    providers: list[ProviderProfile]
    prov_district: np.ndarray
    prov_kind: np.ndarray  # 0 clinic, 1..3 hospital reach kind
    ring: np.ndarray  # (n, n) Chebyshev ring between districts
    clinics_in: list[np.ndarray] = field(default_factory=list)
    providers_in: list[np.ndarray] = field(default_factory=list)
    er_site: list[int] = field(default_factory=list)


def _build_world(cfg: SynthConfig, rng: np.random.Generator) -> _World:
    R, C = cfg.grid_rows, cfg.grid_cols
    n = R * C
    lat0, lon0 = cfg.origin
    dlat = math.degrees(cfg.spacing_km / EARTH_RADIUS_KM)
    lat_mid = lat0 + dlat * (R - 1) / 2
    dlon = dlat / math.cos(math.radians(lat_mid))
    cells = np.array([(r, c) for r in range(R) for c in range(C)])
    kind = np.zeros(n, dtype=int)
    off = cfg.hub_step // 2 - (1 if cfg.hub_step > 2 else 0)
    for i, (r, c) in enumerate(cells):
        if (r - off) % cfg.hub_step == 0 and (c - off) % cfg.hub_step == 0:
            kind[i] = 3
    rest = np.flatnonzero(kind == 0)
    u = rng.random(len(rest))
    kind[rest[u < cfg.town_share]] = 2
    kind[rest[(u >= cfg.town_share) & (u < cfg.town_share + cfg.district_hospital_share * (1 - cfg.town_share))]] = 1

    districts = []
    for i, (r, c) in enumerate(cells):
        if kind[i] == 3:
            pop, dens = rng.integers(60_000, 80_001), rng.uniform(36, 44)
        elif kind[i] == 2:
            pop, dens = rng.integers(30_000, 40_001), rng.uniform(21, 27)
        else:
            pop, dens = rng.integers(10_000, 20_001), rng.uniform(6, 14)
        region = "east" if c >= C - max(1, C // 6) else ("north", "central", "south")[min(2, 3 * r // R)]
        districts.append(District(
            district_id=f"D{r:02d}{c:02d}",
            latitude=round(float(lat0 + r * dlat), 6),
            longitude=round(float(lon0 + c * dlon), 6),
            region_group=region,
            population=int(pop),
            physicians=int(round(dens * pop / 10_000)),
        ))

    providers, prov_district, prov_kind = [], [], []
    for i, d in enumerate(districts):
        if kind[i] >= 1:
            n_hosp = 2 if kind[i] == 3 and rng.random() < 0.5 else 1
            for h in range(n_hosp):
                providers.append(ProviderProfile(f"H{d.district_id[1:]}{h}", d.district_id, LEVEL_OF_KIND[kind[i]]))
                prov_district.append(i)
                prov_kind.append(kind[i])
        lo, hi = cfg.clinics_per_district
        for k in range(int(rng.integers(lo, hi + 1))):
            providers.append(ProviderProfile(f"C{d.district_id[1:]}{k}", d.district_id, "clinic"))
            prov_district.append(i)
            prov_kind.append(0)
    prov_district = np.array(prov_district)
    prov_kind = np.array(prov_kind)
    ring = np.max(np.abs(cells[:, None, :] - cells[None, :, :]), axis=2)
    w = _World(districts, cells, kind, providers, prov_district, prov_kind, ring)
    for i in range(n):
        here = np.flatnonzero(prov_district == i)
        w.providers_in.append(here)
        w.clinics_in.append(here[prov_kind[here] == 0])
        hosp = here[prov_kind[here] > 0]
        w.er_site.append(int(hosp[0]) if len(hosp) else int(w.clinics_in[i][0]))
    return w


def queen_pairs(cells: np.ndarray, ids: list[str]) -> list[tuple[str, str]]:
    """Queen contiguity on the grid: cells whose row and column differ by at most one."""
    pairs = []
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            if np.max(np.abs(cells[a] - cells[b])) == 1:
                pairs.append((ids[a], ids[b]))
    return pairs


def _calendar(year: int) -> dict[date, str]:
    holidays = {date(year, 1, 1), date(year, 2, 28), date(year, 4, 4), date(year, 5, 1), date(year, 10, 10)}
    cal = {}
    d = date(year, 1, 1)
    while d.year == year:
        cal[d] = "non_workday" if d.weekday() >= 5 or d in holidays else "workday"
        d += timedelta(days=1)
    return cal


def _chronic_band(K: int) -> int:
    return 0 if K <= 2 else (1 if K <= 4 else 2)


@dataclass
class _PatientPlan:
    pid: str
    home: int
    registered: int
    identity: str
    K: int
    chronic: tuple[str, ...]
    cancer: str | None
    n_visits: int
    main_clinic: int
    n_flu: int
    n_er: int


def _plan_patients(cfg: SynthConfig, w: _World, rng: np.random.Generator) -> list[_PatientPlan]:
    pops = np.array([d.population for d in w.districts], dtype=float)
    homes = rng.choice(len(pops), size=cfg.patients, p=pops / pops.sum())
    plans = []
    for k in range(cfg.patients):
        home = int(homes[k])
        identity = "type_A" if rng.random() < cfg.type_a_share else "other"
        registered = home
        er_rule = identity == "other" and rng.random() < cfg.er_rule_share
        if identity == "other" and not er_rule and rng.random() < cfg.moved_share:
            far = np.flatnonzero(w.ring[home] >= 3)
            if len(far):
                registered = int(rng.choice(far))
        K = int(rng.binomial(8, cfg.chronic_prob))
        chronic = tuple(sorted(rng.choice(CHRONIC_POOL, size=K, replace=False).tolist()))
        cancer = str(rng.choice(CANCER_POOL)) if rng.random() < cfg.cancer_share else None
        n_visits = cfg.visits_base + int(rng.poisson(cfg.visits_rate + cfg.visits_per_chronic * K))
        n_flu = 0 if er_rule else int(rng.integers(1, 4)) if identity == "other" else int(rng.binomial(2, 0.3))
        n_er = int(rng.integers(2, 4)) if er_rule else 0
        n_visits = max(n_visits, n_flu + n_er + 1)
        main = int(rng.choice(w.clinics_in[home]))
        plans.append(_PatientPlan(f"P{k:06d}", home, registered, identity, K, chronic, cancer, n_visits, main,
                                  n_flu, n_er))
    return plans


def _far_logit(cfg: SynthConfig, w: _World, plans: list[_PatientPlan]):
    K = np.array([p.K for p in plans], dtype=float)
    dens = np.array([w.districts[p.home].physician_density for p in plans])
    zK = (K - K.mean()) / (K.std() or 1.0)
    zD = (dens - dens.mean()) / (dens.std() or 1.0)
    return cfg.chronic_strength * zK - cfg.density_strength * zD


def _calibrate_bias(cfg: SynthConfig, base: np.ndarray, n_free: np.ndarray, n_severe: np.ndarray,
                    n_total: int) -> float:
    """Bias giving an expected local share of ``local_target`` over all visits."""
    n_forced = n_total - n_free.sum()

    def local_share(b):
        p_plain = _sigmoid(b + base)
        p_sev = _sigmoid(b + base + cfg.severity_strength)
        far = np.sum((n_free - n_severe) * p_plain + n_severe * p_sev)
        return (n_forced + n_free.sum() - far) / n_total

    lo, hi = -20.0, 20.0
    if local_share(hi) > cfg.local_target:
        return hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if local_share(mid) > cfg.local_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pick_far(cfg: SynthConfig, w: _World, home: int, band: int, rng: np.random.Generator) -> int:
    if rng.random() >= cfg.popularity_strength:
        r = int(rng.choice([1, 2, 3], p=np.array([17, 7, 11]) / 35))
        rings = w.ring[home]
        target = np.flatnonzero(rings >= 3) if r == 3 else np.flatnonzero(rings == r)
        if len(target) == 0:
            target = np.flatnonzero(rings >= 1)
        if cfg.null_signal:
            # districts weighted by population, as local visits are, so no provider trait tells the ring
            pops = np.array([w.districts[t].population for t in target], dtype=float)
            t = int(rng.choice(target, p=pops / pops.sum()))
            return int(rng.choice(w.providers_in[t]))
        pool = np.concatenate([w.providers_in[t] for t in target])
        return int(rng.choice(pool))
    rings = w.ring[home][w.prov_district]
    cands, weights = [], []
    for h in (1, 2, 3):
        r = RING_TABLE[band][h - 1]
        ok = (w.prov_kind == h) & ((rings >= 3) if r == 3 else (rings == r))
        idx = np.flatnonzero(ok)
        if len(idx):
            cands.append(idx)
            weights.append(np.full(len(idx), cfg.kind_weights[h - 1] / len(idx)))
    if not cands:
        idx = np.flatnonzero((w.prov_kind > 0) & (rings >= 1))
        return int(rng.choice(idx))
    pool = np.concatenate(cands)
    p = np.concatenate(weights)
    return int(rng.choice(pool, p=p / p.sum()))


def _days(year: int, n: int, rng: np.random.Generator) -> list[date]:
    start = date(year, 1, 1)
    span = (date(year + 1, 1, 1) - start).days
    return sorted(start + timedelta(days=int(x)) for x in rng.integers(0, span, size=n))


def generate_corpus(cfg: SynthConfig) -> Corpus:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    w = _build_world(cfg, rng)
    ids = [d.district_id for d in w.districts]
    table = DistrictTable.from_pairs(w.districts, queen_pairs(w.cells, ids))
    if not any(k > 0 for k in w.prov_kind):
        raise SynthError("configuration produced no hospitals")
    plans = _plan_patients(cfg, w, rng)

    # visit kinds per patient: flu, er, then free visits (some carrying the cancer code)
    severe_counts = []
    for p in plans:
        free = p.n_visits - p.n_flu - p.n_er
        severe_counts.append(int(rng.binomial(free, 0.5)) if p.cancer else 0)
    # under the null signal flu visits take the same near/far draw as every other visit
    n_free = np.array([p.n_visits - p.n_er - (0 if cfg.null_signal else p.n_flu) for p in plans])
    base = _far_logit(cfg, w, plans)
    b = _calibrate_bias(cfg, base, n_free, np.array(severe_counts), int(sum(p.n_visits for p in plans)))

    visits, patients = [], []
    vid = 0
    for p, base_p, n_sev in zip(plans, base, severe_counts):
        birth = date(int(rng.integers(1930, 2016)), int(rng.integers(1, 13)), int(rng.integers(1, 29)))
        patients.append(PatientProfile(p.pid, birth, "male" if rng.random() < 0.5 else "female",
                                       bool(rng.random() < 0.15), p.identity, ids[p.registered]))
        free = p.n_visits - p.n_flu - p.n_er
        kinds = ["flu"] * p.n_flu + ["er"] * p.n_er + ["sev"] * n_sev + ["plain"] * (free - n_sev)
        kinds = [kinds[i] for i in rng.permutation(len(kinds))]
        dates = _days(cfg.year, len(kinds), rng)
        band = _chronic_band(p.K) if not cfg.null_signal else int(rng.integers(0, 3))
        for j, (kind, when) in enumerate(zip(kinds, dates)):
            surgery = False
            triage = None
            emergency = False
            if kind == "flu" and not cfg.null_signal:
                prov = p.main_clinic
                dx = str(rng.choice(FLU_POOL))
            elif kind == "er" or (not cfg.null_signal and rng.random() < cfg.er_rate):
                prov = w.er_site[p.home]
                dx = str(rng.choice(ER_POOL))
                emergency = True
                triage = int(rng.integers(1, 6))
            else:
                sev = kind == "sev"
                far = rng.random() < _sigmoid(b + base_p + (cfg.severity_strength if sev else 0.0))
                if kind == "flu":
                    dx = str(rng.choice(FLU_POOL))
                elif sev:
                    dx = p.cancer
                elif p.chronic and rng.random() < 0.7:
                    dx = str(rng.choice(p.chronic))
                else:
                    dx = str(rng.choice(ACUTE_POOL))
                if far:
                    pband = band if not cfg.null_signal else int(rng.integers(0, 3))
                    prov = _pick_far(cfg, w, p.home, pband, rng)
                    surgery = bool(w.prov_kind[prov] > 0 and rng.random() < 0.25)
                elif cfg.null_signal:
                    prov = int(rng.choice(w.providers_in[p.home]))
                elif cfg.popularity_strength > 0 and rng.random() < cfg.main_clinic_share:
                    prov = p.main_clinic
                else:
                    pool = w.clinics_in[p.home] if cfg.popularity_strength > 0 else w.providers_in[p.home]
                    prov = int(rng.choice(pool))
            if cfg.null_signal:
                surgery = bool(rng.random() < 0.05)
            # the first visit lists every chronic condition of the patient
            extra = set(p.chronic) | ({p.cancer} if p.cancer else set()) if j == 0 else set()
            diags = tuple(sorted({dx} | extra))
            visits.append(VisitRecord(
                visit_id=f"V{vid:07d}", patient_id=p.pid, provider_id=w.providers[prov].provider_id,
                visit_date=when, primary_diagnosis=dx, all_diagnoses=diags,
                treatment_codes=("OP01",) if surgery else ("RX01",), is_emergency=emergency,
                triage_level=triage, involves_surgery=surgery))
            vid += 1

    aux = AuxTables(calendar=_calendar(cfg.year))
    corpus = Corpus(visits, patients, list(w.providers), table, aux)
    if cfg.dirty:
        corpus = _make_dirty(corpus, cfg, rng)
    return corpus


def _make_dirty(corpus: Corpus, cfg: SynthConfig, rng: np.random.Generator) -> Corpus:
    """Plant at least one record of every exclusion category."""
    visits = list(corpus.visits)
    patients = list(corpus.patients)
    providers = list(corpus.providers)
    districts = list(corpus.districts)
    pairs = corpus.districts.adjacency_pairs()
    home = patients[0].registered_district
    clinic = next(p.provider_id for p in providers if p.district == home)
    y = cfg.year

    def visit(i, pid, prov, when, dx="R50"):
        return VisitRecord(f"X{i:05d}", pid, prov, when, dx, (dx,) if dx else (), ("RX01",), False, None, False)

    # patients: missing birthdate, missing gender, conflicting gender, birthdate after visit,
    # no visits, undetermined residence
    patients += [
        PatientProfile("Q000001", None, "male", False, "type_A", home),
        PatientProfile("Q000002", date(1980, 1, 1), None, False, "type_A", home),
        PatientProfile("Q000003", date(1980, 1, 1), "male", False, "type_A", home),
        PatientProfile("Q000003", date(1980, 1, 1), "female", False, "type_A", home),
        PatientProfile("Q000004", date(y, 12, 1), "female", False, "type_A", home),
        PatientProfile("Q000005", date(1970, 1, 1), "male", False, "type_A", home),
        PatientProfile("Q000006", date(1970, 1, 1), "female", False, "other", home),
    ]
    n = 0
    for pid in ("Q000001", "Q000002", "Q000003"):
        visits.append(visit(n, pid, clinic, date(y, 3, 3)))
        n += 1
    visits.append(visit(n, "Q000004", clinic, date(y, 6, 1)))
    n += 1
    visits.append(visit(n, "Q000006", clinic, date(y, 6, 2)))  # no flu visit, no emergencies
    n += 1
    pid = patients[0].patient_id
    visits += [
        visit(n, pid, clinic, None),  # missing date
        visit(n + 1, pid, clinic, date(y - 1, 12, 30)),  # outside the study window
        visit(n + 2, pid, clinic, date(y, 5, 5), dx=""),  # missing primary diagnosis
        visit(n + 3, pid, "C_UNKNOWN", date(y, 5, 6)),  # unresolvable provider
        visit(n + 4, "Q999999", clinic, date(y, 5, 7)),  # unknown patient
    ]
    n += 5
    # providers: duplicate row and unknown district
    providers += [providers[0], ProviderProfile("C_NOWHERE", "D9999", "clinic")]
    visits.append(visit(n, pid, "C_NOWHERE", date(y, 5, 8)))
    n += 1
    # a district without population figures; its provider and visits drop out
    last = districts[-1]
    districts.append(District("DZERO", last.latitude + 0.2, last.longitude, last.region_group, 0, 0))
    providers.append(ProviderProfile("C_ZERO", "DZERO", "clinic"))
    visits.append(visit(n, pid, "C_ZERO", date(y, 5, 9)))
    table = DistrictTable.from_pairs(districts, pairs)
    return Corpus(visits, patients, providers, table, corpus.aux)


def generate(cfg: SynthConfig, out_dir: str | Path) -> Path:
    """Write the corpus files plus ``synth_config.json`` into ``out_dir``."""
    corpus = generate_corpus(cfg)
    out = write_corpus(corpus, out_dir)
    (Path(out) / "synth_config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n",
                                                 encoding="utf-8")
    return Path(out)


def study_window(cfg: SynthConfig) -> tuple[date, date]:
    return date(cfg.year, 1, 1), date(cfg.year, 12, 31)
