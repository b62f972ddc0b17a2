"""Patient, provider and incident features for each retained visit."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data_model import AuxTables, Corpus, DistrictTable, PatientProfile, VisitRecord, matches_prefix
from .geo import DistanceLabel, PorAssignment, distance_matrix, label_distance


class FeatureError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ continuity

def continuity_indices(providers: Sequence[str]) -> tuple[float, float, float, float]:
    """(UPC, LUPC, SECOC, COCI) of a chronologically ordered provider sequence.

    A single visit is treated as perfectly continuous: SECOC = COCI = 1.
    """
    n = len(providers)
    if n == 0:
        raise FeatureError("continuity indices need at least one visit")
    counts = Counter(providers)
    upc = max(counts.values()) / n
    lupc = min(counts.values()) / n
    if n == 1:
        return upc, lupc, 1.0, 1.0
    same = sum(1 for a, b in zip(providers, providers[1:]) if a == b)
    secoc = same / (n - 1)
    coci = (sum(c * c for c in counts.values()) - n) / (n * (n - 1))
    return upc, lupc, secoc, coci


def usual_provider_votes(providers: Sequence[str]) -> tuple[str, str]:
    """The patient's UPC and LUPC provider; ties go to the provider visited first."""
    if not providers:
        raise FeatureError("no visits to vote from")
    counts = Counter(providers)
    first_seen = {}
    for i, p in enumerate(providers):
        first_seen.setdefault(p, i)
    upc = min(counts, key=lambda p: (-counts[p], first_seen[p]))
    lupc = min(counts, key=lambda p: (counts[p], first_seen[p]))
    return upc, lupc


def vote_counts(votes: Iterable[tuple[str, str]]) -> dict[str, tuple[int, int]]:
    """Per provider (MFPC, LFPC): how many patients voted it as their UPC / LUPC."""
    mf: Counter = Counter()
    lf: Counter = Counter()
    for upc, lupc in votes:
        mf[upc] += 1
        lf[lupc] += 1
    return {p: (mf[p], lf[p]) for p in sorted(set(mf) | set(lf))}


# ------------------------------------------------------------ disease burden

def cci_score(codes: Iterable[str], cci_weights: Mapping[str, int]) -> int:
    """Sum of weights over comorbidity categories matched by any code; each category once."""
    codes = set(codes)
    return sum(w for prefix, w in cci_weights.items() if any(c.startswith(prefix) for c in codes))


def dir_ratio(primary_diagnosis: str, patient_visits: Sequence[VisitRecord]) -> float:
    """Share of the patient's visits whose primary diagnosis equals this one."""
    n = len(patient_visits)
    if n == 0:
        raise FeatureError("patient has no visits")
    same = sum(1 for v in patient_visits if v.primary_diagnosis == primary_diagnosis)
    return same / n


def age_at(birthdate: date, on: date) -> int:
    """Whole years completed."""
    return on.year - birthdate.year - ((on.month, on.day) < (birthdate.month, birthdate.day))


# ------------------------------------------------------------ accessibility

@dataclass(frozen=True)
class DecayConfig:
    """Step distance-decay weights: zone i covers [edges[i], edges[i+1]) km; the last zone is closed at d0."""

    edges_km: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0)
    weights: tuple[float, ...] = (1.0, 0.42, 0.09)

    def __post_init__(self):
        if len(self.edges_km) != len(self.weights) + 1:
            raise ConfigError("need one more zone edge than weights")
        if self.edges_km[0] != 0.0 or any(b <= a for a, b in zip(self.edges_km, self.edges_km[1:])):
            raise ConfigError("zone edges must start at 0 and increase")
        if self.weights[0] != 1.0 or any(b > a for a, b in zip(self.weights, self.weights[1:])) or min(self.weights) < 0:
            raise ConfigError("weights must start at 1 and be non-increasing and non-negative")

    @property
    def catchment_km(self) -> float:
        return self.edges_km[-1]

    def weight(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        idx = np.searchsorted(np.asarray(self.edges_km[1:-1]), d, side="right")
        w = np.asarray(self.weights)[np.minimum(idx, len(self.weights) - 1)]
        return np.where(d <= self.catchment_km, w, 0.0)


def e2sfca(supply: np.ndarray, demand: np.ndarray, dist: np.ndarray, decay: DecayConfig) -> np.ndarray:
    """Enhanced two-step floating catchment scores for locations sharing one distance matrix.

    Step 1: R_j = S_j / sum_k P_k W(d_kj); step 2: A_i = sum_j R_j W(d_ij).
    """
    w = decay.weight(dist)
    catch = w.T @ demand  # sum_k P_k W(d_kj), indexed by j
    ratio = np.divide(supply, catch, out=np.zeros_like(supply, dtype=float), where=catch > 0)
    return w @ ratio


def acc_index(districts: DistrictTable, decay: DecayConfig = DecayConfig()) -> tuple[dict[str, float], set[str]]:
    """Accessibility score per district, and the districts with no reachable supply."""
    ds = list(districts)
    if not ds:
        return {}, set()
    dist = distance_matrix([d.latitude for d in ds], [d.longitude for d in ds])
    scores = e2sfca(
        np.array([d.physicians for d in ds], dtype=float),
        np.array([d.population for d in ds], dtype=float),
        dist, decay,
    )
    out = {d.district_id: float(s) for d, s in zip(ds, scores)}
    return out, {k for k, s in out.items() if not s > 0}


# ------------------------------------------------------------ per-visit assembly

@dataclass(frozen=True)
class PatientFeatures:
    gender_flag: float
    low_income_flag: float
    total_visits: int
    total_diseases: int
    total_chronic: int
    upc: float
    lupc: float
    secoc: float
    coci: float
    cci: int


@dataclass(frozen=True)
class ProviderFeatures:
    physician_density: float
    mfpc: int
    lfpc: int
    region_onehot: tuple[int, int, int, int, int]
    acc_index: float


@dataclass(frozen=True)
class IncidentFeatures:
    is_surgery: float
    is_emergency: float
    is_severe: float
    is_workday: float
    dir: float


REGION_ORDER = ("north", "central", "south", "east", "island")


def _flag(b: bool) -> float:
    return 1.0 if b else -1.0


def patient_features(patient: PatientProfile, visits: Sequence[VisitRecord], aux: AuxTables) -> PatientFeatures:
    codes = set()
    for v in visits:
        codes.add(v.primary_diagnosis)
        codes.update(v.all_diagnoses)
    upc, lupc, secoc, coci = continuity_indices([v.provider_id for v in visits])
    return PatientFeatures(
        gender_flag=1.0 if patient.gender == "male" else -1.0,
        low_income_flag=_flag(patient.low_income),
        total_visits=len(visits),
        total_diseases=len(codes),
        total_chronic=sum(1 for c in codes if matches_prefix(c, aux.chronic_codes)),
        upc=upc, lupc=lupc, secoc=secoc, coci=coci,
        cci=cci_score(codes, aux.cci_weights),
    )


def incident_flags(visit: VisitRecord, aux: AuxTables, patient_visits: Sequence[VisitRecord]) -> IncidentFeatures:
    if visit.visit_date not in aux.calendar:
        raise ConfigError(f"calendar has no entry for {visit.visit_date}")
    severe = (visit.triage_level is not None and visit.triage_level <= 3) or matches_prefix(
        visit.primary_diagnosis, aux.catastrophic_codes)
    surgery = visit.involves_surgery or any(matches_prefix(c, aux.surgery_codes) for c in visit.treatment_codes)
    return IncidentFeatures(
        is_surgery=_flag(surgery),
        is_emergency=_flag(visit.is_emergency),
        is_severe=_flag(severe),
        is_workday=_flag(aux.calendar[visit.visit_date] == "workday"),
        dir=dir_ratio(visit.primary_diagnosis, patient_visits),
    )


@dataclass(frozen=True)
class VisitFeatures:
    visit_id: str
    patient_id: str
    age: int
    patient: PatientFeatures
    provider: ProviderFeatures
    incident: IncidentFeatures
    km: float
    label: DistanceLabel


@dataclass
class FeatureSet:
    rows: list[VisitFeatures]
    votes: dict[str, tuple[int, int]] = field(default_factory=dict)
    acc: dict[str, float] = field(default_factory=dict)


def featurize(corpus: Corpus, por: Mapping[str, PorAssignment], decay: DecayConfig = DecayConfig()) -> FeatureSet:
    """All per-visit features for a retained corpus with known residences.

    Patient-level indices and provider votes are global reductions over the
    whole study window, computed before the per-visit pass.
    """
    by_patient = corpus.visits_by_patient()
    patients = corpus.patient_index()
    providers = corpus.provider_index()
    acc, _ = acc_index(corpus.districts, decay)

    pfeats: dict[str, PatientFeatures] = {}
    votes = []
    for pid, vs in by_patient.items():
        pfeats[pid] = patient_features(patients[pid], vs, corpus.aux)
        votes.append(usual_provider_votes([v.provider_id for v in vs]))
    counts = vote_counts(votes)

    provider_cache: dict[str, ProviderFeatures] = {}
    for prov in corpus.providers:
        d = corpus.districts[prov.district]
        mf, lf = counts.get(prov.provider_id, (0, 0))
        provider_cache[prov.provider_id] = ProviderFeatures(
            physician_density=d.physician_density,
            mfpc=mf, lfpc=lf,
            region_onehot=tuple(int(d.region_group == r) for r in REGION_ORDER),
            acc_index=acc[d.district_id],
        )

    rows = []
    for pid, vs in by_patient.items():
        assignment = por.get(pid)
        if assignment is None or assignment.por_district is None:
            raise FeatureError(f"patient {pid} has no place of residence")
        birth = patients[pid].birthdate
        for v in vs:
            km, label = label_distance(v, assignment.por_district, corpus.districts, providers)
            rows.append(VisitFeatures(
                visit_id=v.visit_id,
                patient_id=pid,
                age=age_at(birth, v.visit_date),
                patient=pfeats[pid],
                provider=provider_cache[v.provider_id],
                incident=incident_flags(v, corpus.aux, vs),
                km=km,
                label=label,
            ))
    order = {v.visit_id: i for i, v in enumerate(corpus.visits)}
    rows.sort(key=lambda r: order[r.visit_id])
    return FeatureSet(rows=rows, votes=counts, acc=acc)
