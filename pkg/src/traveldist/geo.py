"""Great-circle distances, place-of-residence estimation and distance labels."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data_model import (
    AuxTables,
    DistrictTable,
    PatientProfile,
    ProviderProfile,
    VisitRecord,
    matches_prefix,
)

EARTH_RADIUS_KM = 6371.0088
LABEL_EDGES_KM = (5.0, 10.0, 15.0)


class DistanceLabel(IntEnum):
    L0 = 0
    L1 = 1
    L2 = 2
    L3 = 3

    @property
    def text(self) -> str:
        return ("<5 km", "5-10 km", "10-15 km", ">15 km")[self.value]


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between two (lat, lon) points given in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def distance_matrix(lat: Sequence[float], lon: Sequence[float]) -> np.ndarray:
    """Pairwise haversine distances (km) between points; exactly symmetric, zero diagonal."""
    la = np.radians(np.asarray(lat, dtype=float))
    lo = np.radians(np.asarray(lon, dtype=float))
    dlat = la[:, None] - la[None, :]
    dlon = lo[:, None] - lo[None, :]
    h = np.sin(dlat / 2) ** 2 + np.cos(la)[:, None] * np.cos(la)[None, :] * np.sin(dlon / 2) ** 2
    d = 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def label_for_km(km: float) -> DistanceLabel:
    """Left-closed bins: [0,5) [5,10) [10,15) [15,inf)."""
    if km < LABEL_EDGES_KM[0]:
        return DistanceLabel.L0
    if km < LABEL_EDGES_KM[1]:
        return DistanceLabel.L1
    if km < LABEL_EDGES_KM[2]:
        return DistanceLabel.L2
    return DistanceLabel.L3


def label_distance(visit: VisitRecord, por: str, districts: DistrictTable,
                   providers: Mapping[str, ProviderProfile]) -> tuple[float, DistanceLabel]:
    home = districts[por]
    dest = districts[providers[visit.provider_id].district]
    km = 0.0 if home.district_id == dest.district_id else haversine_km(
        (home.latitude, home.longitude), (dest.latitude, dest.longitude))
    return km, label_for_km(km)


# ------------------------------------------------------------ POR cascade

RULE_TYPE_A = "type_A"
RULE_FLU_RESP = "flu_resp"
RULE_EMERGENCY = "emergency"
RULE_UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class PorAssignment:
    patient_id: str
    por_district: str | None
    rule_used: str

    def __post_init__(self):
        if (self.rule_used == RULE_UNDETERMINED) != (self.por_district is None):
            raise ValueError("por_district must be absent exactly when the rule is undetermined")


def _modal_district(visits: Sequence[VisitRecord], providers: Mapping[str, ProviderProfile]) -> str:
    """Most frequent provider district; ties go to the district of the latest such visit."""
    districts = [providers[v.provider_id].district for v in visits]
    counts = Counter(districts)
    top = max(counts.values())
    tied = {d for d, c in counts.items() if c == top}
    if len(tied) == 1:
        return next(iter(tied))
    order = sorted(range(len(visits)), key=lambda i: (visits[i].visit_date, visits[i].visit_id))
    for i in reversed(order):
        if districts[i] in tied:
            return districts[i]
    raise AssertionError("unreachable")


def _nearby_or_elsewhere(modal: str, registered: str, districts: DistrictTable) -> str:
    if modal == registered or modal in districts.neighbors(registered):
        return registered
    return modal


def estimate_por(patient: PatientProfile, visits: Iterable[VisitRecord],
                 providers: Mapping[str, ProviderProfile], districts: DistrictTable,
                 aux: AuxTables) -> PorAssignment:
    """Residence estimate from insurance identity, flu/respiratory visits, then emergencies.

    1. type A identity -> registered district.
    2. flu/respiratory visits -> their modal provider district, unless it is the
       registered district or one of its neighbors (then the registered district).
    3. two or more emergency visits -> same logic over emergency visits.
    4. otherwise undetermined.
    """
    pid = patient.patient_id
    if patient.insured_identity == "type_A":
        return PorAssignment(pid, patient.registered_district, RULE_TYPE_A)
    visits = [v for v in visits if v.provider_id in providers]
    flu = [v for v in visits if matches_prefix(v.primary_diagnosis, aux.flu_resp_codes)]
    if flu:
        modal = _modal_district(flu, providers)
        return PorAssignment(pid, _nearby_or_elsewhere(modal, patient.registered_district, districts), RULE_FLU_RESP)
    er = [v for v in visits if v.is_emergency]
    if len(er) >= 2:
        modal = _modal_district(er, providers)
        return PorAssignment(pid, _nearby_or_elsewhere(modal, patient.registered_district, districts), RULE_EMERGENCY)
    return PorAssignment(pid, None, RULE_UNDETERMINED)


def estimate_all(patients: Iterable[PatientProfile], visits_by_patient: Mapping[str, list[VisitRecord]],
                 providers: Mapping[str, ProviderProfile], districts: DistrictTable,
                 aux: AuxTables) -> dict[str, PorAssignment]:
    return {
        p.patient_id: estimate_por(p, visits_by_patient.get(p.patient_id, []), providers, districts, aux)
        for p in patients
    }
