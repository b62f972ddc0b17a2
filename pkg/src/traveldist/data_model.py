"""Record schemas, CSV/JSON loading and writing, and exclusion rules.

A corpus directory holds these files (UTF-8, header row, RFC-4180 quoting):

    visits.csv     visit_id, patient_id, provider_id, visit_date, primary_diagnosis,
                   all_diagnoses, treatment_codes, is_emergency, triage_level,
                   involves_surgery
    patients.csv   patient_id, birthdate, gender, low_income, insured_identity,
                   registered_district
    providers.csv  provider_id, district, level
    districts.csv  district_id, latitude, longitude, region_group, population, physicians
    adjacency.csv  district_a, district_b
    calendar.csv   date, day_type
    codes.json     cci_weights, chronic_codes, flu_resp_codes, catastrophic_codes,
                   surgery_codes

List-valued columns are ';'-joined. Booleans are 0/1. Dates are ISO-8601.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping

GENDERS = ("male", "female")
IDENTITIES = ("type_A", "other")
LEVELS = ("medical_center", "regional", "district_hospital", "clinic")
REGIONS = ("north", "central", "south", "east", "island")
DAY_TYPES = ("workday", "non_workday")

VISIT_COLUMNS = (
    "visit_id", "patient_id", "provider_id", "visit_date", "primary_diagnosis",
    "all_diagnoses", "treatment_codes", "is_emergency", "triage_level", "involves_surgery",
)
PATIENT_COLUMNS = (
    "patient_id", "birthdate", "gender", "low_income", "insured_identity", "registered_district",
)
PROVIDER_COLUMNS = ("provider_id", "district", "level")
DISTRICT_COLUMNS = (
    "district_id", "latitude", "longitude", "region_group", "population", "physicians",
)
ADJACENCY_COLUMNS = ("district_a", "district_b")
CALENDAR_COLUMNS = ("date", "day_type")

FILE_NAMES = {
    "visits": "visits.csv",
    "patients": "patients.csv",
    "providers": "providers.csv",
    "districts": "districts.csv",
    "adjacency": "adjacency.csv",
    "calendar": "calendar.csv",
    "codes": "codes.json",
}


class CorpusError(ValueError):
    """Raised for unreadable corpora or, in strict mode, any load issue."""


@dataclass(frozen=True)
class VisitRecord:
    visit_id: str
    patient_id: str
    provider_id: str
    visit_date: date | None
    primary_diagnosis: str
    all_diagnoses: tuple[str, ...] = ()
    treatment_codes: tuple[str, ...] = ()
    is_emergency: bool = False
    triage_level: int | None = None
    involves_surgery: bool = False


@dataclass(frozen=True)
class PatientProfile:
    patient_id: str
    birthdate: date | None
    gender: str | None
    low_income: bool
    insured_identity: str
    registered_district: str


@dataclass(frozen=True)
class ProviderProfile:
    provider_id: str
    district: str
    level: str


@dataclass(frozen=True)
class District:
    district_id: str
    latitude: float
    longitude: float
    region_group: str
    population: int
    physicians: int

    @property
    def physician_density(self) -> float:
        """Practicing physicians per 10,000 residents."""
        return self.physicians / self.population * 10_000.0

    @property
    def has_accessibility_inputs(self) -> bool:
        return self.population > 0 and self.physicians >= 0


class DistrictTable:
    """District attributes plus a symmetric, irreflexive queen-contiguity relation."""

    def __init__(self, districts: Iterable[District], neighbors: Mapping[str, Iterable[str]] | None = None):
        self._districts: dict[str, District] = {}
        for d in districts:
            if d.district_id in self._districts:
                raise CorpusError(f"duplicate district {d.district_id!r}")
            if not (-90.0 <= d.latitude <= 90.0 and -180.0 <= d.longitude <= 180.0):
                raise CorpusError(f"district {d.district_id!r}: coordinates out of range")
            self._districts[d.district_id] = d
        self._neighbors: dict[str, frozenset[str]] = {k: frozenset() for k in self._districts}
        for k, vs in (neighbors or {}).items():
            self._neighbors[k] = frozenset(vs)

    @classmethod
    def from_pairs(cls, districts: Iterable[District], pairs: Iterable[tuple[str, str]]) -> "DistrictTable":
        adj: dict[str, set[str]] = defaultdict(set)
        for a, b in pairs:
            if a == b:
                continue
            adj[a].add(b)
            adj[b].add(a)
        return cls(districts, adj)

    def __contains__(self, district_id: object) -> bool:
        return district_id in self._districts

    def __getitem__(self, district_id: str) -> District:
        return self._districts[district_id]

    def __iter__(self):
        return iter(self._districts.values())

    def __len__(self) -> int:
        return len(self._districts)

    @property
    def ids(self) -> list[str]:
        return list(self._districts)

    def neighbors(self, district_id: str) -> frozenset[str]:
        return self._neighbors.get(district_id, frozenset())

    def adjacency_pairs(self) -> list[tuple[str, str]]:
        """Each unordered neighbor pair once, in a stable order."""
        out = []
        for a in self._districts:
            for b in sorted(self._neighbors.get(a, ())):
                if a < b:
                    out.append((a, b))
        return out

    def subset(self, keep: Iterable[str]) -> "DistrictTable":
        keep = set(keep)
        return DistrictTable(
            (d for d in self if d.district_id in keep),
            {k: v & keep for k, v in self._neighbors.items() if k in keep},
        )

    def validate(self) -> list[str]:
        problems = []
        for a, vs in self._neighbors.items():
            if a in vs:
                problems.append(f"district {a!r} lists itself as neighbor")
            for b in vs:
                if a not in self._neighbors.get(b, ()):
                    problems.append(f"adjacency {a!r}-{b!r} is not symmetric")
                if b not in self._districts:
                    problems.append(f"adjacency references unknown district {b!r}")
        return problems


# Stub code sets. The real catalogs (Taiwan catastrophic-illness list, NHIRD
# treatment codes) are not public; these ICD-10 prefixes keep the pipeline runnable.
DEFAULT_CCI_WEIGHTS = {
    "I21": 1, "I22": 1, "I50": 1, "I70": 1, "I63": 1, "F03": 1, "J44": 1,
    "M05": 1, "K25": 1, "K70": 1, "E10": 1, "E11": 1, "G81": 2, "N18": 2,
    "C50": 2, "C34": 2, "K72": 3, "C78": 6, "B20": 6,
}
DEFAULT_CHRONIC_CODES = (
    "E11", "E10", "I10", "I11", "I25", "I50", "E78", "J44", "J45", "N18",
    "M05", "M10", "M17", "K70", "F32", "G30", "G40", "E03", "I48", "K21",
)
DEFAULT_FLU_RESP_CODES = ("J00", "J01", "J02", "J03", "J04", "J06", "J09", "J10", "J11", "J12", "J18", "J20", "J21", "J22")
DEFAULT_CATASTROPHIC_CODES = ("C", "N18.6", "D66", "G12.2", "Q90")
DEFAULT_SURGERY_CODES = ("OP",)


@dataclass(frozen=True)
class AuxTables:
    calendar: Mapping[date, str] = field(default_factory=dict)
    cci_weights: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_CCI_WEIGHTS))
    chronic_codes: tuple[str, ...] = DEFAULT_CHRONIC_CODES
    flu_resp_codes: tuple[str, ...] = DEFAULT_FLU_RESP_CODES
    catastrophic_codes: tuple[str, ...] = DEFAULT_CATASTROPHIC_CODES
    surgery_codes: tuple[str, ...] = DEFAULT_SURGERY_CODES

    def __post_init__(self):
        for k, w in self.cci_weights.items():
            if not isinstance(w, int) or isinstance(w, bool) or w <= 0:
                raise CorpusError(f"CCI weight for {k!r} must be a positive integer, got {w!r}")

    def codes_json(self) -> dict:
        return {
            "cci_weights": dict(sorted(self.cci_weights.items())),
            "chronic_codes": list(self.chronic_codes),
            "flu_resp_codes": list(self.flu_resp_codes),
            "catastrophic_codes": list(self.catastrophic_codes),
            "surgery_codes": list(self.surgery_codes),
        }


def matches_prefix(code: str, prefixes: Iterable[str]) -> bool:
    return any(code.startswith(p) for p in prefixes)


@dataclass(frozen=True)
class LoadIssue:
    file: str
    row: int  # 1-based data row (header excluded); 0 for file-level issues
    kind: str  # "parse" or "validation"
    message: str

    def __str__(self) -> str:
        return f"{self.file}:{self.row}: {self.kind}: {self.message}"


@dataclass
class Corpus:
    visits: list[VisitRecord]
    patients: list[PatientProfile]
    providers: list[ProviderProfile]
    districts: DistrictTable
    aux: AuxTables
    issues: list[LoadIssue] = field(default_factory=list)

    def patient_index(self) -> dict[str, PatientProfile]:
        return {p.patient_id: p for p in self.patients}

    def provider_index(self) -> dict[str, ProviderProfile]:
        return {p.provider_id: p for p in self.providers}

    def visits_by_patient(self) -> dict[str, list[VisitRecord]]:
        """Visits grouped per patient, chronologically (ties by visit_id)."""
        out: dict[str, list[VisitRecord]] = defaultdict(list)
        for v in self.visits:
            out[v.patient_id].append(v)
        for vs in out.values():
            vs.sort(key=lambda v: (v.visit_date or date.min, v.visit_id))
        return dict(out)


# ---------------------------------------------------------------- parsing

def _parse_date(text: str) -> date | None:
    text = text.strip()
    if not text:
        return None
    return date.fromisoformat(text)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(s for s in (x.strip() for x in text.split(";")) if s)


def _read_rows(path: Path, columns: tuple[str, ...], issues: list[LoadIssue]):
    if not path.exists():
        raise CorpusError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or ())]
        if missing:
            raise CorpusError(f"{path.name}: missing columns {missing}")
        for i, row in enumerate(reader, start=1):
            if None in row or any(v is None for v in row.values()):
                issues.append(LoadIssue(path.name, i, "parse", "wrong number of fields"))
                continue
            yield i, row


def _visit_from_row(row: dict) -> VisitRecord:
    triage = row["triage_level"].strip()
    level = int(triage) if triage else None
    if level is not None and not 1 <= level <= 5:
        raise ValueError(f"triage_level {level} outside 1-5")
    return VisitRecord(
        visit_id=row["visit_id"].strip(),
        patient_id=row["patient_id"].strip(),
        provider_id=row["provider_id"].strip(),
        visit_date=_parse_date(row["visit_date"]),
        primary_diagnosis=row["primary_diagnosis"].strip(),
        all_diagnoses=_split_list(row["all_diagnoses"]),
        treatment_codes=_split_list(row["treatment_codes"]),
        is_emergency=_parse_bool(row["is_emergency"]),
        triage_level=level,
        involves_surgery=_parse_bool(row["involves_surgery"]),
    )


def _patient_from_row(row: dict) -> PatientProfile:
    gender = row["gender"].strip() or None
    if gender is not None and gender not in GENDERS:
        raise ValueError(f"unknown gender {gender!r}")
    identity = row["insured_identity"].strip()
    if identity not in IDENTITIES:
        raise ValueError(f"unknown insured_identity {identity!r}")
    return PatientProfile(
        patient_id=row["patient_id"].strip(),
        birthdate=_parse_date(row["birthdate"]),
        gender=gender,
        low_income=_parse_bool(row["low_income"]),
        insured_identity=identity,
        registered_district=row["registered_district"].strip(),
    )


def _provider_from_row(row: dict) -> ProviderProfile:
    level = row["level"].strip()
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    return ProviderProfile(row["provider_id"].strip(), row["district"].strip(), level)


def _district_from_row(row: dict) -> District:
    region = row["region_group"].strip()
    if region not in REGIONS:
        raise ValueError(f"unknown region_group {region!r}")
    lat, lon = float(row["latitude"]), float(row["longitude"])
    if not (math.isfinite(lat) and math.isfinite(lon) and -90 <= lat <= 90 and -180 <= lon <= 180):
        raise ValueError("coordinates out of range")
    return District(
        district_id=row["district_id"].strip(),
        latitude=lat,
        longitude=lon,
        region_group=region,
        population=int(row["population"]),
        physicians=int(row["physicians"]),
    )


def load_codes(path: str | Path | None, calendar: Mapping[date, str] | None = None) -> AuxTables:
    """Code-set configuration; absent keys fall back to the stub defaults."""
    cfg: dict = {}
    if path is not None and Path(path).exists():
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    defaults = AuxTables()
    return AuxTables(
        calendar=dict(calendar or {}),
        cci_weights=dict(cfg.get("cci_weights", defaults.cci_weights)),
        chronic_codes=tuple(cfg.get("chronic_codes", defaults.chronic_codes)),
        flu_resp_codes=tuple(cfg.get("flu_resp_codes", defaults.flu_resp_codes)),
        catastrophic_codes=tuple(cfg.get("catastrophic_codes", defaults.catastrophic_codes)),
        surgery_codes=tuple(cfg.get("surgery_codes", defaults.surgery_codes)),
    )


def load_corpus(directory: str | Path, paths: Mapping[str, str | Path] | None = None, strict: bool = False) -> Corpus:
    """Parse a corpus directory.

    Malformed rows are skipped and reported in ``Corpus.issues`` with their row
    number. Dangling references (visit -> provider/patient, provider -> district)
    are reported as validation issues but the rows are kept, so that
    :func:`apply_exclusions` can count them. With ``strict=True`` any issue raises.
    """
    directory = Path(directory)
    files = {k: directory / v for k, v in FILE_NAMES.items()}
    for k, v in (paths or {}).items():
        files[k] = Path(v)
    issues: list[LoadIssue] = []

    def parse(kind, columns, builder):
        out = []
        for i, row in _read_rows(files[kind], columns, issues):
            try:
                out.append(builder(row))
            except (ValueError, KeyError) as exc:
                issues.append(LoadIssue(files[kind].name, i, "parse", str(exc)))
        return out

    districts = parse("districts", DISTRICT_COLUMNS, _district_from_row)
    pairs = parse("adjacency", ADJACENCY_COLUMNS, lambda r: (r["district_a"].strip(), r["district_b"].strip()))
    district_ids = {d.district_id for d in districts}
    good_pairs = []
    for i, (a, b) in enumerate(pairs, start=1):
        if a not in district_ids or b not in district_ids:
            issues.append(LoadIssue(files["adjacency"].name, i, "validation", f"unknown district in pair ({a}, {b})"))
        elif a == b:
            issues.append(LoadIssue(files["adjacency"].name, i, "validation", f"self-adjacency {a}"))
        else:
            good_pairs.append((a, b))
    table = DistrictTable.from_pairs(districts, good_pairs)

    def cal_row(r):
        day_type = r["day_type"].strip()
        if day_type not in DAY_TYPES:
            raise ValueError(f"unknown day_type {day_type!r}")
        d = _parse_date(r["date"])
        if d is None:
            raise ValueError("missing date")
        return d, day_type

    calendar = dict(parse("calendar", CALENDAR_COLUMNS, cal_row)) if files["calendar"].exists() else {}
    aux = load_codes(files["codes"], calendar)

    providers = parse("providers", PROVIDER_COLUMNS, _provider_from_row)
    for i, p in enumerate(providers, start=1):
        if p.district not in table:
            issues.append(LoadIssue(files["providers"].name, i, "validation", f"provider {p.provider_id}: unknown district {p.district}"))
    patients = parse("patients", PATIENT_COLUMNS, _patient_from_row)
    visits = parse("visits", VISIT_COLUMNS, _visit_from_row)
    provider_ids = {p.provider_id for p in providers}
    patient_ids = {p.patient_id for p in patients}
    for i, v in enumerate(visits, start=1):
        if v.provider_id not in provider_ids:
            issues.append(LoadIssue(files["visits"].name, i, "validation", f"visit {v.visit_id}: unknown provider {v.provider_id}"))
        if v.patient_id not in patient_ids:
            issues.append(LoadIssue(files["visits"].name, i, "validation", f"visit {v.visit_id}: unknown patient {v.patient_id}"))

    corpus = Corpus(visits, patients, providers, table, aux, issues)
    if strict and issues:
        raise CorpusError("; ".join(str(x) for x in issues[:20]))
    return corpus


# ---------------------------------------------------------------- writing

def _fmt_date(d: date | None) -> str:
    return d.isoformat() if d else ""


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def write_corpus(corpus: Corpus, directory: str | Path) -> Path:
    """Serialize a corpus in the canonical file layout; inverse of :func:`load_corpus`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_csv(directory / FILE_NAMES["visits"], VISIT_COLUMNS, (
        (v.visit_id, v.patient_id, v.provider_id, _fmt_date(v.visit_date), v.primary_diagnosis,
         ";".join(v.all_diagnoses), ";".join(v.treatment_codes), int(v.is_emergency),
         "" if v.triage_level is None else v.triage_level, int(v.involves_surgery))
        for v in corpus.visits))
    _write_csv(directory / FILE_NAMES["patients"], PATIENT_COLUMNS, (
        (p.patient_id, _fmt_date(p.birthdate), p.gender or "", int(p.low_income),
         p.insured_identity, p.registered_district)
        for p in corpus.patients))
    _write_csv(directory / FILE_NAMES["providers"], PROVIDER_COLUMNS, (
        (p.provider_id, p.district, p.level) for p in corpus.providers))
    _write_csv(directory / FILE_NAMES["districts"], DISTRICT_COLUMNS, (
        (d.district_id, repr(float(d.latitude)), repr(float(d.longitude)), d.region_group, d.population, d.physicians)
        for d in corpus.districts))
    _write_csv(directory / FILE_NAMES["adjacency"], ADJACENCY_COLUMNS, corpus.districts.adjacency_pairs())
    _write_csv(directory / FILE_NAMES["calendar"], CALENDAR_COLUMNS, (
        (d.isoformat(), t) for d, t in sorted(corpus.aux.calendar.items())))
    with open(directory / FILE_NAMES["codes"], "w", encoding="utf-8") as fh:
        json.dump(corpus.aux.codes_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


# ---------------------------------------------------------------- exclusions

# Category labels, keyed by entity kind.
MISSING_BIRTHDATE_OR_GENDER = "missing birthdate or gender"
CONFLICTING_GENDER = "two genders recorded"
BIRTHDATE_AFTER_VISIT = "birthdate later than the visit date"
NO_VISITS = "no visiting records"
POR_UNDETERMINED = "place of residence undetermined"
MISSING_DATE = "record without a date"
OUTSIDE_WINDOW = "outside study window"
MISSING_PRIMARY_DX = "no primary diagnosis"
UNRESOLVABLE_PROVIDER = "unresolvable provider or district"
UNKNOWN_PATIENT = "unknown patient"
PATIENT_EXCLUDED = "patient excluded"
UNKNOWN_DISTRICT = "unknown district"
DISTRICT_EXCLUDED = "district excluded"
NO_ACCESSIBILITY = "accessibility index unavailable"


@dataclass
class ExclusionReport:
    """Per entity kind, per category exclusion counts, plus input/retained totals."""

    counts: dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))
    input_totals: dict[str, int] = field(default_factory=dict)
    retained_totals: dict[str, int] = field(default_factory=dict)

    def add(self, kind: str, category: str, n: int = 1) -> None:
        self.counts[kind][category] += n

    def total(self, kind: str | None = None) -> int:
        kinds = [kind] if kind else list(self.counts)
        return sum(sum(self.counts[k].values()) for k in kinds)

    def to_json(self) -> dict:
        return {
            "input": dict(sorted(self.input_totals.items())),
            "retained": dict(sorted(self.retained_totals.items())),
            "excluded": {k: dict(sorted(v.items())) for k, v in sorted(self.counts.items()) if v},
        }


def _dedupe_patients(patients: list[PatientProfile], report: ExclusionReport) -> tuple[dict[str, PatientProfile], set[str]]:
    """Collapse duplicate profile rows; patients with conflicting genders are dropped."""
    rows: dict[str, list[PatientProfile]] = defaultdict(list)
    for p in patients:
        rows[p.patient_id].append(p)
    kept: dict[str, PatientProfile] = {}
    dropped: set[str] = set()
    for pid, ps in rows.items():
        genders = {p.gender for p in ps if p.gender}
        if len(genders) > 1:
            report.add("patients", CONFLICTING_GENDER)
            dropped.add(pid)
            continue
        p = ps[0]
        if p.birthdate is None or p.gender is None:
            report.add("patients", MISSING_BIRTHDATE_OR_GENDER)
            dropped.add(pid)
            continue
        kept[pid] = p
    return kept, dropped


def apply_exclusions(
    corpus: Corpus,
    window: tuple[date, date] | None = None,
    por: Mapping[str, str | None] | None = None,
    inaccessible: Iterable[str] = (),
) -> tuple[Corpus, ExclusionReport]:
    """Drop incomplete or questionable records.

    ``por`` maps patient id to its estimated district (``None`` when the rule
    cascade was undetermined); patients missing from it or mapped to ``None``
    are excluded. ``inaccessible`` lists districts whose accessibility score
    could not be established. The function is idempotent given the same
    arguments.
    """
    report = ExclusionReport()
    unique_patient_ids = {p.patient_id for p in corpus.patients}
    report.input_totals = {
        "visits": len(corpus.visits),
        "patients": len(unique_patient_ids),
        "providers": len(corpus.providers),
        "districts": len(corpus.districts),
    }

    # districts
    inaccessible = set(inaccessible)
    keep_districts = []
    for d in corpus.districts:
        if not d.has_accessibility_inputs or d.district_id in inaccessible:
            report.add("districts", NO_ACCESSIBILITY)
        else:
            keep_districts.append(d.district_id)
    districts = corpus.districts.subset(keep_districts)

    # providers
    providers: dict[str, ProviderProfile] = {}
    for p in corpus.providers:
        if p.provider_id in providers:
            report.add("providers", "duplicate row")
        elif p.district not in corpus.districts:
            report.add("providers", UNKNOWN_DISTRICT)
        elif p.district not in districts:
            report.add("providers", DISTRICT_EXCLUDED)
        else:
            providers[p.provider_id] = p

    patients, dropped = _dedupe_patients(corpus.patients, report)

    # visits, first pass
    visits: list[VisitRecord] = []
    for v in corpus.visits:
        if v.patient_id not in unique_patient_ids:
            report.add("visits", UNKNOWN_PATIENT)
        elif v.patient_id in dropped:
            report.add("visits", PATIENT_EXCLUDED)
        elif v.visit_date is None:
            report.add("visits", MISSING_DATE)
        elif window is not None and not (window[0] <= v.visit_date <= window[1]):
            report.add("visits", OUTSIDE_WINDOW)
        elif not v.primary_diagnosis:
            report.add("visits", MISSING_PRIMARY_DX)
        elif v.provider_id not in providers:
            report.add("visits", UNRESOLVABLE_PROVIDER)
        else:
            visits.append(v)

    # patient-level checks against retained visits
    by_patient: dict[str, list[VisitRecord]] = defaultdict(list)
    for v in visits:
        by_patient[v.patient_id].append(v)
    excluded_now: set[str] = set()
    for pid, p in patients.items():
        vs = by_patient.get(pid, [])
        if any(v.visit_date < p.birthdate for v in vs):
            report.add("patients", BIRTHDATE_AFTER_VISIT)
            excluded_now.add(pid)
        elif not vs:
            report.add("patients", NO_VISITS)
            excluded_now.add(pid)
        elif por is not None and por.get(pid) is None:
            report.add("patients", POR_UNDETERMINED)
            excluded_now.add(pid)
    if excluded_now:
        kept_visits = []
        for v in visits:
            if v.patient_id in excluded_now:
                report.add("visits", PATIENT_EXCLUDED)
            else:
                kept_visits.append(v)
        visits = kept_visits
    for pid in excluded_now:
        del patients[pid]

    # patient ids come out in first-seen input order
    ordered_patients = []
    seen = set()
    for p in corpus.patients:
        if p.patient_id in patients and p.patient_id not in seen:
            ordered_patients.append(patients[p.patient_id])
            seen.add(p.patient_id)
    retained = Corpus(
        visits=visits,
        patients=ordered_patients,
        providers=list(providers.values()),
        districts=districts,
        aux=corpus.aux,
        issues=list(corpus.issues),
    )
    report.retained_totals = {
        "visits": len(visits),
        "patients": len(ordered_patients),
        "providers": len(providers),
        "districts": len(districts),
    }
    return retained, report
