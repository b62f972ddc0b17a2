"""Shared builders for hand-made corpora and small synthetic runs."""
from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from traveldist.data_model import (AuxTables, Corpus, District, DistrictTable, PatientProfile, ProviderProfile,
                                   VisitRecord)
from traveldist.synth import generate_corpus, preset


def line_districts(n: int = 3, step_deg: float = 0.1, population: int = 10_000, physicians: int = 10) -> DistrictTable:
    ds = [District(f"D{i}", 23.0, 120.0 + i * step_deg, "north", population, physicians) for i in range(n)]
    return DistrictTable.from_pairs(ds, [(f"D{i}", f"D{i + 1}") for i in range(n - 1)])


def weekday_calendar(year: int = 2019) -> dict[date, str]:
    out, d = {}, date(year, 1, 1)
    while d.year == year:
        out[d] = "workday" if d.weekday() < 5 else "non_workday"
        d = date.fromordinal(d.toordinal() + 1)
    return out


def patient(pid: str, district: str = "D0", identity: str = "type_A", gender: str | None = "female",
            birthdate: date | None = date(1970, 5, 1)) -> PatientProfile:
    return PatientProfile(pid, birthdate, gender, False, identity, district)


def visit(vid: str, pid: str, provider: str, day: date | None = date(2019, 3, 4), dx: str = "I10",
          emergency: bool = False, **kw) -> VisitRecord:
    return VisitRecord(vid, pid, provider, day, dx, (dx,) if dx else (), (), emergency, **kw)


def tiny_corpus() -> Corpus:
    """Three districts on a line, one provider in each, two patients with valid visits."""
    districts = line_districts()
    providers = [ProviderProfile(f"P{i}", f"D{i}", "clinic") for i in range(3)]
    patients = [patient("A"), patient("B", "D1")]
    visits = [visit("v1", "A", "P0"), visit("v2", "A", "P1", date(2019, 3, 5)),
              visit("v3", "B", "P1"), visit("v4", "B", "P2", date(2019, 6, 1), dx="J10")]
    return Corpus(visits, patients, providers, districts, AuxTables(calendar=weekday_calendar()))


@pytest.fixture(scope="session")
def small_synth_corpus():
    return generate_corpus(preset("clean", seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synth_arrays():
    """Normalized (balanced train, natural test) arrays built from the small preset."""
    from datetime import date

    from traveldist.data_model import apply_exclusions
    from traveldist.dataset import assemble, fit_normalizer, split_and_balance, to_arrays
    from traveldist.features import featurize
    from traveldist.geo import estimate_all

    corpus = generate_corpus(preset("small", seed=5))
    window = (date(2019, 1, 1), date(2019, 12, 31))
    kept, _ = apply_exclusions(corpus, window)
    por = estimate_all(kept.patients, kept.visits_by_patient(), kept.provider_index(), kept.districts, kept.aux)
    kept, _ = apply_exclusions(kept, window, {k: v.por_district for k, v in por.items()})
    X, y = to_arrays(assemble(featurize(kept, por).rows))
    plan = split_and_balance(y, 0)
    norm = fit_normalizer(X[plan.train])
    return norm.apply(X[plan.balanced]), y[plan.balanced], norm.apply(X[plan.test]), y[plan.test]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, title, seconds = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}  ({seconds:.1f} s)")
