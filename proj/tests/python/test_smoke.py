import json
import math
from pathlib import Path

import jsonschema
import pytest

import titepk

DATA = Path(__file__).resolve().parents[2] / "data"


def test_pk_profile_matches_single_dose_bateman():
    half_life, log_keff, t = 30.0, math.log(0.5), 10.0
    out = titepk.pk_profile(1.0, 504.0, half_life, log_keff, [t])
    ke, keff = math.log(2) / half_life, 0.5
    ce = keff / (keff - ke) * (math.exp(-ke * t) - math.exp(-keff * t))
    assert out["central"][0] == pytest.approx(math.exp(-ke * t), rel=1e-12)
    assert out["effect"][0] == pytest.approx(ce, rel=1e-10)


def test_skeleton():
    assert titepk.skeleton(6, nu=3) == pytest.approx([0.02, 0.12, 0.30, 0.50, 0.68, 0.80])


def test_read_dataset_and_errors():
    rows = titepk.read_dataset(DATA / "everolimus_full.csv")
    assert len(rows) == 28 and sum(r["dlt"] for r in rows) == 9
    with pytest.raises(titepk.DataError, match=r"bad_dlt.csv:3: dlt"):
        titepk.read_dataset(DATA.parent / "tests" / "data" / "bad_dlt.csv")


def test_analyze_everolimus_daily():
    r = titepk.analyze(DATA / "everolimus_config.json", str(DATA / "everolimus_daily.csv"))
    row = next(d for d in r["summary"]["doses"] if d["dose"] == 2.5)
    assert 0.11 <= row["p_od"] <= 0.17
    crm = titepk.analyze(DATA / "everolimus_config.json", str(DATA / "everolimus_daily.csv"), method="crm")
    assert crm["prob_lowest_above"] == pytest.approx(0.80, abs=0.05)


def test_bad_config_raises():
    with pytest.raises(titepk.ConfigurationError, match="log_kef"):
        titepk.analyze(DATA.parent / "tests" / "data" / "bad_config.json", [])


def test_simulate_metrics_are_probabilities():
    m = titepk.simulate(DATA / "scenarios_1_6.json", "1", method="titepk", reps=20, seed=3, threads=1)
    sel = [m[k]["value"] for k in ("p_tt", "p_od", "p_ud", "p_none")]
    assert all(0.0 <= v <= 1.0 for v in sel)
    assert sum(sel) == pytest.approx(1.0)
    again = titepk.simulate(DATA / "scenarios_1_6.json", "1", method="titepk", reps=20, seed=3, threads=1)
    assert again == m


def test_service_round_trip_against_schemas():
    schemas = titepk.schemas()
    svc = titepk.TrialService()
    with open(DATA / "everolimus_config.json") as f:
        cfg = json.load(f)
    create = {"config": cfg, "id": "py"}
    jsonschema.validate(create, schemas["create_trial"])
    status, body = svc.request("POST", "/trials", create)
    assert status == 201 and body["version"] == 0

    cohort = {"version": 0, "schedule": "weekly", "dose": 20,
              "patients": [{"dlt": False}, {"dlt": False}, {"dlt": True, "time": 300.0}]}
    jsonschema.validate(cohort, schemas["cohort"])
    status, body = svc.request("POST", "/trials/py/cohorts", cohort)
    assert status == 200 and body["version"] == 1
    status, _ = svc.request("POST", "/trials/py/cohorts", dict(cohort, dose=30))
    assert status == 409  # stale version

    bad = {"version": 1, "patients": []}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schemas["cohort"])
    status, _ = svc.request("POST", "/trials/py/cohorts", bad)
    assert status == 422

    status, _ = svc.request("GET", "/trials/nope")
    assert status == 404
    assert svc.sessions == 1
