import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigloc import campaign
from eigloc.campaign import (CSV_HEADER, CampaignConfig, ConfigError, csv_to_rows, evaluate_body,
                             expand_domain, fit_exponent, job_key, load_bundle, rows_to_csv, run)


def test_fit_exact_power_laws():
    for slope in (-2 / 3, 1 / 6, 1 / 2):
        pts = [(x, 3.0 * x**slope) for x in (8, 16, 32, 64)]
        fit = fit_exponent(pts)
        assert fit.slope == pytest.approx(slope, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)
        assert math.exp(fit.intercept) == pytest.approx(3.0)
    with pytest.raises(ValueError, match="nonpositive"):
        fit_exponent([(1, 1), (2, 0), (3, 1)])
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 2)])


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 10), st.lists(st.floats(1, 1e3), min_size=3, max_size=8,
                                                      unique=True))
def test_fit_recovers_slope(slope, c, xs):
    if np.ptp(np.log(xs)) < 1e-3:
        return
    fit = fit_exponent([(x, c * x**slope) for x in xs])
    assert fit.slope == pytest.approx(slope, abs=1e-8)


def test_expand_domain_sweeps():
    assert expand_domain("sector2d R=8,16,32 r=1") == [
        ("sector2d R=8 r=1", 8.0), ("sector2d R=16 r=1", 16.0), ("sector2d R=32 r=1", 32.0)]
    assert expand_domain("box 4x1,8x1") == [("box 4x1", 4.0), ("box 8x1", 8.0)]
    with pytest.raises(ConfigError):
        expand_domain("trapezoid R=1,2 T=3,4")


@pytest.mark.parametrize("text, msg", [
    ("checks = main\n", "empty corpus"),
    ("domain = box 4x1\nchecks = bogus\n", "unknown check"),
    ("domain = box 4x1\nladder = 0.1, 0.2, 0.05\n", "decreasing"),
    ("domain = box 4x1\nladder_rel = 1/16, 1/32\n", "three"),
    ("domain = box 4x1\ntol.nonsense = 1\n", "tolerance"),
    ("domain = box 4x1\nfoo = 1\n", "unknown config key"),
    ("domain = blob a=1\n", "unknown domain"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        CampaignConfig.parse(text)


def test_config_parse():
    cfg = CampaignConfig.parse("# c\ndomain = box 4x1\nladder_rel = 1/8, 1/16, 1/32\n"
                               "checks = green, chiti\ntol.solver = 1e-9\nworkers = 2\n")
    assert cfg.ladder_rel == (1 / 8, 1 / 16, 1 / 32)
    assert cfg.checks == ("green", "chiti") and cfg.tol == {"solver": 1e-9}
    job = cfg.body_job("box 4x1")
    assert job_key(job) == job_key(dict(reversed(list(job.items()))))
    assert len(job_key(job)) == 24


def test_evaluate_box():
    cfg = CampaignConfig.parse("domain = box 4x1\nladder_rel = 1/8, 1/16, 1/32\n"
                               "checks = green, chiti, main, sandwich\n")
    res = evaluate_body(cfg.body_job("box 4x1"))
    rows = {r["check_id"]: r for r in res["rows"]}
    assert rows["green"]["pass"] == "true" and rows["chiti"]["pass"] == "true"
    assert res["measures"]["lambda"] == pytest.approx(math.pi**2 * (1 + 1 / 16), rel=1e-4)
    # a downward-perturbed eigenvalue violates the lower bound
    bad = evaluate_body(cfg.body_job("box 4x1"), perturb_lambda=0.5)
    assert any(r["pass"] == "false" for r in bad["rows"] if r["check_id"].startswith("sandwich"))


MINI = "domain = box 1x1, 2x1, 3x1\nladder_rel = 1/8, 1/16, 1/32\nchecks = green, chiti, main\n"


def test_run_deterministic_and_resumable(tmp_path):
    cfg = CampaignConfig.parse(MINI + "output = first\n")
    a = run(cfg)
    store = tmp_path / "first" / "store"
    assert len(list(store.glob("*.json"))) == 3
    stamp = {p: p.stat().st_mtime_ns for p in store.iterdir()}
    again = run(cfg)
    assert {p: p.stat().st_mtime_ns for p in store.iterdir()} == stamp
    assert again.rows == a.rows
    other = run(CampaignConfig.parse(MINI + "output = second\n"))
    assert rows_to_csv(other.rows) == rows_to_csv(a.rows)
    assert "lambda" in a.fits[cfg.groups[0]]


def test_interrupted_run_resumes(tmp_path):
    cfg = CampaignConfig.parse(MINI + "output = part\n")
    partial = run(cfg, stop_after=1)
    assert len(partial.bodies) == 1
    full = run(cfg)
    assert len(full.bodies) == 3


def test_bundle_roundtrip(tmp_path):
    bundle = run(CampaignConfig.parse(MINI + "output = rt\n"))
    text = (tmp_path / "rt" / "report.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = csv_to_rows(text)
    assert [r["check_id"] for r in back] == [r["check_id"] for r in bundle.rows]
    loaded = load_bundle(tmp_path / "rt")
    assert rows_to_csv(loaded.rows) == text
    data = json.loads((tmp_path / "rt" / "summary.json").read_text())
    assert "timestamp" in data and data["failed"] is False
    with pytest.raises(ValueError):
        campaign.emit(bundle, tmp_path, "xml")
