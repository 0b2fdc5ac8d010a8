import json
import math

import numpy as np
import pytest

from loopsoup.report import Entry, Report, write_report


def test_stat_entry():
    r = Report("t", seed=1)
    e = r.stat("mean", np.ones(10) + np.linspace(-0.1, 0.1, 10), 1.0)
    assert e.z == pytest.approx(0.0, abs=1e-12) and r.verdict == "pass"
    r.stat("bad", np.full(10, 2.0) + np.linspace(-0.1, 0.1, 10), 1.0)
    assert r.verdict == "fail" and [f.name for f in r.failures()] == ["bad"]


def test_known_variance_overrides_sample():
    r = Report("t")
    e = r.stat("m", [0.0, 0.2, 0.4, 0.6], 0.3, variance=4.0)
    assert e.std_error == pytest.approx(1.0)


def test_exact_and_discriminate():
    r = Report("t")
    r.exact("ok", 1.0 + 1e-12, 1.0)
    assert r.verdict == "pass"
    r.exact("off", 1.0 + 1e-8, 1.0)
    assert r.verdict == "fail"
    r2 = Report("t")
    r2.stat("differs", np.linspace(0.9, 1.1, 100) + 5, 1.0, kind="discriminate")
    assert r2.verdict == "pass"


def test_chisquare_pools_small_bins():
    r = Report("t")
    e = r.chisquare("c", [500, 250, 125, 62, 31, 16, 8, 4, 2, 2], 0.5 ** np.arange(1, 11) * (1 / (1 - 0.5**10)))
    assert e.p_value > 0.01
    e = r.chisquare("c2", [900, 100], [0.5, 0.5])
    assert e.p_value < 1e-6


def test_zero_variance_entry():
    r = Report("t")
    assert r.stat("const", np.ones(5), 1.0).z == 0.0
    assert math.isinf(r.stat("const2", np.ones(5), 2.0).z)
    assert r.verdict == "fail"


def test_payload_is_deterministic(tmp_path):
    r = Report("t", seed=3)
    r.stat("m", [1.0, 2.0, 3.0], 2.0)
    r.exact("x", 0.0, 0.0)
    r.pvalue("p", 1.2, 0.4, 10)
    d = json.loads(r.payload_json())
    assert d["format_version"] == 1 and d["verdict"] == "pass"
    assert d["thresholds"]["z_max"] == 4.0
    text = write_report(r, str(tmp_path / "r.json"))
    doc = json.loads(text)
    assert "created" in doc["header"]
    assert json.dumps(doc["report"], indent=2, sort_keys=True) == r.payload_json()


def test_table_lists_entries():
    r = Report("suite")
    r.stat("alpha", [1.0, 1.1, 0.9], 1.0)
    t = r.table()
    assert "suite: PASS" in t and "alpha" in t


def test_unknown_kind():
    with pytest.raises(ValueError):
        Report("t").add(Entry("x", "weird", 0.0, None, None, None, 0, None))
