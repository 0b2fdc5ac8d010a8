import json

import pytest

from loopsoup.cli import main
from loopsoup.errors import ValidationError
from loopsoup.io import load_graph


def test_validate_and_green(capsys):
    assert main(["validate", "--graph", "T3"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["nodes"] == 3
    assert main(["green", "--graph", "G2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",a,b"


def test_verify_exact_exit_code(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify-exact", "--graph", "T3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["verdict"] == "pass"
    assert "PASS" in capsys.readouterr().out


def test_verify_soup_fails_with_tight_zmax(capsys):
    # a z threshold of zero cannot be met by a Monte Carlo estimate
    assert main(["verify-soup", "--graph", "G2", "--samples", "2000", "--zmax", "0"]) == 1


def test_dumps(tmp_path):
    p = tmp_path / "s.jsonl"
    assert main(["soup", "--graph", "T3", "--samples", "3", "--seed", "1", "--out", str(p)]) == 0
    heads = [json.loads(l) for l in p.read_text().splitlines() if "trivialOcc" in l]
    assert len(heads) == 3
    assert main(["bridge", "--graph", "T3", "--x", "1", "--y", "3", "--samples", "4", "--out", str(p)]) == 0
    lines = [json.loads(l) for l in p.read_text().splitlines()]
    assert lines[0]["count"] == 4 and all(l["end"] == "3" for l in lines[1:])
    assert main(["wilson", "--graph", "G2", "--out", str(p)]) == 0
    assert "parent" in p.read_text()


def test_load_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": ["a"],\n "edges": [}')
    with pytest.raises(ValidationError, match=r"bad.json:2:"):
        load_graph(str(bad))
    assert main(["validate", "--graph", str(bad)]) == 2
    assert "invalid JSON" in capsys.readouterr().err
    nokill = tmp_path / "nokill.json"
    nokill.write_text(json.dumps({"nodes": ["a", "b"], "edges": [{"u": "a", "v": "b", "c": 1}]}))
    with pytest.raises(ValidationError, match="killing"):
        load_graph(str(nokill))
    with pytest.raises(ValidationError):
        load_graph(str(tmp_path / "missing.json"))


def test_branching_demo_small(capsys):
    assert main(["branching-demo", "--N", "16", "--samples", "3000", "--seed", "1"]) == 0
    with pytest.raises(SystemExit):
        main(["nonsense"])
    assert main(["branching-demo", "--N", "4"]) == 2
