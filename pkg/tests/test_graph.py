import json

import numpy as np
import pytest

from loopsoup.errors import DimensionMismatch, ValidationError
from loopsoup.graph import (
    Current,
    add_killing,
    build_graph,
    energy_form,
    fixture,
    graph_from_dict,
    graph_to_json,
    h_transform,
    path_graph,
    random_graph,
    restrict_killed,
)


def test_g2_lambda_and_transition(g2):
    assert np.allclose(g2.lam, [2, 2])
    assert g2.P[0, 1] == 0.5
    assert np.allclose(g2.P.sum(axis=1), [0.5, 0.5])


def test_t3_lambda(t3):
    assert np.allclose(t3.lam, [3, 3, 3])


def test_recurrent_graph_rejected():
    with pytest.raises(ValidationError):
        build_graph(["a", "b"], [("a", "b", 1.0)], {"a": 0.0, "b": 0.0})


def test_disconnected_graph_rejected():
    with pytest.raises(ValidationError):
        build_graph(["a", "b"], [], {"a": 1.0, "b": 1.0})


def test_bad_inputs():
    with pytest.raises(ValidationError):
        build_graph(["a", "DELTA"], [("a", "DELTA", 1.0)], {"a": 1.0})
    with pytest.raises(ValidationError):
        build_graph(["a", "a"], [], {"a": 1.0})
    with pytest.raises(ValidationError):
        build_graph(["a", "b"], [("a", "b", -1.0)], {"a": 1.0})
    with pytest.raises(ValidationError):
        build_graph(["a", "b"], [("a", "b", 1.0), ("b", "a", 2.0)], {"a": 1.0})
    with pytest.raises(ValidationError):
        build_graph(["a", "b"], [("a", "c", 1.0)], {"a": 1.0})


def test_graph_document_schema(g2):
    d = json.loads(graph_to_json(g2))
    assert d["format_version"] == 1
    assert graph_from_dict(d).same_as(g2)
    missing = {k: v for k, v in d.items() if k != "killing"}
    with pytest.raises(ValidationError):
        graph_from_dict(missing)
    with pytest.raises(ValidationError):
        graph_from_dict({**d, "extra": 1})
    with pytest.raises(ValidationError):
        graph_from_dict({**d, "format_version": 2})


@pytest.mark.parametrize("name", ["G2", "T3", "P3", "PN16"])
def test_fixture_round_trip(name):
    g = fixture(name)
    assert graph_from_dict(json.loads(graph_to_json(g))).same_as(g)


def test_pn_fixture_matches_path_graph():
    assert fixture("PN16").same_as(path_graph(16))
    assert fixture("PN9").n == 9


def test_energy_form_values(g2):
    assert energy_form(g2, [1, 1]) == pytest.approx(2.0)
    assert energy_form(g2, [1, 0]) == pytest.approx(2.0)
    assert energy_form(g2, [0, 0]) == 0.0
    with pytest.raises(DimensionMismatch):
        energy_form(g2, [1, 2, 3])


def test_energy_form_is_quadratic_form_of_operator(t3):
    rng = np.random.default_rng(0)
    f, h = rng.normal(size=3), rng.normal(size=3)
    assert energy_form(t3, f, h) == pytest.approx(f @ t3.operator @ h)


def test_restrict_killed(g2, p3):
    r = restrict_killed(g2, ["a"])
    assert r.nodes == ("a",) and r.lam[0] == 2 and r.kappa[0] == 2
    r = restrict_killed(p3, ["1", "2"])
    assert np.allclose(r.lam, [2, 2]) and np.allclose(r.kappa, [1, 1])
    assert restrict_killed(p3, p3.nodes).same_as(p3)


def test_add_killing(g2):
    g = add_killing(g2, [1, 0])
    assert np.allclose(g.kappa, [2, 1]) and np.allclose(g.lam, [3, 2])
    assert add_killing(g2, [0, 0]).same_as(g2)
    with pytest.raises(ValidationError):
        add_killing(g2, [np.inf, 0])


def test_h_transform(g2):
    g = h_transform(g2, [1, 2])
    assert g.C[0, 1] == pytest.approx(2)
    assert np.allclose(g.kappa, [0, 6]) and np.allclose(g.lam, [2, 8])
    assert h_transform(g2, [1, 1]).same_as(g2)
    g21 = h_transform(g2, [2, 1])
    assert np.allclose(g21.kappa, [6, 0])


def test_h_transform_rejects_non_excessive(g2):
    with pytest.raises(ValidationError):
        h_transform(g2, [1, 5])


def test_current_checks(g2, t3):
    with pytest.raises(ValidationError):
        Current(np.ones((2, 2)))
    w = np.zeros((3, 3))
    w[0, 1], w[1, 0] = 1, -1
    Current(w).check_support(t3)
    om = Current.on(g2, {("a", "b"): 0.3})
    assert om.omega[1, 0] == pytest.approx(-0.3)


def test_random_graph_is_transient_and_connected():
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = random_graph(rng, 6)
        assert g.kappa.max() > 0
        assert np.all(np.linalg.eigvalsh(g.operator) > 0)
