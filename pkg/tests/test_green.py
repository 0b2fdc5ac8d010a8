import math

import numpy as np
import pytest

from loopsoup.errors import ValidationError
from loopsoup.graph import Current, h_transform, random_graph
from loopsoup.green import (
    green_chi,
    hitting_matrix,
    log_det_restricted,
    log_twisted_ratio,
    lu_logdet,
    matrix_csv,
    potential_bundle,
    read_matrix_csv,
    restricted_green,
    trace_model,
    twisted_green,
)


def test_g2_green(b2):
    assert np.allclose(b2.G, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])
    assert b2.Z_e == pytest.approx(1 / 3)
    assert b2.detIminusP == pytest.approx(0.75)


def test_t3_green(b3):
    G = np.full((3, 3), 0.25) + 0.25 * np.eye(3)
    assert np.allclose(b3.G, G)
    assert b3.Z_e == pytest.approx(1 / 16)


def test_p3_green_is_min(bp3):
    k = np.arange(1, 4)
    assert np.allclose(bp3.G, np.minimum.outer(k, k))
    assert bp3.Z_e == pytest.approx(1.0)


def test_green_kappa_is_one(b3, bp3):
    for b in (b3, bp3):
        assert np.allclose(b.G @ b.g.kappa, 1.0, atol=1e-12)


def test_green_chi(b2):
    assert np.allclose(green_chi(b2, [0, 0]), b2.G)
    assert np.allclose(green_chi(b2, [1, 0]), np.array([[2, 1], [1, 3]]) / 5)


def test_resolvent(b3):
    chi = np.array([0.3, 1.2, 0.0])
    Gc = green_chi(b3, chi)
    assert np.allclose(b3.G - Gc, b3.G @ np.diag(chi) @ Gc, atol=1e-12)


def test_green_chi_rejects_negative(b2):
    with pytest.raises(ValidationError):
        green_chi(b2, [-1, 0])


def test_hitting(b2, bp3):
    H = hitting_matrix(b2, ["b"])
    assert H[0, 0] == pytest.approx(0.5) and H[1, 0] == 1
    assert np.allclose(hitting_matrix(b2, ["a", "b"]), np.eye(2))
    H = hitting_matrix(bp3, ["1"])
    assert H[2, 0] == pytest.approx(1.0)


def test_restricted_green(b2, b3):
    assert restricted_green(b2, ["a"])[0, 0] == pytest.approx(0.5)
    assert math.exp(log_det_restricted(b3, ["1", "2"])) == pytest.approx(1 / 8)
    assert np.allclose(restricted_green(b3, b3.g.nodes), b3.G)


def test_decomposition_G_equals_GD_plus_HG(b3):
    F, D = ["1"], ["2", "3"]
    H = hitting_matrix(b3, F)
    assert np.allclose(b3.G, restricted_green(b3, D) + H @ b3.G[[0], :])


def test_trace_model_g2(b2):
    tm = trace_model(b2, ["a"])
    assert tm.lam[0] == pytest.approx(1.5)
    bt = potential_bundle(tm.traced)
    assert b2.Z_e == pytest.approx(math.exp(log_det_restricted(b2, ["b"])) * bt.Z_e)


def test_trace_model_p3(bp3):
    tm = trace_model(bp3, ["1", "2"])
    assert np.allclose(tm.lam, [2, 1])
    assert np.allclose(potential_bundle(tm.traced).G, [[1, 1], [1, 2]])


def test_twisted_zero_current(b3):
    Gw, Z = twisted_green(b3, Current.zero(b3.g))
    assert np.allclose(Gw, b3.G) and Z == pytest.approx(b3.Z_e)


def test_twisted_single_edge_has_no_effect(b2):
    for theta in (0.3, 1.0, 2.5):
        om = Current.on(b2.g, {("a", "b"): theta})
        assert abs(log_twisted_ratio(b2, om)) < 1e-12


def test_twisted_triangle(b3):
    for theta in (0.2, math.pi / 3, 1.1):
        w = np.zeros((3, 3))
        w[0, 1] = w[1, 2] = w[2, 0] = theta
        om = Current(w - w.T)
        phase, la = lu_logdet(np.diag(b3.g.lam) - b3.g.C * np.exp(1j * om.omega))
        assert (phase * math.exp(la)).real == pytest.approx(18 - 2 * math.cos(3 * theta))
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 2] = w[2, 0] = math.pi / 3
    assert log_twisted_ratio(b3, Current(w - w.T)).real == pytest.approx(math.log(16 / 20))


def test_h_transform_green(b2):
    g = h_transform(b2.g, [1, 2])
    b = potential_bundle(g)
    assert np.allclose(b.G, [[2 / 3, 1 / 6], [1 / 6, 1 / 6]])
    assert b.Z_e / b2.Z_e == pytest.approx(1 / 4)


def test_jacobi_random_graphs():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = random_graph(rng, 6)
        b = potential_bundle(g)
        D = list(g.nodes[2:])
        GFF = b.G[:2, :2]
        lhs = log_det_restricted(b, D) + math.log(np.linalg.det(GFF))
        assert lhs == pytest.approx(b.log_Z, abs=1e-10)


def test_matrix_csv_round_trip(b3):
    rows, cols, M = read_matrix_csv(matrix_csv(b3.g, b3.G))
    assert rows == list(b3.g.nodes) and cols == list(b3.g.nodes)
    assert np.allclose(M, b3.G)
