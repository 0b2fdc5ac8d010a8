import itertools
import math

import numpy as np
import pytest
from scipy.special import roots_genlaguerre

from loopsoup.errors import ResourceLimit, ValidationError
from loopsoup.permanent import (
    alpha_permanent,
    alpha_permanent_nofix,
    bivariate_moments,
    hermite_eval,
    laguerre_eval,
    moment_prediction,
    negbinom_pmf,
    orth_target,
    p_poly,
    product_moments,
    qk_coefficients,
    qk_poly,
    renormalized_power_field,
)


def brute_permanent(A, alpha, nofix=False):
    k = len(A)
    total = 0.0
    for s in itertools.permutations(range(k)):
        if nofix and any(s[i] == i for i in range(k)):
            continue
        seen, cycles = set(), 0
        for i in range(k):
            if i not in seen:
                cycles += 1
                j = i
                while j not in seen:
                    seen.add(j)
                    j = s[j]
        total += alpha**cycles * np.prod([A[i, s[i]] for i in range(k)])
    return total


def test_small_permanents():
    assert alpha_permanent([[0.7]], 2.0) == pytest.approx(1.4)
    s, t, g = 0.5, 0.8, 0.3
    A = [[s, g], [g, t]]
    assert alpha_permanent(A, 1.5) == pytest.approx(1.5**2 * s * t + 1.5 * g * g)
    assert alpha_permanent_nofix(A, 1.5) == pytest.approx(1.5 * g * g)
    assert alpha_permanent_nofix([[0.7]], 2.0) == 0.0
    sig = 0.6
    assert alpha_permanent([[sig, sig], [sig, sig]], 1.3) == pytest.approx(sig**2 * 1.3 * 2.3)


def test_against_brute_force_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.normal(size=(5, 5))
        alpha = rng.uniform(0.2, 3)
        assert alpha_permanent(A, alpha) == pytest.approx(brute_permanent(A, alpha), rel=1e-10, abs=1e-10)
        assert alpha_permanent_nofix(A, alpha) == pytest.approx(brute_permanent(A, alpha, True), rel=1e-10, abs=1e-10)


def test_t3_derangement_permanent(b3):
    G = b3.G
    # derangements of S3 are the two 3-cycles: 2 alpha (1/4)^3
    assert alpha_permanent_nofix(G, 0.7) == pytest.approx(2 * 0.7 * 0.25**3)


def test_permanent_guard():
    with pytest.raises(ResourceLimit):
        alpha_permanent(np.eye(11), 1.0)


def test_laguerre():
    assert laguerre_eval(0, 0.3, 2.0) == 1.0
    assert laguerre_eval(1, 0.7, 0.4) == pytest.approx(1.7 - 0.4)
    a = 0.7
    x, w = roots_genlaguerre(20, a)
    val = np.sum(w * laguerre_eval(2, a, x) * laguerre_eval(3, a, x)) / math.gamma(a + 1)
    assert abs(val) < 1e-10


def test_qk():
    u = np.linspace(-1, 3, 7)
    assert np.allclose(qk_poly(1, 1.3, 0.6, u), u)
    sig, alpha = 0.6, 1.3
    assert np.allclose(qk_poly(2, alpha, sig, u), 0.5 * (u**2 - 2 * sig * u - alpha * sig**2))
    assert qk_poly(3, 1.0, 1.0, 2.0) == pytest.approx(-1.0)
    assert np.allclose(qk_poly(3, alpha, sig, u), p_poly(3, alpha, sig, u + alpha * sig))
    assert np.allclose(np.polynomial.polynomial.polyval(u, qk_coefficients(3, alpha, sig)), qk_poly(3, alpha, sig, u))
    with pytest.raises(ValidationError):
        qk_poly(2, 1.0, 0.0, 1.0)


def test_renormalized_power(b2):
    out = renormalized_power_field(b2, np.array([0.1, 0.1]), 2, 1.0)
    assert out[0] == pytest.approx(0.5 * (0.01 - 2 * (2 / 3) * 0.1 - (2 / 3) ** 2))
    assert out[0] == pytest.approx(-0.28389, abs=1e-5)
    assert np.allclose(renormalized_power_field(b2, np.array([0.3, -0.2]), 1, 1.0), [0.3, -0.2])


def test_hermite():
    assert hermite_eval(0, 1.7) == 1.0
    assert hermite_eval(1, 1.7) == pytest.approx(1.7)
    assert hermite_eval(2, 1.7) == pytest.approx(1.7**2 - 1)
    x = 1.3
    lhs = hermite_eval(4, x)
    rhs = (-2) ** 2 * math.factorial(2) * laguerre_eval(2, -0.5, x * x / 2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_negbinom():
    assert negbinom_pmf(2.5, 0.75, 0) == pytest.approx(0.75**2.5)
    n = np.arange(6)
    assert np.allclose(negbinom_pmf(1.0, 0.75, n), 0.75 * 0.25**n)
    assert negbinom_pmf(2.5, 0.75, np.arange(51)).sum() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValidationError):
        negbinom_pmf(0.0, 0.5, 1)


def test_moment_prediction(b2):
    assert moment_prediction(b2, 1.0, ["a", "b"]).value == pytest.approx(5 / 9)
    assert moment_prediction(b2, 1.0, ["a", "b"], "centered").value == pytest.approx(1 / 9)
    assert moment_prediction(b2, 1.0, ["a"], "centered").value == 0.0


def test_orth_target(b2):
    assert orth_target(b2, 1.0, "a", "b", 1, 1) == pytest.approx(1 / 9)
    assert orth_target(b2, 1.0, "a", "b", 2, 3) == 0.0


def test_bivariate_moments_match_permanents(b3):
    G = b3.G
    M = bivariate_moments(G[0, 0], G[1, 1], G[0, 1], 1.7, 3)
    assert M[0, 0] == 1.0
    assert M[1, 1] == pytest.approx(alpha_permanent(G[:2, :2], 1.7))
    A = G[np.ix_([0, 0, 1], [0, 0, 1])]
    assert M[2, 1] == pytest.approx(alpha_permanent(A, 1.7))
    assert M[3, 0] == pytest.approx(G[0, 0] ** 3 * 1.7 * 2.7 * 3.7)


def test_product_moments_orthogonality(b2):
    for k in range(1, 4):
        for l in range(1, 4):
            m, v = product_moments(b2, 1.3, "a", "b", qk_coefficients(k, 1.3, 2 / 3), qk_coefficients(l, 1.3, 2 / 3))
            assert m == pytest.approx(orth_target(b2, 1.3, "a", "b", k, l), abs=1e-12)
            assert v > 0
