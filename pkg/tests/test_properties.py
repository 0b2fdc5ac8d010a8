import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre, eval_hermitenorm

from loopsoup.graph import energy_form, h_transform, random_graph
from loopsoup.green import green_chi, log_det_restricted, potential_bundle, trace_model
from loopsoup.loops import canonical_rotation, mu_laplace, mu_laplace_symmetric, nontrivial_mass, nontrivial_mass_direct
from loopsoup.permanent import alpha_permanent, laguerre_eval, negbinom_pmf, p_poly, qk_poly
from loopsoup.soup import Path
from loopsoup.wilson import enumerate_spanning_trees, loop_erase

graphs = st.builds(
    lambda seed, n, p: random_graph(np.random.default_rng(seed), n, p),
    st.integers(0, 2**32 - 1), st.integers(1, 7), st.floats(0.3, 1.0),
)
FAST = settings(max_examples=40, deadline=None)


@FAST
@given(graphs)
def test_green_basic(g):
    b = potential_bundle(g)
    G = b.G
    assert np.allclose(G, G.T)
    assert np.all(G > 0)
    assert np.allclose(G @ g.kappa, 1.0, atol=1e-10)
    assert np.all(np.diag(G) >= G - 1e-12)
    assert math.isclose(b.detIminusP * b.Z_e * np.prod(g.lam), 1.0, rel_tol=1e-10)


@FAST
@given(graphs, st.integers(0, 2**32 - 1))
def test_resolvent_and_laplace_routes(g, seed):
    b = potential_bundle(g)
    chi = np.random.default_rng(seed).uniform(0, 3, g.n)
    Gc = green_chi(b, chi)
    assert np.allclose(b.G - Gc, b.G @ np.diag(chi) @ Gc, atol=1e-10)
    assert math.isclose(mu_laplace(b, chi), mu_laplace_symmetric(b, chi), rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(nontrivial_mass(b), nontrivial_mass_direct(b), rel_tol=1e-9, abs_tol=1e-12)


@FAST
@given(graphs, st.data())
def test_trace_and_jacobi(g, data):
    b = potential_bundle(g)
    k = data.draw(st.integers(1, g.n))
    F = list(g.nodes[:k])
    D = list(g.nodes[k:])
    tm = trace_model(b, F)
    bt = potential_bundle(tm.traced)
    assert np.allclose(bt.G, b.G[:k, :k], atol=1e-10)
    assert math.isclose(log_det_restricted(b, D) + bt.log_Z, b.log_Z, abs_tol=1e-9)


@FAST
@given(graphs, st.integers(0, 2**32 - 1))
def test_h_transform_identities(g, seed):
    b = potential_bundle(g)
    mu = np.random.default_rng(seed).uniform(0.1, 1.0, g.n)
    h = b.G @ mu  # potentials are excessive
    b2 = potential_bundle(h_transform(g, h))
    assert np.allclose(b2.G * np.outer(h, h), b.G, rtol=1e-9)
    assert math.isclose(b2.log_Z - b.log_Z, -2 * np.sum(np.log(h)), abs_tol=1e-9)


@FAST
@given(graphs, st.integers(0, 2**32 - 1))
def test_energy_form_positive(g, seed):
    f = np.random.default_rng(seed).normal(size=g.n)
    assert energy_form(g, f) > 0
    assert math.isclose(energy_form(g, f, potential_bundle(g).G @ f), float(f @ f), rel_tol=1e-9, abs_tol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.builds(lambda s, n: random_graph(np.random.default_rng(s), n), st.integers(0, 2**32 - 1), st.integers(1, 5)))
def test_tree_weights_sum_to_one(g):
    b = potential_bundle(g)
    assert math.isclose(sum(w for _, w in enumerate_spanning_trees(b)), 1.0, rel_tol=1e-10)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=12), st.integers(0, 20))
def test_canonical_rotation_invariant(seq, r):
    r %= len(seq)
    assert canonical_rotation(seq) == canonical_rotation(seq[r:] + seq[:r])


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30))
def test_loop_erase_properties(seq):
    nodes = [seq[0]]
    for x in seq[1:]:
        if x != nodes[-1]:
            nodes.append(x)
    r = loop_erase(Path(np.array(nodes), np.ones(len(nodes))))
    assert len(set(r.skeleton)) == len(r.skeleton)
    assert r.skeleton[0] == nodes[0] and r.skeleton[-1] == nodes[-1]
    assert np.array_equal(r.reconstruct(), nodes)


@given(st.integers(0, 8), st.floats(-0.9, 3.0), st.floats(0.0, 10.0))
def test_laguerre_matches_scipy(k, a, u):
    assert math.isclose(laguerre_eval(k, a, u), eval_genlaguerre(k, a, u), rel_tol=1e-8, abs_tol=1e-8)


@given(st.integers(0, 8), st.floats(-4, 4))
def test_hermite_matches_scipy(n, u):
    from loopsoup.permanent import hermite_eval

    assert math.isclose(hermite_eval(n, u), eval_hermitenorm(n, u), rel_tol=1e-9, abs_tol=1e-9)


@given(st.integers(0, 6), st.floats(0.1, 4.0), st.floats(0.1, 3.0), st.floats(-2.0, 5.0))
def test_qk_is_shifted_pk(k, alpha, sigma, u):
    assert math.isclose(qk_poly(k, alpha, sigma, u), p_poly(k, alpha, sigma, u + alpha * sigma), rel_tol=1e-8, abs_tol=1e-8)


@given(st.floats(0.1, 5.0), st.floats(0.05, 1.0))
def test_negbinom_normalized(alpha, q):
    n = np.arange(2000)
    assert math.isclose(negbinom_pmf(alpha, q, n).sum(), 1.0, rel_tol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_permanent_at_alpha_one_is_permanent(k, seed):
    from itertools import permutations

    A = np.random.default_rng(seed).normal(size=(k, k))
    per = sum(np.prod([A[i, s[i]] for i in range(k)]) for s in permutations(range(k)))
    assert math.isclose(alpha_permanent(A, 1.0), per, rel_tol=1e-9, abs_tol=1e-9)
