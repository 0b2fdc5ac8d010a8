"""Verification suites: every implementable identity checked exactly or by Monte Carlo."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np
from scipy.special import exp1, zeta

from .errors import ResourceLimit, ValidationError
from .graph import Current, GraphModel, energy_form, h_transform, path_graph
from .green import (
    PotentialBundle,
    green_chi,
    hitting_matrix,
    log_det_restricted,
    logdet_spd,
    lu_logdet,
    potential_bundle,
    restricted_green,
    trace_model,
    twisted_green,
)
from .loops import (
    canonical_rotation,
    cyclic_green_product,
    enumerate_discrete_loops,
    avoidance_probability,
    avoidance_two_sets,
    current_log_functional,
    edge_T_mean,
    energy_change_log,
    mu_laplace,
    mu_laplace_symmetric,
    nontrivial_mass,
    nontrivial_mass_direct,
    _closed_walk_count,
)
from .permanent import (
    alpha_permanent,
    alpha_permanent_nofix,
    negbinom_pmf,
    orth_target,
    product_moments,
    qk_coefficients,
    qk_poly,
    rising,
)
from .report import Report
from .soup import SoupSampler, killed_paths, batch_multiple_local_time
from .wilson import (
    ROOT,
    be_exact_law,
    enumerate_spanning_trees,
    loop_erase,
    tree_code,
    wilson_batch,
    TREE_ENUM_NODES,
)


RARE = 20.0  # an indicator entry needs at least this many expected hits


def subseed(seed: int, tag: int) -> int:
    """Independent integer seed derived from (seed, tag)."""
    s = np.random.SeedSequence(int(seed), spawn_key=(int(tag),)).generate_state(2, np.uint32)
    return int(s[0]) << 32 | int(s[1])


def _cut(g: GraphModel) -> tuple[list[str], list[str]]:
    """A split of the nodes into F (first half) and D = F^c."""
    k = max(1, g.n // 2)
    return list(g.nodes[:k]), list(g.nodes[k:])


def default_h(b: PotentialBundle) -> np.ndarray:
    """An excessive h, so the h-transform keeps nonnegative killing.

    Small graphs: G delta_last / G[0, last]. Larger ones: 1 + t G delta_last with t chosen
    so that Z'/Z stays of order one (constants are excessive).
    """
    col = b.G[:, -1]
    if b.g.n <= 8:
        return col / col[0]
    return 1.0 + 0.25 * col / col.sum()


def cycle_current(g: GraphModel, theta: float = math.pi / 3) -> Current:
    """theta on every edge oriented from lower to higher index, except the edge between
    the first and last node, oriented last -> first (on T3: theta along 1 -> 2 -> 3 -> 1)."""
    w = np.triu(np.where(g.C > 0, theta, 0.0), 1)
    n = g.n
    if n > 2 and w[0, n - 1] != 0:
        w[n - 1, 0], w[0, n - 1] = theta, 0.0
    return Current(w - w.T)


def gf_visits(b: PotentialBundle, s, alpha: float) -> float:
    """E(prod_x s_x^{N_x + alpha}) = det(I + sqrt(lam (1-s)/s) G sqrt(...))^{-alpha}."""
    s = np.asarray(s, dtype=float)
    d = np.sqrt(b.g.lam * (1 - s) / s)
    return float(np.exp(-alpha * logdet_spd(np.eye(b.g.n) + d[:, None] * b.G * d[None, :])))


# --- exact ------------------------------------------------------------------

def run_verify_exact(g: GraphModel, n_random: int = 3, zmax: float = 4.0) -> Report:
    b = potential_bundle(g)
    rep = Report("verify-exact", None, zmax)
    n = g.n
    G = np.asarray(b.G)
    lam = g.lam
    rng = np.random.default_rng(0)
    rep.exact("G kappa = 1 (max dev)", float(np.max(np.abs(G @ g.kappa - 1))), 0.0)
    rep.exact("G symmetric (max dev)", float(np.max(np.abs(G - G.T))), 0.0)
    rep.exact("G = V / lambda (max dev)", float(np.max(np.abs(G - np.linalg.inv(np.eye(n) - g.P) / lam[None, :]))), 0.0)
    _, la = lu_logdet(np.eye(n) - g.P)
    rep.exact("det(I-P) Z_e prod(lambda)", math.exp(la + b.log_Z + np.sum(np.log(lam))), 1.0)
    rep.exact("mu(p>1) two routes", nontrivial_mass(b) - nontrivial_mass_direct(b), 0.0)
    for i in range(n_random):
        chi = rng.uniform(0, 2, n)
        Gc = green_chi(b, chi)
        rep.exact(f"resolvent chi{i} (max dev)", float(np.max(np.abs(G - Gc - G @ np.diag(chi) @ Gc))), 0.0)
        rep.exact(f"Laplace routes chi{i}", mu_laplace(b, chi) - mu_laplace_symmetric(b, chi), 0.0)
        f, mu = rng.normal(size=n), rng.uniform(0, 1, n)
        rep.exact(f"e(f, G mu) = <f, mu> #{i}", energy_form(g, f, G @ mu), float(f @ mu))
    rep.exact("avoidance(F = X) = det(I-P)", avoidance_probability(b, g.nodes, 1.0), b.detIminusP)
    if n > 1:
        F, D = _cut(g)
        ldD = log_det_restricted(b, D)
        Fi = g.indices(F)
        ldF = logdet_spd(G[np.ix_(Fi, Fi)])
        rep.exact("Jacobi det(G^D) det(G_FF) / det(G)", math.exp(ldD + ldF - b.log_Z), 1.0)
        tm = trace_model(b, F)
        bt = potential_bundle(tm.traced)
        rep.exact("trace Green = G_FF (max dev)", float(np.max(np.abs(bt.G - G[np.ix_(Fi, Fi)]))), 0.0)
        rep.exact("Z_e = Z_{e^D} Z_{e^F}", math.exp(ldD + bt.log_Z - b.log_Z), 1.0)
        rep.exact("lambda^F = lambda (1 - p^F) (max dev)", float(np.max(np.abs(tm.lam - lam[Fi] * (1 - tm.p)))), 0.0)
        H = hitting_matrix(b, F)
        GD = restricted_green(b, D)
        rep.exact("G = G^D + H^F G (max dev)", float(np.max(np.abs(G - GD - H @ G[Fi, :]))), 0.0)
        Hop = np.zeros((n, n))
        Hop[:, Fi] = H
        f = rng.normal(size=n)
        h2 = np.zeros(n)
        h2[g.indices(D)] = rng.normal(size=len(D))
        rep.exact("e(H^F f, g) = 0 for g on D", energy_form(g, Hop @ f, h2), 0.0)
    h = default_h(b)
    g2 = h_transform(g, h)
    b2 = potential_bundle(g2)
    rep.exact("h-transform G' h h = G (max dev)", float(np.max(np.abs(b2.G * np.outer(h, h) - G))), 0.0)
    rep.exact("h-transform Z'/Z prod(h^2)", math.exp(b2.log_Z - b.log_Z + 2 * np.sum(np.log(h))), 1.0)
    if n <= TREE_ENUM_NODES:
        try:
            trees = enumerate_spanning_trees(b)
            rep.exact("sum of tree weights", sum(w for _, w in trees), 1.0)
        except ResourceLimit:
            pass
    om = cycle_current(g)
    Gw, Zw = twisted_green(b, om)
    rep.exact("twisted Green Hermitian (max dev)", float(np.max(np.abs(Gw - Gw.conj().T))), 0.0)
    rep.exact("twisted log ratio imaginary part", float(np.imag(np.log(Zw / b.Z_e))), 0.0)
    return rep


# --- soup -----------------------------------------------------------------------

def _enum_kmax(g: GraphModel, limit: int = 200_000) -> int:
    k = 2
    while k < 60 and _closed_walk_count(g, k + 1) <= limit:
        k += 1
    return k


def _class_table(b: PotentialBundle):
    g = b.g
    if g.n > 10:
        return None
    kmax = _enum_kmax(g)
    en = enumerate_discrete_loops(b, kmax)
    keys = {c.cycle: i for i, (c, _) in enumerate(en)}
    w = np.array([m for _, m in en])
    return keys, w, kmax


def run_soup_suite(
    g: GraphModel,
    alpha: float,
    n: int,
    seed: int,
    mode: str = "aggregate",
    eps: float | None = None,
    method: str = "auto",
    zmax: float = 4.0,
    classes: bool = True,
) -> Report:
    """Laws of the Poisson ensemble L_alpha checked against closed forms."""
    b = potential_bundle(g)
    rep = Report(f"soup alpha={alpha:g}", seed, zmax)
    N = g.n
    G = np.asarray(b.G)
    sig = np.diag(G)
    lam = np.asarray(g.lam)
    rng = np.random.default_rng(subseed(seed, 1))
    chis = [rng.uniform(0.2, 1.5, N) * min(1.0, 3.0 / N) for _ in range(3)]
    x, y = 0, min(1, N - 1)
    h = default_h(b)
    g2 = h_transform(g, h)
    with np.errstate(divide="ignore"):
        logC = np.where(g.C > 0, np.log(np.where(g.C > 0, g2.C, 1.0) / np.where(g.C > 0, g.C, 1.0)), 0.0)
    dlam = np.asarray(g2.lam) - lam
    om = cycle_current(g)
    edge = None
    if N > 1:
        u, v = np.argwhere(np.triu(g.C) > 0)[0]
        edge = (int(u), int(v))
    ctab = _class_table(b) if classes and alpha * nontrivial_mass(b) * n <= 5e5 else None
    class_counts = Counter()
    outside = 0

    sampler = SoupSampler(b, alpha, method=method, mode=mode, eps=eps)
    cols: dict[str, list] = {k: [] for k in ("occ", "visits", "count", "both", "curr", "T", "rn", "mlt", "pts")}
    for blk in sampler.blocks(n, seed):
        occ = blk.occupation()
        cols["occ"].append(occ)
        cols["visits"].append(blk.visits())
        cols["count"].append(blk.loop_count())
        lv = np.bincount(blk.point_loop * N + blk.nodes, minlength=blk.nloops * N).reshape(blk.nloops, N)
        both = (lv[:, x] > 0) & (lv[:, y] > 0)
        cols["both"].append(np.bincount(blk.replica[both], minlength=blk.nrep))
        cols["curr"].append(blk.current_sum(om))
        succ = blk.nodes[blk.successor]
        if edge is not None:
            a, c = edge
            trav = np.bincount(blk.point_replica, weights=((blk.nodes == a) & (succ == c)) | ((blk.nodes == c) & (succ == a)), minlength=blk.nrep)
            cols["T"].append(occ[:, a] + occ[:, c] - trav / g.C[a, c])
            if N > 1 and x != y:
                cols["mlt"].append(np.bincount(blk.replica, weights=batch_multiple_local_time(blk, [x, y]), minlength=blk.nrep))
        lr = np.bincount(blk.point_replica, weights=logC[blk.nodes, succ], minlength=blk.nrep)
        cols["rn"].append(lr - occ @ dlam)
        if mode == "resolved":
            cols["pts"].append(np.bincount(blk.point_rep * N + blk.point_node, minlength=blk.nrep * N).reshape(blk.nrep, N))
        if ctab is not None:
            keys = ctab[0]
            for i in range(blk.nloops):
                k = canonical_rotation(blk.nodes[blk.offsets[i]:blk.offsets[i + 1]])
                j = keys.get(k)
                if j is None:
                    outside += 1
                else:
                    class_counts[j] += 1
    cat = {k: np.concatenate(v) if v else None for k, v in cols.items()}
    L, Nv, cnt = cat["occ"], cat["visits"], cat["count"]
    mass = nontrivial_mass(b)

    rep.stat("nontrivial loop count mean", cnt, alpha * mass)
    if b.detIminusP**alpha * n >= RARE:
        rep.stat("P(no nontrivial loop)", cnt == 0, b.detIminusP**alpha)
    for xi in range(N):
        nm = g.nodes[xi]
        for m in range(1, 5):
            mean = sig[xi] ** m * rising(alpha, m)
            rep.stat(f"E(L^{m})[{nm}]", L[:, xi] ** m, mean, variance=sig[xi] ** (2 * m) * rising(alpha, 2 * m) - mean**2)
    for i, chi in enumerate(chis):
        rep.stat(f"Laplace chi{i}", np.exp(-L @ chi), math.exp(alpha * mu_laplace(b, chi)))
    if N > 1:
        t = s = 1.0
        target = ((1 + t * G[x, x]) * (1 + s * G[y, y]) - s * t * G[x, y] ** 2) ** (-alpha)
        rep.stat("two-point Laplace (1,1)", np.exp(-t * L[:, x] - s * L[:, y]), target)
    for xi in range(N):
        nm = g.nodes[xi]
        q = 1.0 / (lam[xi] * G[xi, xi])
        obs = np.bincount(np.minimum(Nv[:, xi], 6), minlength=7)
        p = negbinom_pmf(alpha, q, np.arange(6))
        rep.chisquare(f"N_x negative binomial bins 0-5 [{nm}]", obs, np.append(p, 1 - p.sum()))
    for sv in (0.3, 0.6, 0.9):
        s = np.ones(N)
        s[x] = sv
        rep.stat(f"GF E(s^(N+alpha)) s={sv}", sv ** (Nv[:, x] + alpha), gf_visits(b, s, alpha))
    chi = chis[0]
    f = (Nv[:, x] <= 2).astype(float)
    cond = np.exp(-L @ chi) * f - np.prod((lam / (lam + chi)) ** (Nv + alpha), axis=1) * f
    rep.stat("conditional structure given N (difference)", cond, 0.0)
    rep.stat(f"avoidance of {g.nodes[x]}", Nv[:, x] == 0, avoidance_probability(b, [g.nodes[x]], alpha))
    if N > 1:
        rep.stat("avoidance of both x and y", cat["both"] == 0, avoidance_two_sets(b, [g.nodes[x]], [g.nodes[y]], alpha))
        Lt = L - alpha * sig
        A = G[np.ix_([x, y], [x, y])]
        X, Y = g.nodes[x], g.nodes[y]
        _, v = product_moments(b, alpha, X, Y, [0, 1], [0, 1])
        rep.stat("E(L^x L^y) = Per_alpha", L[:, x] * L[:, y], alpha_permanent(A, alpha),
                 variance=product_moments(b, alpha, X, Y, [alpha * sig[x], 1], [alpha * sig[y], 1])[1])
        rep.stat("E(L~^x L~^y) = Per0_alpha", Lt[:, x] * Lt[:, y], alpha_permanent_nofix(A, alpha), variance=v)
        for (p1, p2) in ((x, y), (x, x)):
            Q1 = [qk_poly(k, alpha, sig[p1], Lt[:, p1]) for k in range(4)]
            Q2 = [qk_poly(k, alpha, sig[p2], Lt[:, p2]) for k in range(4)]
            for k in range(1, 4):
                for l in range(k, 4):
                    if p1 == p2 and k + l > 4:
                        continue  # same-point degree > 4: too heavy-tailed for a z-score at desk scale
                    mean, var = product_moments(
                        b, alpha, g.nodes[p1], g.nodes[p2],
                        qk_coefficients(k, alpha, sig[p1]), qk_coefficients(l, alpha, sig[p2]),
                    )
                    rep.stat(
                        f"orth E(Q{k}(L~^{g.nodes[p1]}) Q{l}(L~^{g.nodes[p2]}))", Q1[k] * Q2[l],
                        orth_target(b, alpha, g.nodes[p1], g.nodes[p2], k, l), variance=var,
                    )
        rep.stat("mu multiple local time (x,y) = alpha G^xy G^yx", cat["mlt"], alpha * cyclic_green_product(b, [g.nodes[x], g.nodes[y]]))
    target = math.exp(alpha * current_log_functional(b, om))
    curr = cat["curr"]
    if np.all(np.abs(curr) < 1e-9):
        rep.exact("current sum identically 0 (no cycles)", float(np.max(np.abs(curr))), 0.0)
        rep.exact("current target", target, 1.0)
    else:
        rep.stat("E cos(current sum) = (Z_w/Z)^alpha", np.cos(curr), target)
        rep.stat("E sin(current sum) = 0", np.sin(curr), 0.0)
    if edge is not None:
        a, c = edge
        rep.stat(f"E T_xy edge {g.nodes[a]}{g.nodes[c]}", cat["T"], alpha * edge_T_mean(b, g.nodes[a], g.nodes[c]))
    rep.stat("E exp(RN exponent) h-transform = (Z'/Z)^alpha", np.exp(cat["rn"]), math.exp(alpha * energy_change_log(b, g2)))
    if mode == "resolved":
        pts = cat["pts"]
        for xi in range(N):
            rep.stat(f"one-point loops > eps [{g.nodes[xi]}]", pts[:, xi], alpha * exp1(lam[xi] * eps))
    if N > 1:
        _restriction_entries(rep, b, alpha, n, seed, L, method)
    if ctab is not None:
        keys, w, kmax = ctab
        obs = np.array([class_counts.get(i, 0) for i in range(len(w))] + [outside], dtype=float)
        probs = np.append(w, max(mass - w.sum(), 0.0)) / mass
        rep.chisquare(f"class frequencies (p <= {kmax} enumerated)", obs, probs)
    k = 2 * alpha
    if k == int(k) and 1 <= k <= 4:
        from .gff import dynkin_moment_report

        dynkin_moment_report(b, int(k), n, np.random.default_rng(subseed(seed, 3)), rep)
    if alpha == 3:
        for xi in range(N):
            rep.stat(f"zeta(3) identity [{g.nodes[xi]}]", 1.0 / -np.expm1(-L[:, xi] / sig[xi]), float(zeta(3)))
    return rep


def _restriction_entries(rep: Report, b: PotentialBundle, alpha, n, seed, L, method) -> None:
    g = b.g
    F, _ = _cut(g)
    Fi = g.indices(F)
    tm = trace_model(b, F)
    bt = potential_bundle(tm.traced)
    s = SoupSampler(bt, alpha, method=method)
    LF = np.concatenate([blk.occupation() for blk in s.blocks(n, subseed(seed, 2))])
    for j, xi in enumerate(Fi):
        rep.compare(f"restriction vs trace mean [{g.nodes[xi]}]", L[:, xi], LF[:, j])
        rep.compare(f"restriction vs trace 2nd moment [{g.nodes[xi]}]", L[:, xi] ** 2, LF[:, j] ** 2)
    if len(Fi) > 1:
        rep.compare("restriction vs trace cross moment", L[:, Fi[0]] * L[:, Fi[1]], LF[:, 0] * LF[:, 1])


def run_zeta(g: GraphModel, n: int, seed: int, node=None, zmax: float = 4.0) -> Report:
    """alpha = 3: E((1 - exp(-L^x / G^xx))^-1) = zeta(3)."""
    b = potential_bundle(g)
    rep = Report("zeta(3) identity", seed, zmax)
    xi = 0 if node is None else g.index(node)
    s = SoupSampler(b, 3.0)
    vals = np.concatenate([1.0 / -np.expm1(-blk.occupation()[:, xi] / b.G[xi, xi]) for blk in s.blocks(n, seed)])
    rep.stat(f"zeta(3) identity [{g.nodes[xi]}]", vals, float(zeta(3)))
    return rep


# --- Gaussian free field ---------------------------------------------------------

def run_gff_suite(g: GraphModel, n: int, seed: int, zmax: float = 4.0, n_ks: int = 10_000) -> Report:
    from .gff import (
        dynkin_bridge_report,
        dynkin_moment_report,
        gff_sample,
        renormalized_vs_wick_report,
        wick_power,
        _soup_occupations,
    )

    b = potential_bundle(g)
    rep = Report("gff / isomorphism", seed, zmax)
    N = g.n
    G = np.asarray(b.G)
    sig = np.diag(G)
    rng = np.random.default_rng(subseed(seed, 10))
    phi = gff_sample(b, 1, rng, size=n).copies[:, 0, :]
    for i in range(N):
        rep.stat(f"field mean [{g.nodes[i]}]", phi[:, i], 0.0)
        for j in range(i, N):
            rep.stat(f"field cov [{g.nodes[i]}{g.nodes[j]}]", phi[:, i] * phi[:, j], G[i, j])
    if N > 1:
        w0, w1 = wick_power(phi[:, 0], sig[0], 2), wick_power(phi[:, 1], sig[1], 2)
        rep.stat("E(:phi^2:(x) :phi^2:(y)) = 2 (G^xy)^2", w0 * w1, 2 * G[0, 1] ** 2)
    Ls = _soup_occupations(b, 0.5, n_ks, subseed(seed, 11))
    Fs = 0.5 * gff_sample(b, 1, np.random.default_rng(subseed(seed, 12)), size=n_ks).copies[:, 0, :] ** 2
    for i in range(N):
        rep.ks(f"KS L_(1/2) vs phi^2/2 [{g.nodes[i]}]", Ls[:, i], Fs[:, i])
    dynkin_moment_report(b, 1, n, np.random.default_rng(subseed(seed, 13)), rep)
    dynkin_moment_report(b, 2, n, np.random.default_rng(subseed(seed, 14)), rep)
    chi = np.zeros(N)
    chi[0] = 1.0
    x, y = g.nodes[0], g.nodes[min(1, N - 1)]
    dynkin_bridge_report(b, x, y, chi, n, np.random.default_rng(subseed(seed, 15)), rep)
    for k, m in ((1, 1), (1, 2), (2, 2)):
        renormalized_vs_wick_report(b, k, m, n, np.random.default_rng(subseed(seed, 16 + 3 * k + m)), rep)
    # k-additivity: L_{1/2} + L'_{1/2} against L_1, moments 1-3
    A = _soup_occupations(b, 0.5, n, subseed(seed, 30)) + _soup_occupations(b, 0.5, n, subseed(seed, 31))
    B = _soup_occupations(b, 1.0, n, subseed(seed, 32))
    for m in range(1, 4):
        rep.compare(f"additivity L_1/2 + L'_1/2 vs L_1 moment {m} [{g.nodes[0]}]", A[:, 0] ** m, B[:, 0] ** m)
    return rep


# --- Wilson / erasure -------------------------------------------------------------

def run_wilson_suite(g: GraphModel, n: int, seed: int, zmax: float = 4.0) -> Report:
    b = potential_bundle(g)
    rep = Report("wilson / loop erasure", seed, zmax)
    N = g.n
    G = np.asarray(b.G)
    W = wilson_batch(b, n, subseed(seed, 20))
    codes = W.tree_codes()
    if N <= TREE_ENUM_NODES:
        trees = enumerate_spanning_trees(b)
        idx = {tree_code(t, N): i for i, (t, _) in enumerate(trees)}
        probs = np.array([w for _, w in trees])
        obs = np.zeros(len(trees) + 1)
        for c, k in zip(*np.unique(codes, return_counts=True)):
            obs[idx.get(int(c), len(trees))] += k
        rep.chisquare("tree frequencies vs Z_e prod C", obs, np.append(probs, 0.0))
        W2 = wilson_batch(b, n, subseed(seed, 21), order=list(reversed(g.nodes)))
        obs2 = np.zeros(len(trees) + 1)
        for c, k in zip(*np.unique(W2.tree_codes(), return_counts=True)):
            obs2[idx.get(int(c), len(trees))] += k
        rep.homogeneity("tree law independent of order", obs, obs2)
    # erased network against an alpha = 1 soup
    S = SoupSampler(b, 1.0)
    soup_N, soup_L = [], []
    for blk in S.blocks(n, subseed(seed, 22)):
        soup_N.append(blk.traversals())
        soup_L.append(blk.occupation())
    sN, sL = np.concatenate(soup_N), np.concatenate(soup_L)
    wN, wL = W.traversals(), W.occupation()
    edges = [(int(u), int(v)) for u, v in np.argwhere(g.C > 0)]
    for (u, v) in edges[:6]:
        nm = f"{g.nodes[u]}{g.nodes[v]}"
        rep.stat(f"Wilson mean N_{nm} = G C", wN[:, u, v], G[u, v] * g.C[u, v])
        rep.compare(f"Wilson vs soup N_{nm} mean", wN[:, u, v], sN[:, u, v])
        rep.compare(f"Wilson vs soup N_{nm} 2nd moment", wN[:, u, v] ** 2.0, sN[:, u, v] ** 2.0)
    for xi in range(N):
        nm = g.nodes[xi]
        rep.stat(f"Wilson mean occupation [{nm}] = G^xx", wL[:, xi], G[xi, xi])
        rep.compare(f"Wilson vs soup occupation mean [{nm}]", wL[:, xi], sL[:, xi])
        rep.compare(f"Wilson vs soup occupation 2nd moment [{nm}]", wL[:, xi] ** 2, sL[:, xi] ** 2)
    if N > 1:
        rep.compare("Wilson vs soup occupation cross moment", wL[:, 0] * wL[:, 1], sL[:, 0] * sL[:, 1])
    # independence of network and tree
    u, v = edges[0]
    tot = wN[:, u, v].astype(float)
    ucodes, counts = np.unique(codes, return_counts=True)
    for c in ucodes[np.argsort(-counts)][:4]:
        sel = codes == c
        if 1 < sel.sum() < len(sel) - 1:
            rep.compare(f"network independent of tree {int(c)}", tot[sel], tot[~sel])
    # (rel): E prod C'/C prod kappa'/kappa = Z_e / Z_e'
    g2 = h_transform(g, default_h(b))
    x = np.arange(N)
    par = W.parent
    dead = par == ROOT
    safe = np.where(dead, 0, par)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dead, g2.kappa[None, :] / g.kappa[None, :], g2.C[x[None, :], safe] / g.C[x[None, :], safe])
    ratio = np.where(dead & (g.kappa[None, :] == 0), 0.0, ratio)
    rep.stat("(rel) E prod C'/C = Z_e / Z_e'", np.prod(ratio, axis=1), math.exp(-energy_change_log(b, g2)))
    _erasure_entries(rep, b, n, seed)
    return rep


def _erasure_entries(rep: Report, b: PotentialBundle, n: int, seed: int) -> None:
    g = b.g
    N = g.n
    from .graph import DELTA

    paths = killed_paths(b, g.nodes[0], n, subseed(seed, 23))
    skel = Counter()
    occ_by = {}
    for i in range(len(paths)):
        p = paths.path(i)
        r = loop_erase(p)
        skel[r.skeleton] += 1
        if r.skeleton in occ_by or len(occ_by) < 4:
            occ_by.setdefault(r.skeleton, []).append(p.occupation(N))
    keys = sorted(skel, key=lambda k: (-skel[k], k))
    probs = [be_exact_law(b, g.nodes[0], DELTA, [g.nodes[i] for i in k]) for k in keys]
    obs = [skel[k] for k in keys]
    rep.chisquare("killed-path erasure law", np.append(obs, 0), np.append(probs, max(0.0, 1 - sum(probs))))
    for k in keys[:2]:
        rep.stat(f"P(BE = {'-'.join(g.nodes[i] for i in k)})", np.r_[np.ones(skel[k]), np.zeros(n - skel[k])],
                 be_exact_law(b, g.nodes[0], DELTA, [g.nodes[i] for i in k]))
    # occupation of a path given its erasure = loops of L_1 meeting eta
    S = SoupSampler(b, 1.0)
    for k in keys[:2]:
        eta = np.array(k)
        parts = []
        for blk in S.blocks(min(n, 50_000), subseed(seed, 24 + len(k))):
            lv = np.bincount(blk.point_loop * N + blk.nodes, minlength=blk.nloops * N).reshape(blk.nloops, N)
            meet = lv[:, eta].sum(axis=1) > 0
            loc = blk.loop_occupation()[meet]
            o = np.zeros((blk.nrep, N))
            np.add.at(o, blk.replica[meet], loc)
            o[:, eta] += blk.trivial[:, eta]
            parts.append(o)
        ref = np.concatenate(parts)
        got = np.array(occ_by[k])
        for xi in range(N):
            nm = f"{'-'.join(g.nodes[i] for i in k)}:{g.nodes[xi]}"
            rep.compare(f"path occupation given BE vs loops meeting eta, mean [{nm}]", got[:, xi], ref[:, xi])
            rep.compare(f"path occupation given BE vs loops meeting eta, 2nd [{nm}]", got[:, xi] ** 2, ref[:, xi] ** 2)


# --- branching demo --------------------------------------------------------------

def run_branching_demo(N: int, alpha: float, n: int, seed: int, zmax: float = 4.0) -> Report:
    """Path PN(N): occupation levels as a branching process with immigration."""
    if N < 8:
        raise ValidationError("branching demo needs N >= 8")
    g = path_graph(N)
    b = potential_bundle(g)
    rep = Report(f"branching demo N={N}", seed, zmax)
    k = np.arange(1, N + 1)
    rep.exact("G = min(n, m) (max dev)", float(np.max(np.abs(b.G - np.minimum.outer(k, k)))), 0.0)
    lamF, pF = [], []
    for m in range(1, N):
        tm = trace_model(b, g.nodes[:m])
        lamF.append(tm.lam[-1])
        pF.append(tm.p[-1])
    rep.exact("lambda^{F_n}_n = 1 for n < N (max dev)", float(np.max(np.abs(np.array(lamF) - 1))), 0.0)
    rep.exact("p^{F_n}_n = 1/2 for n < N (max dev)", float(np.max(np.abs(np.array(pF[1:]) - 0.5))), 0.0)
    half = N // 2
    kcap = 7
    hist = np.zeros(kcap + 1, np.int64)
    S = SoupSampler(b, alpha, method="rooted")
    imm_parts, occ_parts = [], []
    from ._kernels import offspring_counts

    for blk in S.blocks(n, seed):
        occ = blk.occupation()
        occ_parts.append(occ[:, :half])
        mins = blk.loop_minima()
        pm = np.repeat(mins, blk.lengths)
        at_min = blk.nodes == pm
        imm = np.bincount(blk.point_replica[at_min] * N + blk.nodes[at_min], weights=blk.holding[at_min],
                          minlength=blk.nrep * N).reshape(blk.nrep, N) + blk.trivial
        imm_parts.append(imm[:, 1:half])
        hist += offspring_counts(blk.nodes, blk.offsets, 2, half, kcap)
    occ = np.concatenate(occ_parts)
    imm = np.concatenate(imm_parts)
    for lv in range(half):
        rep.stat(f"E(L^{lv + 1}) = alpha {lv + 1}", occ[:, lv], alpha * (lv + 1))
    gvar = lambda m: rising(alpha, 2 * m) - rising(alpha, m) ** 2  # noqa: E731
    for m in range(1, 5):
        rep.stat(f"L^1 moment {m} = Gamma(alpha,1)", occ[:, 0] ** m, rising(alpha, m), variance=gvar(m))
    pooled = imm.ravel()
    for m in range(1, 5):
        rep.stat(f"immigration moment {m} (levels 2..{half}) = Gamma(alpha,1)", pooled**m, rising(alpha, m), variance=gvar(m))
    for lv in (1, half // 2, half - 2):
        rep.stat(f"immigration mean level {lv + 1}", imm[:, lv - 1], alpha)
    probs = 0.5 ** (np.arange(kcap) + 1)
    rep.chisquare(f"offspring pmf 2^(-k-1), k <= {kcap - 1}", hist, np.append(probs, 1 - probs.sum()))
    rep.estimate("offspring P(0)", hist[0] / hist.sum(), math.sqrt(0.25 / hist.sum()), 0.5, int(hist.sum()))
    return rep
