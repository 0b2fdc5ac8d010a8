"""Gaussian free field with covariance G, Wick powers, and isomorphism checks against soups."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import SingularMatrix, ValidationError
from .green import PotentialBundle, green_chi, logdet_spd
from .permanent import hermite_eval, orth_target, p_poly, qk_poly, rising
from .report import Report
from .soup import SoupSampler, bridges, make_generator


def field_factor(b: PotentialBundle) -> np.ndarray:
    """A with A A^T = G: Cholesky, or the eigendecomposition if a pivot is not positive."""
    G = np.asarray(b.G)
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(G)
        if w.min() < -1e-12 * np.abs(w).max():
            raise SingularMatrix("Green matrix is not positive semidefinite") from None
        return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class FieldSample:
    """copies has shape (..., k, n): k independent fields per replica."""

    copies: np.ndarray
    sigma: np.ndarray

    @property
    def k(self) -> int:
        return self.copies.shape[-2]

    def half_square_sum(self) -> np.ndarray:
        """1/2 sum_j phi_j^2, shape (..., n)."""
        return 0.5 * np.sum(self.copies**2, axis=-2)


def gff_sample(b: PotentialBundle, k: int, gen, size: int | None = None) -> FieldSample:
    """k independent centered Gaussian fields with covariance G (``size`` replicas if given)."""
    if k < 1:
        raise ValidationError("need at least one copy")
    rng, _ = make_generator(gen)
    A = field_factor(b)
    shape = (k, b.g.n) if size is None else (size, k, b.g.n)
    z = rng.standard_normal(shape)
    return FieldSample(z @ A.T, np.diag(b.G).copy())


def wick_power(value, sigma: float, n: int):
    """:phi^n: = sigma^{n/2} H_n(phi / sqrt(sigma))."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    return sigma ** (n / 2) * hermite_eval(n, np.asarray(value, dtype=float) / math.sqrt(sigma))


def wick_power_even_laguerre(value, sigma: float, m: int):
    """:phi^{2m}: by 2^m m! P_m^{1/2,sigma}(phi^2 / 2)."""
    v = np.asarray(value, dtype=float)
    return 2**m * math.factorial(m) * p_poly(m, 0.5, sigma, v**2 / 2)


def wick_sum_square_power(values, sigma: float, n: int):
    """(1 / (2^n n!)) :(sum_j phi_j^2)^n: = P_n^{k/2,sigma}(sum_j phi_j^2 / 2); copies on the last axis."""
    v = np.asarray(values, dtype=float)
    k = v.shape[-1]
    return p_poly(n, k / 2, sigma, 0.5 * np.sum(v**2, axis=-1))


def wick_sum_square_multinomial(values, sigma: float, n: int):
    """Same quantity expanded as sum over n_1+..+n_k = n of n!/prod n_j! prod :phi_j^{2 n_j}:."""
    v = np.asarray(values, dtype=float)
    k = v.shape[-1]
    total = np.zeros(v.shape[:-1])
    for parts in product(range(n + 1), repeat=k):
        if sum(parts) != n:
            continue
        coef = math.factorial(n) / math.prod(math.factorial(p) for p in parts)
        term = np.ones(v.shape[:-1])
        for j, p in enumerate(parts):
            term = term * wick_power(v[..., j], sigma, 2 * p)
        total = total + coef * term
    return total / (2**n * math.factorial(n))


# --- reports ----------------------------------------------------------------

def _soup_occupations(b: PotentialBundle, alpha: float, n: int, seed: int) -> np.ndarray:
    s = SoupSampler(b, alpha)
    return np.concatenate([blk.occupation() for blk in s.blocks(n, seed)]) if n else np.zeros((0, b.g.n))


def random_chis(b: PotentialBundle, rng: np.random.Generator, count: int = 3) -> list[np.ndarray]:
    return [rng.uniform(0.2, 1.5, size=b.g.n) for _ in range(count)]


def dynkin_moment_report(b: PotentialBundle, k: int, nsamples: int, gen, report: Report | None = None) -> Report:
    """Moments 1-4 and three Laplace transforms of L_{k/2} (soup) and 1/2 sum phi^2 (field)."""
    if nsamples < 2:
        raise ValidationError("need at least two samples")
    rng, seed = make_generator(gen)
    rep = report or Report(f"dynkin k={k}", seed)
    alpha = k / 2
    soup_seed = int(rng.integers(2**63))
    Ls = _soup_occupations(b, alpha, nsamples, soup_seed)
    Fs = gff_sample(b, k, rng, size=nsamples).half_square_sum()
    G = b.G
    for x in range(b.g.n):
        nm = b.g.nodes[x]
        for m in range(1, 5):
            exact = G[x, x] ** m * rising(alpha, m)
            rep.stat(f"iso k={k} soup E(L^{m})[{nm}]", Ls[:, x] ** m, exact)
            rep.stat(f"iso k={k} field E((phi^2/2)^{m})[{nm}]", Fs[:, x] ** m, exact)
    if b.g.n > 1:
        x, y = 0, 1
        exact = alpha**2 * G[x, x] * G[y, y] + alpha * G[x, y] ** 2
        rep.stat(f"iso k={k} soup E(L^x L^y)", Ls[:, x] * Ls[:, y], exact)
        rep.stat(f"iso k={k} field E(L^x L^y)", Fs[:, x] * Fs[:, y], exact)
    for i, chi in enumerate(random_chis(b, rng)):
        exact = math.exp(alpha * (logdet_spd(b.g.operator) - logdet_spd(np.asarray(b.g.operator) + np.diag(chi))))
        rep.stat(f"iso k={k} soup laplace chi{i}", np.exp(-Ls @ chi), exact)
        rep.stat(f"iso k={k} field laplace chi{i}", np.exp(-Fs @ chi), exact)
    return rep


def bridge_closed_form(b: PotentialBundle, x: int, y: int, chi) -> float:
    """(G_chi)^{xy} sqrt(det(G_chi G^-1))."""
    Gc = green_chi(b, chi)
    A = np.asarray(b.g.operator)
    return float(Gc[x, y] * math.exp(0.5 * (logdet_spd(A) - logdet_spd(A + np.diag(chi)))))


def dynkin_bridge_report(
    b: PotentialBundle, x, y, chi, nsamples: int, gen, report: Report | None = None, mismatch: bool = True
) -> Report:
    """E(phi^x phi^y F(phi^2/2)) and G^{xy} E(F(L_{1/2} + bridge)) for F = exp(-<., chi>)."""
    if nsamples < 2:
        raise ValidationError("need at least two samples")
    rng, seed = make_generator(gen)
    rep = report or Report("dynkin bridge", seed)
    i, j = b.g.index(x), b.g.index(y)
    chi = np.asarray(chi, dtype=float)
    target = bridge_closed_form(b, i, j, chi)
    phi = gff_sample(b, 1, rng, size=nsamples).copies[:, 0, :]
    lhs = phi[:, i] * phi[:, j] * np.exp(-(0.5 * phi**2) @ chi)
    rep.stat(f"iso-b field side {b.g.nodes[i]}{b.g.nodes[j]}", lhs, target)
    gam = bridges(b, b.g.nodes[i], b.g.nodes[j], nsamples, rng).occupation()
    L = _soup_occupations(b, 0.5, nsamples, int(rng.integers(2**63)))
    rhs = b.G[i, j] * np.exp(-(L + gam) @ chi)
    rep.stat(f"iso-b loop side alpha=1/2 {b.g.nodes[i]}{b.g.nodes[j]}", rhs, target)
    if mismatch:
        L1 = _soup_occupations(b, 1.0, nsamples, int(rng.integers(2**63)))
        bad = b.G[i, j] * np.exp(-(L1 + gam) @ chi)
        rep.stat("iso-b loop side alpha=1 (must differ)", bad, target, kind="discriminate")
    return rep


def renormalized_vs_wick_report(b: PotentialBundle, k: int, n: int, nsamples: int, gen, report: Report | None = None) -> Report:
    """Q_n^{k/2,sigma}(L~_{k/2}) (soup) against (1/(2^n n!)) :(sum phi_j^2)^n: (field)."""
    if nsamples < 2:
        raise ValidationError("need at least two samples")
    rng, seed = make_generator(gen)
    rep = report or Report(f"renormalized vs wick k={k} n={n}", seed)
    alpha = k / 2
    sig = np.diag(b.G)
    Lt = _soup_occupations(b, alpha, nsamples, int(rng.integers(2**63))) - alpha * sig
    phi = gff_sample(b, k, rng, size=nsamples).copies  # (m, k, nodes)
    Qs = np.stack([qk_poly(n, alpha, sig[x], Lt[:, x]) for x in range(b.g.n)], axis=1)
    Ws = np.stack([wick_sum_square_power(phi[:, :, x], sig[x], n) for x in range(b.g.n)], axis=1)
    mean_target = 1.0 if n == 0 else 0.0
    for x in range(b.g.n):
        nm = b.g.nodes[x]
        rep.stat(f"Q{n} soup mean[{nm}]", Qs[:, x], mean_target)
        rep.stat(f"wick{n} field mean[{nm}]", Ws[:, x], mean_target)
        t = orth_target(b, alpha, nm, nm, n, n)
        rep.stat(f"Q{n} soup 2nd moment[{nm}]", Qs[:, x] ** 2, t)
        rep.stat(f"wick{n} field 2nd moment[{nm}]", Ws[:, x] ** 2, t)
    if b.g.n > 1:
        t = orth_target(b, alpha, b.g.nodes[0], b.g.nodes[1], n, n)
        rep.stat(f"Q{n} soup cross[01]", Qs[:, 0] * Qs[:, 1], t)
        rep.stat(f"wick{n} field cross[01]", Ws[:, 0] * Ws[:, 1], t)
    return rep
