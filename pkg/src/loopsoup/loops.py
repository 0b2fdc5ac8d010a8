"""Exact functionals of the loop measure mu, plus a brute-force loop enumerator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceLimit, ValidationError
from .graph import Current, GraphModel, _measure, _subset
from .green import (
    PotentialBundle,
    log_det_restricted,
    log_twisted_ratio,
    logdet_spd,
    lu_logdet,
    restricted_green,
)

ENUMERATION_LIMIT = 10_000_000


def canonical_rotation(seq: Sequence[int]) -> tuple[int, ...]:
    """Lexicographically smallest rotation."""
    seq = tuple(int(s) for s in seq)
    k = len(seq)
    if k == 0:
        return seq
    doubled = seq + seq
    best = min(range(k), key=lambda i: doubled[i : i + k])
    return doubled[best : best + k]


def minimal_period(seq: Sequence[int]) -> int:
    k = len(seq)
    for d in range(1, k + 1):
        if k % d == 0 and all(seq[i] == seq[i % d] for i in range(k)):
            return d
    return k


@dataclass(frozen=True)
class DiscreteLoopClass:
    """A closed sequence of node indices taken up to rotation (stored canonically)."""

    cycle: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cycle", canonical_rotation(self.cycle))

    @classmethod
    def from_names(cls, g: GraphModel, names: Iterable) -> "DiscreteLoopClass":
        return cls(tuple(int(i) for i in g.indices(names)))

    @property
    def p(self) -> int:
        return len(self.cycle)

    @property
    def period(self) -> int:
        return minimal_period(self.cycle)

    def traversals(self, n: int) -> np.ndarray:
        N = np.zeros((n, n), dtype=np.int64)
        c = np.array(self.cycle)
        np.add.at(N, (c, np.roll(c, -1)), 1)
        return N

    def names(self, g: GraphModel) -> list[str]:
        return [g.nodes[i] for i in self.cycle]

    def validate(self, g: GraphModel) -> None:
        c = self.cycle
        if len(c) < 2:
            raise ValidationError("a nontrivial discrete loop needs at least two points")
        if min(c) < 0 or max(c) >= g.n:
            raise ValidationError("loop references an unknown node")
        for x, y in zip(c, c[1:] + c[:1]):
            if g.C[x, y] <= 0:
                raise ValidationError(f"({g.nodes[x]}, {g.nodes[y]}) is not an edge")


@dataclass(frozen=True, eq=False)
class MarkedLoop:
    """A based representative of a loop with rescaled holding times.

    ``cycle`` holds node indices; a one-point loop has ``len(cycle) == 1``.
    """

    cycle: tuple[int, ...]
    holding: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "cycle", tuple(int(i) for i in self.cycle))
        h = np.array(self.holding, dtype=float)
        if h.shape != (len(self.cycle),) or np.any(h <= 0):
            raise ValidationError("holding times must be positive, one per point")
        h.setflags(write=False)
        object.__setattr__(self, "holding", h)

    @property
    def p(self) -> int:
        return len(self.cycle)

    @property
    def loop_class(self) -> DiscreteLoopClass:
        return DiscreteLoopClass(self.cycle)

    def occupation(self, n: int) -> np.ndarray:
        return np.bincount(np.array(self.cycle, dtype=np.int64), weights=self.holding, minlength=n)

    def traversals(self, n: int) -> np.ndarray:
        if self.p == 1:
            return np.zeros((n, n), dtype=np.int64)
        return self.loop_class.traversals(n)

    def rotated(self, r: int) -> "MarkedLoop":
        r %= self.p
        return MarkedLoop(self.cycle[r:] + self.cycle[:r], np.roll(self.holding, -r))


# --- spectral helpers ----------------------------------------------------

def symmetric_transition(g: GraphModel) -> np.ndarray:
    """lam^{1/2} P lam^{-1/2}, symmetric with the spectrum of P."""
    s = np.sqrt(g.lam)
    return g.C / np.outer(s, s)


def spectral_radius(g: GraphModel) -> float:
    """rho(P), from the symmetric eigenproblem of lam^{1/2} P lam^{-1/2}."""
    if g.n == 1:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(symmetric_transition(g)))))


def default_kmax(g: GraphModel, eps: float = 1e-12) -> int:
    """Smallest K with rho^K n / (K (1 - rho)) < eps."""
    rho = spectral_radius(g)
    if rho <= 0:
        return 2
    if rho >= 1:
        raise ValidationError("transition matrix is not strictly substochastic")
    n = g.n
    K = 2
    while rho**K * n / (K * (1 - rho)) >= eps:
        K = K * 2
    lo, hi = K // 2, K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rho**mid * n / (mid * (1 - rho)) < eps:
            hi = mid
        else:
            lo = mid
    return max(hi, 2)


def length_masses(b: PotentialBundle, kmax: int) -> np.ndarray:
    """Array c with c[k] = Tr(P^k)/k for 2 <= k <= kmax (c[0] = c[1] = 0)."""
    nu = np.linalg.eigvalsh(symmetric_transition(b.g))
    k = np.arange(kmax + 1)
    tr = (nu[None, :] ** k[:, None]).sum(axis=1)
    c = np.zeros(kmax + 1)
    c[2:] = np.maximum(tr[2:], 0.0) / k[2:]
    return c


# --- masses ---------------------------------------------------------------

def mass_by_length(b: PotentialBundle, k: int) -> float:
    """mu(p = k) = Tr(P^k)/k."""
    if k < 2:
        raise ValidationError("nontrivial discrete loops have at least two points")
    return float(np.trace(np.linalg.matrix_power(np.asarray(b.g.P), k)) / k)


def nontrivial_mass(b: PotentialBundle) -> float:
    """mu(p > 1) = -log det(I - P) = log(Z_e prod lambda)."""
    return float(b.log_Z + np.sum(np.log(b.g.lam)))


def nontrivial_mass_direct(b: PotentialBundle) -> float:
    phase, la = lu_logdet(np.eye(b.g.n) - b.g.P)
    return -la


def expected_jump_count(b: PotentialBundle) -> float:
    """Integral of p 1{p > 1} dmu = Tr(G C)."""
    return float(np.sum(b.G * b.g.C))


def discrete_class_weight(b: PotentialBundle, c: DiscreteLoopClass) -> float:
    """Product of P along the cycle."""
    c.validate(b.g)
    x = np.array(c.cycle)
    return float(np.prod(b.g.P[x, np.roll(x, -1)]))


def class_mass(b: PotentialBundle, c: DiscreteLoopClass) -> float:
    """mu-mass of the class: (period / p) * prod P, the based-sequence count weighting."""
    return discrete_class_weight(b, c) * c.period / c.p


def cyclic_green_product(b: PotentialBundle, pts: Sequence) -> float:
    """mu(multiple local time at x_1..x_n) = G^{x1 x2} G^{x2 x3} ... G^{xn x1}."""
    idx = b.g.indices(pts)
    if len(idx) == 0:
        raise ValidationError("need at least one point")
    return float(np.prod(b.G[idx, np.roll(idx, -1)]))


def edge_T_mean(b: PotentialBundle, x, y) -> float:
    """mu(T_xy) = G^xx + G^yy - 2 G^xy, T being minus the log-derivative in C_xy."""
    i, j = b.g.index(x), b.g.index(y)
    return float(b.G[i, i] + b.G[j, j] - 2 * b.G[i, j])


def mu_laplace(b: PotentialBundle, chi, D: Iterable | None = None) -> float:
    """mu(e^{-<l, chi>} - 1) = log(det G_chi / det G).

    With ``D`` given, restricts to loops inside D (chi must vanish off D).
    """
    chi = _measure(b.g, chi)
    if D is None:
        A = np.asarray(b.g.operator)
        return float(logdet_spd(A) - logdet_spd(A + np.diag(chi)))
    idx = _subset(b.g, D)
    off = np.setdiff1d(np.arange(b.g.n), idx)
    if np.any(chi[off] != 0):
        raise ValidationError("chi must be supported in D")
    A = np.asarray(b.g.operator)[np.ix_(idx, idx)]
    return float(logdet_spd(A) - logdet_spd(A + np.diag(chi[idx])))


def mu_laplace_symmetric(b: PotentialBundle, chi, D: Iterable | None = None) -> float:
    """Same quantity by -log det(I + M_sqrt(chi) G M_sqrt(chi))."""
    chi = _measure(b.g, chi)
    G = b.G if D is None else restricted_green(b, D)
    s = np.sqrt(chi)
    return float(-logdet_spd(np.eye(b.g.n) + s[:, None] * G * s[None, :]))


def avoidance_probability(b: PotentialBundle, F: Iterable, alpha: float) -> float:
    """P(no nontrivial loop of the soup meets F) = [prod_F lambda det G_FF]^-alpha."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    idx = _subset(b.g, F)
    if len(idx) == 0:
        return 1.0
    GFF = b.G[np.ix_(idx, idx)]
    log_val = np.sum(np.log(b.g.lam[idx])) + logdet_spd(GFF)
    return float(np.exp(-alpha * log_val))


def avoidance_two_sets(b: PotentialBundle, F1: Iterable, F2: Iterable, alpha: float) -> float:
    """P(no nontrivial loop meets both F1 and F2), F1 and F2 disjoint."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    i1, i2 = set(_subset(b.g, F1).tolist()), set(_subset(b.g, F2).tolist())
    if i1 & i2:
        raise ValidationError("F1 and F2 must be disjoint")
    if not i1 or not i2:
        return 1.0
    allx = set(range(b.g.n))
    D1, D2 = allx - i1, allx - i2
    nodes = b.g.nodes
    ld = lambda S: log_det_restricted(b, [nodes[i] for i in S])  # noqa: E731
    log_val = b.log_Z + ld(D1 & D2) - ld(D1) - ld(D2)
    return float(np.exp(-alpha * log_val))


def current_log_functional(b: PotentialBundle, omega: Current) -> float:
    """mu(exp(i int_l omega) - 1) = log det(G^(omega) G^-1), which is real."""
    val = log_twisted_ratio(b, omega)
    if abs(val.imag) > 1e-10:
        raise ValidationError(f"log det ratio has imaginary part {val.imag:g}")
    return float(val.real)


def _check_support(e: GraphModel, e2: GraphModel) -> None:
    if e.nodes != e2.nodes:
        raise ValidationError("energy forms must live on the same node set")
    if np.any((e2.C > 0) & (e.C <= 0)):
        raise ValidationError("e' has conductance on a link outside the support of e")


def rn_exponent(e: GraphModel, e2: GraphModel, loop: MarkedLoop) -> float:
    """log d(mu_e')/d(mu_e) at the loop."""
    _check_support(e, e2)
    occ = loop.occupation(e.n)
    val = -float(np.dot(e2.lam - e.lam, occ))
    if loop.p > 1:
        x = np.array(loop.cycle)
        y = np.roll(x, -1)
        val += float(np.sum(np.log(e2.C[x, y] / e.C[x, y])))
    return val


def energy_change_log(b: PotentialBundle, e2: GraphModel) -> float:
    """log(Z_e' / Z_e)."""
    _check_support(b.g, e2)
    return float(-logdet_spd(e2.operator) - b.log_Z)


def _closed_walk_count(g: GraphModel, kmax: int) -> int:
    A = (g.C > 0).astype(float)
    total, Ak = 0.0, np.eye(g.n)
    for k in range(1, kmax + 1):
        Ak = Ak @ A
        if k >= 2:
            total += np.trace(Ak)
        if total > ENUMERATION_LIMIT:
            break
    return int(total)


def enumerate_discrete_loops(b: PotentialBundle, Kmax: int) -> list[tuple[DiscreteLoopClass, float]]:
    """All classes with 2 <= p <= Kmax and their mu-masses, canonical order.

    Each based sequence of length k carries prod P / k; sequences are grouped
    by rotation class, which reproduces sum_k Tr(P^k)/k exactly.
    """
    g = b.g
    if Kmax < 2:
        return []
    count = _closed_walk_count(g, Kmax)
    if count > ENUMERATION_LIMIT:
        raise ResourceLimit(f"~{count} based sequences exceed the enumeration guard")
    P = np.asarray(g.P)
    masses: dict[tuple[int, ...], float] = {}
    seqs = np.arange(g.n, dtype=np.int64)[:, None]
    w = np.ones(g.n)
    deg = [len(nb) for nb in g.neighbors]
    for k in range(2, Kmax + 1):
        last = seqs[:, -1]
        reps = np.array([deg[v] for v in last], dtype=np.int64)
        nxt = np.concatenate([g.neighbors[v] for v in last]) if len(last) else np.zeros(0, np.int64)
        rows = np.repeat(np.arange(len(seqs)), reps)
        seqs = np.hstack([seqs[rows], nxt[:, None]])
        w = w[rows] * P[last[rows], nxt]
        first, lastk = seqs[:, 0], seqs[:, -1]
        closing = P[lastk, first]
        ok = closing > 0
        for s, m in zip(seqs[ok], (w[ok] * closing[ok]) / k):
            key = canonical_rotation(s)
            masses[key] = masses.get(key, 0.0) + float(m)
    return [(DiscreteLoopClass(key), masses[key]) for key in sorted(masses, key=lambda t: (len(t), t))]
