"""Seeded samplers: Poisson loop soups, bridges and killed paths.

Replicas are produced in fixed-size blocks. Block i draws from
``Generator(Philox(SeedSequence(seed).spawn(...)[i]))``, so the output for the
first n replicas depends only on (seed, n).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln

from . import _kernels as K
from .errors import ConvergenceFailure, ResourceLimit, ValidationError
from .graph import DELTA, FORMAT_VERSION, Current, GraphModel
from .green import PotentialBundle
from .loops import DiscreteLoopClass, MarkedLoop, class_mass, default_kmax, nontrivial_mass

BLOCK = 4096
LENGTH_TABLE_LIMIT = 2_000_000  # entries of the stored P^k stack
ROOTED_TABLE_LIMIT = 50_000_000
MODES = ("aggregate", "resolved")
METHODS = ("auto", "length", "rooted")


def block_generators(seed: int, n: int, block: int = BLOCK) -> Iterator[tuple[int, int, np.random.Generator]]:
    """(start, size, generator) for consecutive replica blocks."""
    if n < 0:
        raise ValidationError("replica count must be nonnegative")
    nblocks = -(-n // block)
    children = np.random.SeedSequence(int(seed)).spawn(nblocks)
    for i, ss in enumerate(children):
        start = i * block
        yield start, min(block, n - start), np.random.Generator(np.random.Philox(ss))


def make_generator(seed_or_gen) -> tuple[np.random.Generator, int | None]:
    if isinstance(seed_or_gen, np.random.Generator):
        return seed_or_gen, None
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed_or_gen)))), int(seed_or_gen)


# --- transition tables ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class _CSR:
    indptr: np.ndarray
    indices: np.ndarray
    rows: np.ndarray
    pvals: np.ndarray

    @classmethod
    def of(cls, g: GraphModel) -> "_CSR":
        rows, cols = np.nonzero(g.C > 0)
        indptr = np.zeros(g.n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(indptr, cols.astype(np.int64), rows.astype(np.int64), np.ascontiguousarray(g.P[rows, cols]))

    def row_cumsum(self, vals: np.ndarray) -> np.ndarray:
        c = np.cumsum(vals)
        starts = np.concatenate([[0.0], c])[self.indptr[:-1]]
        return c - np.repeat(starts, np.diff(self.indptr))

    def doob(self, h: np.ndarray, root: int) -> np.ndarray:
        """Normalized cumulative table of P[z,w] h(w) / (row total); row ``root`` is the first step."""
        w = self.pvals * h[self.indices]
        tot = np.add.reduceat(w, self.indptr[:-1]) if len(w) else np.zeros(0)
        tot = np.where(np.diff(self.indptr) > 0, tot, 0.0)
        cum = self.row_cumsum(w)
        norm = np.repeat(tot, np.diff(self.indptr))
        out = np.divide(cum, norm, out=np.zeros_like(cum), where=norm > 0)
        return out


# --- containers -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NetworkSummary:
    """Traversal counts N_xy and total occupation of a set of loops."""

    Nxy: np.ndarray
    occupation: np.ndarray

    def check(self) -> None:
        if not np.array_equal(self.Nxy.sum(axis=1), self.Nxy.sum(axis=0)):
            raise ValidationError("traversal counts are not a circulation")


@dataclass(frozen=True, eq=False)
class LoopSoup:
    nodes: tuple[str, ...]
    alpha: float
    loops: tuple[MarkedLoop, ...]
    trivial_occ: np.ndarray
    mode: str = "aggregate"
    seed: int | None = None
    eps: float | None = None
    point_loops: tuple[MarkedLoop, ...] = ()

    @property
    def n(self) -> int:
        return len(self.nodes)

    def occupation(self) -> np.ndarray:
        occ = np.array(self.trivial_occ, dtype=float)
        for l in self.loops + self.point_loops:
            occ += l.occupation(self.n)
        return occ

    def traversals(self) -> NetworkSummary:
        N = np.zeros((self.n, self.n), dtype=np.int64)
        for l in self.loops:
            N += l.traversals(self.n)
        return NetworkSummary(N, self.occupation())

    def classes(self) -> list[DiscreteLoopClass]:
        return [l.loop_class for l in self.loops]

    def dumps(self) -> str:
        head = {
            "format_version": FORMAT_VERSION,
            "alpha": self.alpha,
            "seed": self.seed,
            "mode": self.mode,
            "eps": self.eps,
            "trivialOcc": dict(zip(self.nodes, map(float, self.trivial_occ))),
        }
        lines = [json.dumps(head)]
        for l in self.loops + self.point_loops:
            lines.append(json.dumps({"cycle": [self.nodes[i] for i in l.cycle], "holding": [float(t) for t in l.holding]}))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class SoupBatch:
    """Many independent soups in flat arrays; loop i is nodes[offsets[i]:offsets[i+1]]."""

    n: int
    alpha: float
    nrep: int
    nodes: np.ndarray
    holding: np.ndarray
    offsets: np.ndarray
    replica: np.ndarray
    trivial: np.ndarray
    mode: str = "aggregate"
    eps: float | None = None
    point_node: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    point_hold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    point_rep: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def nloops(self) -> int:
        return len(self.offsets) - 1

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def point_replica(self) -> np.ndarray:
        return np.repeat(self.replica, self.lengths)

    @cached_property
    def point_loop(self) -> np.ndarray:
        return np.repeat(np.arange(self.nloops), self.lengths)

    @cached_property
    def successor(self) -> np.ndarray:
        """Index of the next point in the same loop (cyclically)."""
        nxt = np.arange(1, len(self.nodes) + 1)
        ends = self.offsets[1:] - 1
        nxt[ends] = self.offsets[:-1]
        return nxt

    def loop_count(self) -> np.ndarray:
        return np.bincount(self.replica, minlength=self.nrep)

    def _per_rep(self, idx: np.ndarray, weights=None) -> np.ndarray:
        out = np.bincount(idx, weights=weights, minlength=self.nrep * self.n)
        return out.reshape(self.nrep, self.n)

    def visits(self) -> np.ndarray:
        """N_x per replica (visits by nontrivial loops)."""
        return self._per_rep(self.point_replica * self.n + self.nodes).astype(np.int64)

    def nontrivial_occupation(self) -> np.ndarray:
        return self._per_rep(self.point_replica * self.n + self.nodes, self.holding)

    def point_occupation(self) -> np.ndarray:
        return self._per_rep(self.point_rep * self.n + self.point_node, self.point_hold)

    def occupation(self) -> np.ndarray:
        occ = self.nontrivial_occupation() + self.trivial
        if len(self.point_node):
            occ += self.point_occupation()
        return occ

    def loop_occupation(self) -> np.ndarray:
        """(nloops, n) occupation of each nontrivial loop."""
        out = np.bincount(self.point_loop * self.n + self.nodes, weights=self.holding, minlength=self.nloops * self.n)
        return out.reshape(self.nloops, self.n)

    def loop_traversals(self, x: int, y: int) -> np.ndarray:
        """Per loop count of x -> y steps."""
        hit = (self.nodes == x) & (self.nodes[self.successor] == y)
        return np.bincount(self.point_loop[hit], minlength=self.nloops)

    def traversals(self) -> np.ndarray:
        """(nrep, n, n) traversal counts."""
        n = self.n
        key = (self.point_replica * n + self.nodes) * n + self.nodes[self.successor]
        return np.bincount(key, minlength=self.nrep * n * n).reshape(self.nrep, n, n)

    def current_sum(self, omega: Current | np.ndarray) -> np.ndarray:
        w = omega.omega if isinstance(omega, Current) else np.asarray(omega)
        vals = w[self.nodes, self.nodes[self.successor]]
        return np.bincount(self.point_replica, weights=vals, minlength=self.nrep)

    def loop_minima(self) -> np.ndarray:
        if self.nloops == 0:
            return np.zeros(0, np.int64)
        return np.minimum.reduceat(self.nodes, self.offsets[:-1])

    def loops_of(self, r: int) -> list[MarkedLoop]:
        out = []
        for i in np.flatnonzero(self.replica == r):
            a, b = self.offsets[i], self.offsets[i + 1]
            out.append(MarkedLoop(tuple(self.nodes[a:b]), self.holding[a:b]))
        return out

    def soup(self, r: int, names: Sequence[str], seed: int | None = None) -> LoopSoup:
        pts = ()
        if len(self.point_node):
            sel = self.point_rep == r
            pts = tuple(MarkedLoop((int(x),), [t]) for x, t in zip(self.point_node[sel], self.point_hold[sel]))
        return LoopSoup(
            tuple(names), self.alpha, tuple(self.loops_of(r)), self.trivial[r].copy(),
            self.mode, seed, self.eps, pts,
        )


# --- the soup sampler -------------------------------------------------------

class SoupSampler:
    """Exact sampler of the Poisson ensemble with intensity alpha * mu.

    method "length": length k ~ Tr(P^k)/k, base point ~ [P^k]_xx, bridge steps from
    stored powers of P. method "rooted": for an order x_1..x_n, loops whose first
    node in the order is x_j are drawn from the chain restricted to {x_j..x_n}.
    "auto" takes "length" when the power stack is small.
    """

    def __init__(
        self,
        b: PotentialBundle,
        alpha: float,
        method: str = "auto",
        mode: str = "aggregate",
        eps: float | None = None,
        order: Iterable | None = None,
    ):
        if not alpha > 0 or not math.isfinite(alpha):
            raise ValidationError("alpha must be positive and finite")
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if mode == "resolved" and not (eps is not None and eps > 0):
            raise ValidationError("resolved mode needs eps > 0")
        if method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}")
        self.b, self.g = b, b.g
        self.alpha = float(alpha)
        self.mode, self.eps = mode, (float(eps) if mode == "resolved" else None)
        self.csr = _CSR.of(self.g)
        n = self.g.n
        if method == "auto":
            kmax = default_kmax(self.g) if n > 1 else 2
            method = "length" if (kmax + 1) * n * n <= LENGTH_TABLE_LIMIT else "rooted"
        self.method = method
        self.order = np.arange(n) if order is None else self.g.indices(order)
        if sorted(self.order.tolist()) != list(range(n)):
            raise ValidationError("order must list every node once")
        if method == "length":
            self._setup_length()
        else:
            self._setup_rooted()

    def _setup_length(self) -> None:
        g = self.g
        kmax = default_kmax(g) if g.n > 1 else 2
        if (kmax + 1) * g.n * g.n > 50 * LENGTH_TABLE_LIMIT:
            raise ConvergenceFailure(f"length truncation needs Kmax = {kmax}; use the rooted method")
        P = np.asarray(g.P)
        powers = np.empty((kmax + 1, g.n, g.n))
        powers[0] = np.eye(g.n)
        for k in range(1, kmax + 1):
            powers[k] = powers[k - 1] @ P
        diag = np.clip(np.einsum("kii->ki", powers), 0.0, None)
        c = np.zeros(kmax + 1)
        c[2:] = diag[2:].sum(axis=1) / np.arange(2, kmax + 1)
        self.kmax = kmax
        self.powers = powers
        self.diagcum = np.cumsum(diag, axis=1)
        self.ccum = np.cumsum(c)
        self.mass = float(self.ccum[-1])

    def _setup_rooted(self) -> None:
        g = self.g
        n = g.n
        nnz = len(self.csr.indices)
        if n * max(nnz, 1) > ROOTED_TABLE_LIMIT:
            raise ResourceLimit("rooted transition tables too large for this graph")
        A = np.asarray(g.operator)
        L = np.zeros(n)
        rr = np.zeros(n)
        qcum = np.zeros((n, nnz))
        for j in range(n):
            D = np.sort(self.order[j:])
            x = self.order[j]
            e = (D == x).astype(float)
            col = sla.solve(A[np.ix_(D, D)], e, assume_a="pos")
            gxx = col[D == x][0]
            val = g.lam[x] * gxx
            if val <= 1.0 + 1e-15:
                continue
            h = np.zeros(n)
            h[D] = col / gxx
            L[j] = math.log(val)
            rr[j] = 1.0 - 1.0 / val
            qcum[j] = self.csr.doob(h, x)
        self.L, self.r, self.qcum = L, rr, qcum
        self.mass = float(L.sum())

    def batch(self, gen: np.random.Generator, nrep: int) -> SoupBatch:
        g, csr, lam = self.g, self.csr, np.asarray(self.g.lam)
        if self.method == "length":
            nodes, hold, off, rep = K.length_batch(
                gen, nrep, self.alpha, self.ccum, self.diagcum, self.powers,
                csr.indptr, csr.indices, csr.pvals, lam,
            )
        else:
            nodes, hold, off, rep = K.rooted_batch(
                gen, nrep, self.alpha, self.order, self.L, self.r, self.qcum, csr.indptr, csr.indices, lam,
            )
        triv = gen.standard_gamma(self.alpha, size=(nrep, g.n)) / lam[None, :]
        kw = {}
        if self.mode == "resolved":
            prow, pcol, psz, triv = K.stick_break(gen, triv, self.alpha, self.eps)
            kw = dict(point_node=pcol, point_hold=psz, point_rep=prow)
        return SoupBatch(g.n, self.alpha, nrep, nodes, hold, off, rep, triv, self.mode, self.eps, **kw)

    def blocks(self, n: int, seed: int, block: int = BLOCK) -> Iterator[SoupBatch]:
        for _, size, gen in block_generators(seed, n, block):
            yield self.batch(gen, size)


def sample_soup(
    b: PotentialBundle, alpha: float, gen, mode: str = "aggregate", eps: float | None = None, method: str = "auto"
) -> LoopSoup:
    """One soup. ``gen`` is a numpy Generator or an integer seed."""
    rng, seed = make_generator(gen)
    s = SoupSampler(b, alpha, method=method, mode=mode, eps=eps)
    return s.batch(rng, 1).soup(0, b.g.nodes, seed)


def sample_soups(
    b: PotentialBundle, alpha: float, n: int, seed: int, mode: str = "aggregate",
    eps: float | None = None, method: str = "auto",
) -> SoupBatch:
    """n replicas as a single batch (blocks concatenated)."""
    s = SoupSampler(b, alpha, method=method, mode=mode, eps=eps)
    return concat_batches(list(s.blocks(n, seed)), b.g.n, alpha)


def concat_batches(parts: list[SoupBatch], n: int, alpha: float) -> SoupBatch:
    if not parts:
        return SoupBatch(n, alpha, 0, np.zeros(0, np.int64), np.zeros(0), np.zeros(1, np.int64),
                         np.zeros(0, np.int64), np.zeros((0, n)))
    nodes, hold, offs, reps, trivs, pn, ph, pr = [], [], [np.zeros(1, np.int64)], [], [], [], [], []
    npts = nrep = 0
    for p in parts:
        nodes.append(p.nodes)
        hold.append(p.holding)
        offs.append(p.offsets[1:] + npts)
        reps.append(p.replica + nrep)
        trivs.append(p.trivial)
        pn.append(p.point_node)
        ph.append(p.point_hold)
        pr.append(p.point_rep + nrep)
        npts += len(p.nodes)
        nrep += p.nrep
    return SoupBatch(
        n, alpha, nrep, np.concatenate(nodes), np.concatenate(hold), np.concatenate(offs),
        np.concatenate(reps), np.concatenate(trivs), parts[0].mode, parts[0].eps,
        np.concatenate(pn), np.concatenate(ph), np.concatenate(pr),
    )


# --- functionals ------------------------------------------------------------

def occupation(soup) -> np.ndarray:
    return soup.occupation()


def traversals(soup) -> NetworkSummary | np.ndarray:
    return soup.traversals()


def centered_occupation(soup, b: PotentialBundle) -> np.ndarray:
    """L~ = L - alpha G^xx."""
    return soup.occupation() - soup.alpha * np.diag(b.G)


def current_sum(soup, omega: Current):
    if isinstance(soup, SoupBatch):
        return soup.current_sum(omega)
    w = omega.omega
    total = 0.0
    for l in soup.loops:
        c = np.array(l.cycle)
        total += float(np.sum(w[c, np.roll(c, -1)]))
    return total


def soup_log_density(b: PotentialBundle, alpha: float, classes: Iterable[DiscreteLoopClass]) -> float:
    """log P(DL_alpha equals the given multiset of classes)."""
    classes = list(classes)
    val = -alpha * nontrivial_mass(b)
    for c in classes:
        val += math.log(alpha * class_mass(b, c))
    for m in Counter(c.cycle for c in classes).values():
        val -= float(gammaln(m + 1))
    return val


def _patterns(idx: np.ndarray) -> np.ndarray:
    m = len(idx)
    return np.array([np.roll(idx, -j) for j in range(m)], dtype=np.int64)


def loop_multiple_local_time(loop: MarkedLoop, pts: Sequence[int]) -> float:
    """Multiple local time at node indices pts (distinct, or all equal)."""
    pts = [int(p) for p in pts]
    if not pts:
        raise ValidationError("need at least one point")
    if len(set(pts)) == 1:
        lx = float(loop.occupation(max(loop.cycle + tuple(pts)) + 1)[pts[0]])
        return lx ** len(pts) / math.factorial(len(pts) - 1)
    if len(set(pts)) != len(pts):
        raise ValidationError("points must be pairwise distinct (or all equal)")
    nodes = np.array(loop.cycle, dtype=np.int64)
    out = K.pattern_sums(nodes, np.asarray(loop.holding), np.array([0, len(nodes)]), _patterns(np.array(pts)))
    return float(out[0])


def batch_multiple_local_time(batch: SoupBatch, pts: Sequence[int]) -> np.ndarray:
    """Per nontrivial loop of the batch, for distinct points."""
    pts = np.array([int(p) for p in pts], dtype=np.int64)
    if len(set(pts.tolist())) != len(pts):
        raise ValidationError("points must be pairwise distinct")
    return K.pattern_sums(batch.nodes, batch.holding, batch.offsets, _patterns(pts))


# --- paths ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Path:
    nodes: np.ndarray
    holding: np.ndarray
    killed: bool = False

    @property
    def endpoint(self):
        return DELTA if self.killed else int(self.nodes[-1])

    def occupation(self, n: int) -> np.ndarray:
        return np.bincount(self.nodes, weights=self.holding, minlength=n)

    def check(self, g: GraphModel) -> None:
        if len(self.nodes) == 0 or len(self.holding) != len(self.nodes) or np.any(self.holding <= 0):
            raise ValidationError("path needs one positive holding per visit")
        x = self.nodes
        if len(x) > 1 and np.any(g.C[x[:-1], x[1:]] <= 0):
            raise ValidationError("consecutive visits must be joined by edges")


@dataclass(frozen=True, eq=False)
class PathBatch:
    n: int
    nodes: np.ndarray
    holding: np.ndarray
    offsets: np.ndarray
    killed: bool

    def __len__(self) -> int:
        return len(self.offsets) - 1

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def path(self, i: int) -> Path:
        a, b = self.offsets[i], self.offsets[i + 1]
        return Path(self.nodes[a:b], self.holding[a:b], self.killed)

    def occupation(self) -> np.ndarray:
        idx = np.repeat(np.arange(len(self)), self.lengths) * self.n + self.nodes
        return np.bincount(idx, weights=self.holding, minlength=len(self) * self.n).reshape(len(self), self.n)

    def laplace(self, chi) -> np.ndarray:
        """exp(-<gamma_hat, chi>) per path."""
        return np.exp(-self.occupation() @ np.asarray(chi, dtype=float))


def killed_paths(b: PotentialBundle, x, m: int, gen) -> PathBatch:
    g = b.g
    rng, _ = make_generator(gen)
    csr = _CSR.of(g)
    cumP = csr.row_cumsum(csr.pvals)
    starts = np.full(m, g.index(x), dtype=np.int64)
    nodes, hold, off = K.killed_batch(rng, starts, cumP, csr.indptr, csr.indices, np.asarray(g.lam))
    return PathBatch(g.n, nodes, hold, off, True)


def sample_killed_path(b: PotentialBundle, x, gen) -> Path:
    return killed_paths(b, x, 1, gen).path(0)


def bridges(b: PotentialBundle, x, y, m: int, gen) -> PathBatch:
    """m paths from mu^{x,y} / G^{xy}."""
    g = b.g
    rng, _ = make_generator(gen)
    i, j = g.index(x), g.index(y)
    csr = _CSR.of(g)
    h = b.G[:, j] / b.G[j, j]
    qcum = csr.doob(h, j)
    q = 1.0 / (g.lam[j] * b.G[j, j])
    nodes, hold, off = K.bridge_batch(rng, m, i, j, q, qcum, csr.indptr, csr.indices, np.asarray(g.lam))
    return PathBatch(g.n, nodes, hold, off, False)


def sample_bridge(b: PotentialBundle, x, y, gen) -> Path:
    return bridges(b, x, y, 1, gen).path(0)
