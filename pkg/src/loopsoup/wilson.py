"""Loop erasure, erased-path laws, Wilson's algorithm and spanning-tree enumeration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConvergenceFailure, ResourceLimit, ValidationError
from .graph import DELTA, FORMAT_VERSION, GraphModel
from .green import PotentialBundle, logdet_spd
from .loops import MarkedLoop
from .soup import NetworkSummary, Path, _CSR, make_generator

ROOT = -1  # parent value standing for the cemetery
TREE_ENUM_NODES = 8
TREE_ENUM_LIMIT = 2_000_000
MAX_STEPS = 10**9


@dataclass(frozen=True)
class SpanningTree:
    """parent[x] is a node index or ROOT (the cemetery)."""

    parent: tuple[int, ...]

    def validate(self, g: GraphModel) -> None:
        n = g.n
        if len(self.parent) != n:
            raise ValidationError("one parent per node")
        for x, p in enumerate(self.parent):
            if p == ROOT:
                if g.kappa[x] <= 0:
                    raise ValidationError(f"{g.nodes[x]} has no killing link")
            elif not (0 <= p < n and g.C[x, p] > 0):
                raise ValidationError(f"({g.nodes[x]}, parent) is not an edge")
        for x in range(n):
            seen, z = 0, x
            while z != ROOT:
                z = self.parent[z]
                seen += 1
                if seen > n:
                    raise ValidationError("parent map has a cycle")

    def log_weight(self, g: GraphModel) -> float:
        """log prod C over tree links, kappa for links to the cemetery."""
        p = np.array(self.parent)
        x = np.arange(g.n)
        dead = p == ROOT
        vals = np.where(dead, g.kappa, g.C[x, np.where(dead, 0, p)])
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(vals)))

    def dumps(self, g: GraphModel) -> str:
        par = {g.nodes[x]: (DELTA if p == ROOT else g.nodes[p]) for x, p in enumerate(self.parent)}
        return json.dumps({"format_version": FORMAT_VERSION, "parent": par})


def tree_weight(b: PotentialBundle, tree: SpanningTree) -> float:
    """P(tree) = Z_e prod C."""
    tree.validate(b.g)
    return float(np.exp(b.log_Z + tree.log_weight(b.g)))


def enumerate_spanning_trees(b: PotentialBundle) -> list[tuple[SpanningTree, float]]:
    """All trees rooted at the cemetery, by backtracking over parent choices."""
    g = b.g
    n = g.n
    if n > TREE_ENUM_NODES:
        raise ResourceLimit(f"tree enumeration limited to {TREE_ENUM_NODES} nodes")
    choices = [list(g.neighbors[x]) + ([ROOT] if g.kappa[x] > 0 else []) for x in range(n)]
    parent = [None] * n
    out: list[SpanningTree] = []

    def closes_cycle(x: int) -> bool:
        z = parent[x]
        while z is not None and z != ROOT:
            if z == x:
                return True
            z = parent[z]
        return False

    def rec(x: int) -> None:
        if x == n:
            out.append(SpanningTree(tuple(parent)))
            if len(out) > TREE_ENUM_LIMIT:
                raise ResourceLimit("too many spanning trees to enumerate")
            return
        for c in choices[x]:
            parent[x] = c
            if not closes_cycle(x):
                rec(x + 1)
        parent[x] = None

    rec(0)
    return [(t, float(np.exp(b.log_Z + t.log_weight(g)))) for t in out]


# --- loop erasure --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ErasureResult:
    """skeleton holds node indices; times are indices into the source path."""

    skeleton: tuple[int, ...]
    skeleton_times: np.ndarray
    erased: tuple[MarkedLoop, ...]
    erased_times: tuple[np.ndarray, ...]
    path_length: int

    def reconstruct(self) -> np.ndarray:
        """Node sequence recovered by putting the erased loops back in time order."""
        seq = np.full(self.path_length, -1, dtype=np.int64)
        seq[self.skeleton_times] = self.skeleton
        for l, t in zip(self.erased, self.erased_times):
            seq[t] = l.cycle
        return seq

    def point_loops(self, holding: np.ndarray) -> list[MarkedLoop]:
        """The kept holding intervals on the skeleton, as one-point loops."""
        return [MarkedLoop((x,), [holding[t]]) for x, t in zip(self.skeleton, self.skeleton_times)]

    def network(self, n: int, holding: np.ndarray) -> NetworkSummary:
        return network_summary(list(self.erased) + self.point_loops(holding), n)


def loop_erase(path: Path) -> ErasureResult:
    """Chronological loop erasure."""
    nodes = np.asarray(path.nodes, dtype=np.int64)
    hold = np.asarray(path.holding, dtype=float)
    if len(nodes) == 0 or len(hold) != len(nodes):
        raise ValidationError("path needs one holding per visit")
    if np.any(nodes[1:] == nodes[:-1]):
        raise ValidationError("path repeats a node without jumping")
    stack: list[int] = []
    times: list[int] = []
    where: dict[int, int] = {}
    erased, etimes = [], []
    for t, x in enumerate(nodes.tolist()):
        p = where.get(x)
        if p is not None:
            seg = np.array(times[p:], dtype=np.int64)
            erased.append(MarkedLoop(tuple(stack[p:]), hold[seg]))
            etimes.append(seg)
            for z in stack[p:]:
                del where[z]
            del stack[p:], times[p:]
        where[x] = len(stack)
        stack.append(x)
        times.append(t)
    return ErasureResult(tuple(stack), np.array(times, dtype=np.int64), tuple(erased), tuple(etimes), len(nodes))


def be_exact_law(b: PotentialBundle, x, target, eta: Sequence) -> float:
    """Law of the erased path: prod C (times kappa at the end for target DELTA) times det G on {eta}."""
    g = b.g
    idx = [g.index(v) for v in eta]
    if not idx or idx[0] != g.index(x):
        raise ValidationError("eta must start at x")
    if len(set(idx)) != len(idx):
        raise ValidationError("eta must be self-avoiding")
    killed = target == DELTA
    if not killed and idx[-1] != g.index(target):
        raise ValidationError("eta must end at the target")
    a = np.array(idx)
    w = float(np.prod(g.C[a[:-1], a[1:]])) if len(a) > 1 else 1.0
    if killed:
        w *= g.kappa[a[-1]]
    if w == 0:
        return 0.0
    return w * float(np.exp(logdet_spd(b.G[np.ix_(a, a)])))


def network_summary(loops: Iterable[MarkedLoop], n: int) -> NetworkSummary:
    N = np.zeros((n, n), dtype=np.int64)
    occ = np.zeros(n)
    for l in loops:
        N += l.traversals(n)
        occ += l.occupation(n)
    return NetworkSummary(N, occ)


# --- Wilson -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WilsonBatch:
    n: int
    parent: np.ndarray  # (runs, n), ROOT for the cemetery
    last: np.ndarray  # (runs, n) kept holding per node
    nodes: np.ndarray
    holding: np.ndarray
    offsets: np.ndarray
    run: np.ndarray

    @property
    def runs(self) -> int:
        return self.parent.shape[0]

    @cached_property
    def point_run(self) -> np.ndarray:
        return np.repeat(self.run, np.diff(self.offsets))

    @cached_property
    def successor(self) -> np.ndarray:
        nxt = np.arange(1, len(self.nodes) + 1)
        nxt[self.offsets[1:] - 1] = self.offsets[:-1]
        return nxt

    def tree(self, r: int) -> SpanningTree:
        return SpanningTree(tuple(int(p) for p in self.parent[r]))

    def loops(self, r: int) -> list[MarkedLoop]:
        out = []
        for i in np.flatnonzero(self.run == r):
            a, b = self.offsets[i], self.offsets[i + 1]
            out.append(MarkedLoop(tuple(self.nodes[a:b]), self.holding[a:b]))
        out += [MarkedLoop((x,), [self.last[r, x]]) for x in range(self.n)]
        return out

    def traversals(self) -> np.ndarray:
        n = self.n
        key = (self.point_run * n + self.nodes) * n + self.nodes[self.successor]
        return np.bincount(key, minlength=self.runs * n * n).reshape(self.runs, n, n)

    def occupation(self) -> np.ndarray:
        """Erased nontrivial loops plus the kept one-point holdings."""
        occ = np.bincount(self.point_run * self.n + self.nodes, weights=self.holding, minlength=self.runs * self.n)
        return occ.reshape(self.runs, self.n) + self.last

    def tree_codes(self) -> np.ndarray:
        """Integer code per run (parents in base n+1)."""
        base = self.n + 1
        p = np.where(self.parent == ROOT, self.n, self.parent)
        return p @ (base ** np.arange(self.n, dtype=np.int64))


def wilson_batch(b: PotentialBundle, runs: int, gen, order: Iterable | None = None) -> WilsonBatch:
    g = b.g
    rng, _ = make_generator(gen)
    csr = _CSR.of(g)
    cumP = csr.row_cumsum(csr.pvals)
    order_idx = np.arange(g.n) if order is None else g.indices(order)
    if sorted(order_idx.tolist()) != list(range(g.n)):
        raise ValidationError("order must list every node once")
    parent, last, nodes, hold, off, run, ok = K.wilson_batch(
        rng, runs, np.asarray(order_idx, np.int64), cumP, csr.indptr, csr.indices, np.asarray(g.lam), MAX_STEPS
    )
    if not ok:
        raise ConvergenceFailure("Wilson's algorithm exceeded the step guard")
    parent = np.where(parent == g.n, ROOT, parent)
    return WilsonBatch(g.n, parent, last, nodes, hold, off, run)


def wilson_sample(b: PotentialBundle, gen, order: Iterable | None = None) -> tuple[SpanningTree, list[MarkedLoop]]:
    """One run: the tree and the erased loops (one-point loops last)."""
    w = wilson_batch(b, 1, gen, order)
    return w.tree(0), w.loops(0)


def tree_code(tree: SpanningTree, n: int) -> int:
    base = n + 1
    return int(sum((n if p == ROOT else p) * base**i for i, p in enumerate(tree.parent)))
