"""Weighted graphs carrying an energy form: conductances C and killing kappa.

All matrices are dense float64 and indexed by the input node order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, ValidationError

DELTA = "DELTA"
FORMAT_VERSION = 1

# relative tolerance used when clipping round-off in derived killing weights
_KILL_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GraphModel:
    """Validated energy form on a finite vertex set.

    ``C`` is the symmetric conductance matrix (zero diagonal) and ``kappa`` the
    killing measure.  ``lam`` and ``P`` are derived:
    ``lam[x] = kappa[x] + sum_y C[x, y]`` and ``P[x, y] = C[x, y] / lam[x]``.
    """

    nodes: tuple[str, ...]
    C: np.ndarray
    kappa: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "C", _frozen(self.C))
        object.__setattr__(self, "kappa", _frozen(self.kappa))
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.nodes)})
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def lam(self) -> np.ndarray:
        return _frozen(self.kappa + self.C.sum(axis=1))

    @cached_property
    def P(self) -> np.ndarray:
        return _frozen(self.C / self.lam[:, None])

    @cached_property
    def operator(self) -> np.ndarray:
        """M_lambda - C, the matrix whose inverse is the Green function."""
        return _frozen(np.diag(self.lam) - self.C)

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(self.C[i] > 0) for i in range(self.n))

    def index(self, node) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise ValidationError(f"unknown node {node!r}") from None

    def indices(self, nodes: Iterable) -> np.ndarray:
        return np.array([self.index(v) for v in nodes], dtype=np.int64)

    def edges(self) -> list[tuple[str, str, float]]:
        iu, ju = np.nonzero(np.triu(self.C))
        return [(self.nodes[i], self.nodes[j], float(self.C[i, j])) for i, j in zip(iu, ju)]

    def same_as(self, other: "GraphModel", tol: float = 0.0) -> bool:
        return (
            self.nodes == other.nodes
            and np.allclose(self.C, other.C, rtol=tol, atol=0)
            and np.allclose(self.kappa, other.kappa, rtol=tol, atol=0)
        )

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "nodes": list(self.nodes),
            "edges": [{"u": u, "v": v, "c": c} for u, v, c in self.edges()],
            "killing": {v: float(k) for v, k in zip(self.nodes, self.kappa) if k > 0},
        }


def _validate(g: GraphModel) -> None:
    n = len(g.nodes)
    if n == 0:
        raise ValidationError("graph needs at least one node")
    if len(set(g.nodes)) != n:
        raise ValidationError("duplicate node names")
    if DELTA in g.nodes:
        raise ValidationError(f"{DELTA!r} is reserved for the cemetery")
    C, kappa = g.C, g.kappa
    if C.shape != (n, n) or kappa.shape != (n,):
        raise DimensionMismatch(f"C must be {n}x{n} and kappa length {n}")
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(kappa))):
        raise ValidationError("weights must be finite")
    if np.any(C < 0) or np.any(kappa < 0):
        raise ValidationError("weights must be nonnegative")
    if np.any(np.diag(C) != 0):
        raise ValidationError("self-loop edges are not allowed")
    if not np.array_equal(C, C.T):
        raise ValidationError("conductances must be symmetric")
    if not np.any(kappa > 0):
        raise ValidationError("killing measure vanishes identically (recurrent case is not supported)")
    ncomp, _ = connected_components(C > 0, directed=False)
    if ncomp > 1:
        raise ValidationError(f"graph is disconnected ({ncomp} components)")


@dataclass(frozen=True, eq=False)
class Current:
    """Antisymmetric edge function omega, in radians."""

    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen(self.omega))
        if not np.array_equal(self.omega, -self.omega.T):
            raise ValidationError("current must be antisymmetric")

    @classmethod
    def on(cls, g: GraphModel, values: Mapping[tuple, float]) -> "Current":
        """Build from ``{(u, v): theta}``; the reverse orientation gets ``-theta``."""
        w = np.zeros((g.n, g.n))
        for (u, v), theta in values.items():
            i, j = g.index(u), g.index(v)
            if g.C[i, j] <= 0:
                raise ValidationError(f"({u}, {v}) is not an edge")
            w[i, j] += theta
            w[j, i] -= theta
        return cls(w)

    @classmethod
    def zero(cls, g: GraphModel) -> "Current":
        return cls(np.zeros((g.n, g.n)))

    def check_support(self, g: GraphModel) -> None:
        if self.omega.shape != (g.n, g.n):
            raise DimensionMismatch("current has wrong shape")
        if np.any((self.omega != 0) & (g.C <= 0)):
            raise ValidationError("current is nonzero off the edge set")


def build_graph(
    nodes: Sequence[str],
    edges: Iterable,
    killing: Mapping[str, float],
) -> GraphModel:
    """Build a model from a node list, ``(u, v, c)`` edges and a killing map.

    Zero-weight edges are dropped.  Giving both orientations of an edge is
    accepted only when the weights agree.
    """
    nodes = tuple(str(v) for v in nodes)
    if not nodes:
        raise ValidationError("graph needs at least one node")
    if len(set(nodes)) != len(nodes):
        raise ValidationError("duplicate node names")
    if DELTA in nodes:
        raise ValidationError(f"{DELTA!r} is reserved for the cemetery")
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    C = np.zeros((n, n))
    seen: dict[tuple[int, int], float] = {}
    for e in edges:
        if isinstance(e, Mapping):
            u, v, c = e["u"], e["v"], e["c"]
        else:
            u, v, c = e
        if u not in idx or v not in idx:
            raise ValidationError(f"edge ({u}, {v}) references an unknown node")
        c = float(c)
        if not math.isfinite(c) or c < 0:
            raise ValidationError(f"edge ({u}, {v}) has invalid weight {c}")
        i, j = idx[u], idx[v]
        if i == j:
            raise ValidationError(f"self-loop edge at {u}")
        if (i, j) in seen:
            raise ValidationError(f"edge ({u}, {v}) given twice")
        if (j, i) in seen:
            if seen[(j, i)] != c:
                raise ValidationError(f"asymmetric conductances on ({u}, {v})")
            seen[(i, j)] = c
            continue
        seen[(i, j)] = c
        C[i, j] = C[j, i] = c
    kappa = np.zeros(n)
    for v, k in killing.items():
        if v not in idx:
            raise ValidationError(f"killing given for unknown node {v!r}")
        k = float(k)
        if not math.isfinite(k) or k < 0:
            raise ValidationError(f"invalid killing weight {k} at {v}")
        kappa[idx[v]] = k
    return GraphModel(nodes, C, kappa)


_ALLOWED_KEYS = {"format_version", "nodes", "edges", "killing"}


def graph_from_dict(d: Mapping) -> GraphModel:
    if not isinstance(d, Mapping):
        raise ValidationError("graph document must be a JSON object")
    unknown = set(d) - _ALLOWED_KEYS
    if unknown:
        raise ValidationError(f"unknown keys in graph document: {sorted(unknown)}")
    if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ValidationError(f"unsupported format_version {d['format_version']!r}")
    for key in ("nodes", "edges", "killing"):
        if key not in d:
            raise ValidationError(f"graph document is missing {key!r}")
    if not isinstance(d["nodes"], list) or not all(isinstance(v, str) for v in d["nodes"]):
        raise ValidationError("'nodes' must be a list of strings")
    if not isinstance(d["killing"], Mapping):
        raise ValidationError("'killing' must be an object")
    edges = []
    for e in d["edges"]:
        if not isinstance(e, Mapping) or set(e) != {"u", "v", "c"}:
            raise ValidationError(f"edge entries need exactly keys u, v, c: {e!r}")
        edges.append(e)
    return build_graph(d["nodes"], edges, d["killing"])


def graph_to_json(g: GraphModel) -> str:
    return json.dumps(g.to_dict(), indent=1)


def energy_form(g: GraphModel, f, h=None) -> float:
    """e(f, h) = 1/2 sum C_xy (f_x - f_y)(h_x - h_y) + sum kappa_x f_x h_x."""
    f = np.asarray(f, dtype=float)
    h = f if h is None else np.asarray(h, dtype=float)
    if f.shape != (g.n,) or h.shape != (g.n,):
        raise DimensionMismatch(f"vectors must have length {g.n}")
    df = f[:, None] - f[None, :]
    dh = h[:, None] - h[None, :]
    return float(0.5 * np.sum(g.C * df * dh) + np.dot(g.kappa * f, h))


def restrict_killed(g: GraphModel, D: Iterable) -> GraphModel:
    """Chain killed on leaving D: keeps C on D x D and lambda on D."""
    idx = _subset(g, D)
    if len(idx) == 0:
        raise ValidationError("D must be nonempty")
    C = g.C[np.ix_(idx, idx)]
    kappa = g.lam[idx] - C.sum(axis=1)
    kappa = np.where(np.abs(kappa) <= _KILL_TOL * g.lam[idx], 0.0, kappa)
    try:
        return GraphModel(tuple(g.nodes[i] for i in idx), C, kappa)
    except ValidationError as exc:
        raise ValidationError(f"restriction to D is invalid: {exc}") from None


def add_killing(g: GraphModel, chi) -> GraphModel:
    chi = _measure(g, chi)
    return GraphModel(g.nodes, g.C, g.kappa + chi)


def h_transform(g: GraphModel, h) -> GraphModel:
    """Model with C'_xy = h_x h_y C_xy and killing h_x ((M_lambda - C) h)_x.

    Requires h > 0 and (M_lambda - C) h >= 0, otherwise the new killing
    would be negative.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (g.n,):
        raise DimensionMismatch(f"h must have length {g.n}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ValidationError("h must be finite and strictly positive")
    Lh = g.operator @ h
    scale = g.lam * h
    if np.any(Lh < -_KILL_TOL * scale):
        raise ValidationError("h is not excessive: (P - I) h has a positive entry")
    Lh = np.where(Lh < 0, 0.0, Lh)
    return GraphModel(g.nodes, g.C * np.outer(h, h), h * Lh)


def _subset(g: GraphModel, S: Iterable) -> np.ndarray:
    idx = sorted(set(int(i) for i in g.indices(S)))
    return np.array(idx, dtype=np.int64)


def _measure(g: GraphModel, chi) -> np.ndarray:
    if isinstance(chi, Mapping):
        v = np.zeros(g.n)
        for k, val in chi.items():
            v[g.index(k)] = val
        chi = v
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (g.n,):
        raise DimensionMismatch(f"measure must have length {g.n}")
    if not np.all(np.isfinite(chi)):
        raise ValidationError("measure must be finite")
    if np.any(chi < 0):
        raise ValidationError("measure must be nonnegative")
    return chi


# --- fixtures ---------------------------------------------------------------

def fixture(name: str) -> GraphModel:
    """Shipped fixture by name: G2, P3, T3, or PN<N> such as PN64."""
    try:
        text = resources.files("loopsoup.fixtures").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        if name.startswith("PN") and name[2:].isdigit():
            return path_graph(int(name[2:]))
        raise ValidationError(f"no fixture named {name!r}") from None
    return graph_from_dict(json.loads(text))


def path_graph(N: int) -> GraphModel:
    """PN(N): path 1..N with unit conductances, killing 1 at node 1 only."""
    if N < 1:
        raise ValidationError("N must be positive")
    nodes = [str(i) for i in range(1, N + 1)]
    edges = [(nodes[i], nodes[i + 1], 1.0) for i in range(N - 1)]
    return build_graph(nodes, edges, {"1": 1.0})


def random_graph(rng: np.random.Generator, n: int, p: float = 0.5) -> GraphModel:
    """Erdos-Renyi test graph: C ~ U[0.5, 2] on edges, kappa ~ U[0, 1], some kappa > 0.

    Redraws until the edge set is connected.
    """
    while True:
        mask = np.triu(rng.random((n, n)) < p, 1)
        w = rng.uniform(0.5, 2.0, size=(n, n))
        C = np.where(mask, w, 0.0)
        C = C + C.T
        kappa = rng.uniform(0.0, 1.0, size=n)
        if not np.any(kappa > 0):
            continue
        if n > 1 and connected_components(C > 0, directed=False)[0] > 1:
            continue
        return GraphModel(tuple(f"v{i}" for i in range(n)), C, kappa)
