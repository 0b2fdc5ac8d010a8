"""Green functions, hitting kernels, traces and determinant identities."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from .errors import SingularMatrix, ValidationError
from .graph import Current, GraphModel, _measure, _subset


def lu_logdet(A: np.ndarray) -> tuple[complex | float, float]:
    """(phase, log|det A|) from a partial-pivoting LU factorization."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return 1.0, 0.0
    lu, piv = sla.lu_factor(A, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        raise SingularMatrix("matrix is singular")
    swaps = np.count_nonzero(piv != np.arange(len(piv)))
    phase = (-1.0) ** swaps * np.prod(d / np.abs(d))
    if not np.iscomplexobj(A):
        phase = float(np.sign(phase.real))
    return phase, float(np.sum(np.log(np.abs(d))))


def logdet_spd(A: np.ndarray) -> float:
    """log det of a positive definite matrix; raises if it is not."""
    phase, la = lu_logdet(A)
    if np.iscomplexobj(A):
        if abs(phase - 1) > 1e-8:
            raise SingularMatrix("matrix is not positive definite")
    elif phase <= 0:
        raise SingularMatrix("matrix is not positive definite")
    return la


def _inverse(A: np.ndarray) -> np.ndarray:
    if A.shape[0] == 0:
        return np.zeros((0, 0), dtype=A.dtype)
    try:
        lu = sla.lu_factor(A)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularMatrix(str(exc)) from None
    if np.any(np.diag(lu[0]) == 0):
        raise SingularMatrix("matrix is singular")
    return sla.lu_solve(lu, np.eye(A.shape[0], dtype=A.dtype))


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


@dataclass(frozen=True, eq=False)
class PotentialBundle:
    """Exact side of a model: G = (M_lambda - C)^-1, V = (I - P)^-1, Z_e = det G."""

    g: GraphModel

    @cached_property
    def G(self) -> np.ndarray:
        G = _symmetrize(_inverse(np.asarray(self.g.operator)))
        G.setflags(write=False)
        return G

    @cached_property
    def V(self) -> np.ndarray:
        V = self.G * self.g.lam[None, :]
        V.setflags(write=False)
        return V

    @cached_property
    def log_Z(self) -> float:
        return -logdet_spd(self.g.operator)

    @property
    def Z_e(self) -> float:
        return float(np.exp(self.log_Z))

    @cached_property
    def log_det_I_minus_P(self) -> float:
        return -self.log_Z - float(np.sum(np.log(self.g.lam)))

    @property
    def detIminusP(self) -> float:
        return float(np.exp(self.log_det_I_minus_P))

    @property
    def n(self) -> int:
        return self.g.n


def potential_bundle(g: GraphModel) -> PotentialBundle:
    b = PotentialBundle(g)
    _ = b.G, b.log_Z
    return b


def as_bundle(x) -> PotentialBundle:
    return x if isinstance(x, PotentialBundle) else potential_bundle(x)


def green_chi(b: PotentialBundle, chi) -> np.ndarray:
    """G_chi = (M_lambda + M_chi - C)^-1."""
    chi = _measure(b.g, chi)
    return _symmetrize(_inverse(np.asarray(b.g.operator) + np.diag(chi)))


def _block(b: PotentialBundle, idx: np.ndarray) -> np.ndarray:
    return np.asarray(b.g.operator)[np.ix_(idx, idx)]


def restricted_green(b: PotentialBundle, D: Iterable) -> np.ndarray:
    """G^D = [(M_lambda - C)|DxD]^-1, embedded with zeros outside D x D."""
    idx = _subset(b.g, D)
    out = np.zeros((b.g.n, b.g.n))
    if len(idx):
        out[np.ix_(idx, idx)] = _symmetrize(_inverse(_block(b, idx)))
    return out


def log_det_restricted(b: PotentialBundle, D: Iterable) -> float:
    """log det of G^D taken on D x D (0 for empty D)."""
    idx = _subset(b.g, D)
    return -logdet_spd(_block(b, idx)) if len(idx) else 0.0


def hitting_matrix(b: PotentialBundle, F: Iterable) -> np.ndarray:
    """H^F[x, j] = P_x(first hit of F is at F[j]); columns follow sorted F indices."""
    F_idx = _subset(b.g, F)
    if len(F_idx) == 0:
        raise ValidationError("F must be nonempty")
    n = b.g.n
    D_idx = np.setdiff1d(np.arange(n), F_idx)
    H = np.zeros((n, len(F_idx)))
    H[F_idx, np.arange(len(F_idx))] = 1.0
    if len(D_idx):
        GD = _inverse(_block(b, D_idx))
        H[D_idx, :] = GD @ b.g.C[np.ix_(D_idx, F_idx)]
    return H


def hitting_operator(b: PotentialBundle, F: Iterable) -> np.ndarray:
    """H^F as an n x n operator on functions (zero columns outside F)."""
    F_idx = _subset(b.g, F)
    H = np.zeros((b.g.n, b.g.n))
    H[:, F_idx] = hitting_matrix(b, F)
    return H


@dataclass(frozen=True, eq=False)
class TraceModel:
    base: GraphModel
    F: tuple[str, ...]
    traced: GraphModel
    p: np.ndarray  # probability of returning after an excursion into D

    @property
    def lam(self) -> np.ndarray:
        return self.traced.lam


def trace_model(b: PotentialBundle, F: Iterable) -> TraceModel:
    """Chain watched only on F.

    C^F = C_FF + C_FD G^D C_DF off the diagonal, and
    lambda^F = lambda_F - diag(C_FD G^D C_DF).
    """
    g = b.g
    F_idx = _subset(g, F)
    if len(F_idx) == 0:
        raise ValidationError("F must be nonempty")
    D_idx = np.setdiff1d(np.arange(g.n), F_idx)
    CFF = g.C[np.ix_(F_idx, F_idx)]
    if len(D_idx):
        GD = _symmetrize(_inverse(_block(b, D_idx)))
        corr = g.C[np.ix_(F_idx, D_idx)] @ GD @ g.C[np.ix_(D_idx, F_idx)]
        corr = 0.5 * (corr + corr.T)
    else:
        corr = np.zeros_like(CFF)
    lamF = g.lam[F_idx] - np.diag(corr)
    CF = CFF + corr
    np.fill_diagonal(CF, 0.0)
    CF = np.where(CF > 0, CF, 0.0)
    kappaF = lamF - CF.sum(axis=1)
    kappaF = np.where(np.abs(kappaF) <= 1e-12 * g.lam[F_idx], 0.0, kappaF)
    nodes = tuple(g.nodes[i] for i in F_idx)
    traced = GraphModel(nodes, CF, kappaF)
    p = 1.0 - lamF / g.lam[F_idx]
    p.setflags(write=False)
    return TraceModel(base=g, F=nodes, traced=traced, p=p)


def twisted_operator(b: PotentialBundle, omega: Current) -> np.ndarray:
    omega.check_support(b.g)
    return np.diag(b.g.lam).astype(complex) - b.g.C * np.exp(1j * omega.omega)


def twisted_green(b: PotentialBundle, omega: Current) -> tuple[np.ndarray, complex]:
    """(G^(omega), Z_{e,omega}) with G^(omega) = (M_lambda - C e^{i omega})^-1."""
    A = twisted_operator(b, omega)
    Gw = _symmetrize(_inverse(A))
    phase, la = lu_logdet(A)
    Z = complex(np.exp(-la) / phase)
    return Gw, Z


def log_twisted_ratio(b: PotentialBundle, omega: Current) -> complex:
    """log det(G^(omega) G^-1) = log det(M - C) - log det(M - C e^{i omega})."""
    A = twisted_operator(b, omega)
    phase, la = lu_logdet(A)
    return complex(-b.log_Z - la, -np.angle(phase))


def matrix_csv(g: GraphModel, M: np.ndarray, labels_cols: Iterable[str] | None = None) -> str:
    """CSV with node-name headers and 17 significant digits."""
    cols = list(g.nodes) if labels_cols is None else list(labels_cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + cols)
    for name, row in zip(g.nodes, np.asarray(M)):
        w.writerow([name] + [format(float(v), ".17g") for v in row])
    return buf.getvalue()


def read_matrix_csv(text: str) -> tuple[list[str], list[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    cols = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return names, cols, M
