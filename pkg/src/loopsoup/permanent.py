"""alpha-permanents, Laguerre/Hermite families, renormalized powers, negative-binomial laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from .errors import ResourceLimit, ValidationError
from .green import PotentialBundle

PERMANENT_LIMIT = 10


@njit(cache=True)
def _cycle_coefficients(A):
    """coef[m] = sum over permutations with m cycles of prod A[i, s(i)]; second row: no fixed points.

    Heap's algorithm over all k! permutations.
    """
    k = A.shape[0]
    out = np.zeros((2, k + 1))
    perm = np.arange(k)
    c = np.zeros(k, np.int64)
    seen = np.zeros(k, np.bool_)
    i = 0
    while True:
        prod = 1.0
        fixed = False
        for j in range(k):
            prod *= A[j, perm[j]]
            if perm[j] == j:
                fixed = True
        if prod != 0.0:
            seen[:] = False
            m = 0
            for j in range(k):
                if not seen[j]:
                    m += 1
                    t = j
                    while not seen[t]:
                        seen[t] = True
                        t = perm[t]
            out[0, m] += prod
            if not fixed:
                out[1, m] += prod
        # next permutation (iterative Heap)
        while i < k:
            if c[i] < i:
                if i % 2 == 0:
                    perm[0], perm[i] = perm[i], perm[0]
                else:
                    perm[c[i]], perm[i] = perm[i], perm[c[i]]
                c[i] += 1
                i = 0
                break
            c[i] = 0
            i += 1
        if i >= k:
            break
    return out


def cycle_coefficients(A) -> tuple[np.ndarray, np.ndarray]:
    """Polynomial coefficients in alpha of Per_alpha(A) and of its fixed-point-free part."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("need a square matrix")
    k = A.shape[0]
    if k > PERMANENT_LIMIT:
        raise ResourceLimit(f"alpha-permanent by enumeration limited to k <= {PERMANENT_LIMIT}")
    if k == 0:
        return np.array([1.0]), np.array([1.0])
    out = _cycle_coefficients(np.ascontiguousarray(A))
    return out[0], out[1]


def _poly(coef: np.ndarray, alpha: float) -> float:
    return float(np.polynomial.polynomial.polyval(alpha, coef))


def alpha_permanent(A, alpha: float) -> float:
    """sum over permutations of alpha^(number of cycles) prod A[i, s(i)]."""
    return _poly(cycle_coefficients(A)[0], alpha)


def alpha_permanent_nofix(A, alpha: float) -> float:
    return _poly(cycle_coefficients(A)[1], alpha)


# --- orthogonal polynomials --------------------------------------------------

def laguerre_eval(k: int, a: float, u: float):
    """Generalized Laguerre L_k^(a)(u) by the three-term recurrence (u may be an array)."""
    if k < 0:
        raise ValidationError("degree must be nonnegative")
    u = np.asarray(u, dtype=float)
    prev, cur = np.ones_like(u), 1.0 + a - u
    if k == 0:
        return prev if prev.ndim else float(prev)
    for n in range(1, k):
        prev, cur = cur, ((2 * n + 1 + a - u) * cur - (n + a) * prev) / (n + 1)
    return cur if cur.ndim else float(cur)


def p_poly(k: int, alpha: float, sigma: float, x):
    """P_k^{alpha,sigma}(x) = (-sigma)^k L_k^(alpha-1)(x / sigma)."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    return (-sigma) ** k * laguerre_eval(k, alpha - 1.0, np.asarray(x, dtype=float) / sigma)


def qk_poly(k: int, alpha: float, sigma: float, u):
    """Q_k^{alpha,sigma}(u) = P_k(u + alpha sigma), by n Q_n = (u - 2 sigma (n-1)) Q_{n-1} - sigma^2 (alpha+n-2) Q_{n-2}."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    if k < 0:
        raise ValidationError("degree must be nonnegative")
    u = np.asarray(u, dtype=float)
    prev, cur = np.ones_like(u), u.copy()
    if k == 0:
        return prev if prev.ndim else float(prev)
    for n in range(2, k + 1):
        prev, cur = cur, ((u - 2 * sigma * (n - 1)) * cur - sigma**2 * (alpha + n - 2) * prev) / n
    return cur if cur.ndim else float(cur)


def hermite_eval(n: int, u):
    """Probabilists' Hermite H_n: H_{n+1} = u H_n - n H_{n-1}."""
    if n < 0:
        raise ValidationError("degree must be nonnegative")
    u = np.asarray(u, dtype=float)
    prev, cur = np.ones_like(u), u.copy()
    if n == 0:
        return prev if prev.ndim else float(prev)
    for m in range(1, n):
        prev, cur = cur, u * cur - m * prev
    return cur if cur.ndim else float(cur)


def renormalized_power_field(b: PotentialBundle, Ltilde, k: int, alpha: float):
    """Q_k^{alpha, G^xx}(L~^x) at every node; Ltilde may carry replicas on leading axes."""
    sigma = np.diag(b.G)
    Lt = np.asarray(Ltilde, dtype=float)
    if Lt.shape[-1] != b.g.n:
        raise ValidationError("field must be indexed by nodes")
    out = np.empty_like(Lt)
    for x in range(b.g.n):
        out[..., x] = qk_poly(k, alpha, sigma[x], Lt[..., x])
    return out


# --- negative binomial --------------------------------------------------------

def negbinom_pmf(alpha: float, q: float, n):
    """P(N = n) = q^alpha (alpha)_n (1-q)^n / n!, the law with E(s^N) = (q / (1 - (1-q) s))^alpha."""
    if alpha <= 0 or not 0 < q <= 1:
        raise ValidationError("need alpha > 0 and 0 < q <= 1")
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValidationError("n must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = gammaln(alpha + n) - gammaln(alpha) - gammaln(n + 1) + alpha * np.log(q) + n * np.log1p(-q)
    out = np.exp(logp)
    if q == 1:
        out = np.where(n == 0, 1.0, 0.0)
    return out if out.ndim else float(out)


# --- moment predictions -------------------------------------------------------

@dataclass(frozen=True)
class MomentPrediction:
    points: tuple[str, ...]
    value: float
    kind: str


def moment_prediction(b: PotentialBundle, alpha: float, points: Sequence, kind: str = "full") -> MomentPrediction:
    """E(prod L^{i_j}) = Per_alpha(G sub-matrix) or, centered, Per0_alpha."""
    if kind not in ("full", "centered"):
        raise ValidationError("kind is 'full' or 'centered'")
    idx = b.g.indices(points)
    A = b.G[np.ix_(idx, idx)]
    val = alpha_permanent(A, alpha) if kind == "full" else alpha_permanent_nofix(A, alpha)
    return MomentPrediction(tuple(b.g.nodes[i] for i in idx), val, kind)


def rising(alpha: float, k: int) -> float:
    """alpha (alpha+1) ... (alpha+k-1)."""
    return float(np.prod(alpha + np.arange(k))) if k > 0 else 1.0


def orth_target(b: PotentialBundle, alpha: float, x, y, k: int, l: int) -> float:
    """E(Q_k(L~^x) Q_l(L~^y)) = delta_kl (G^xy)^{2k} (alpha)_k / k!."""
    if k != l:
        return 0.0
    i, j = b.g.index(x), b.g.index(y)
    return float(b.G[i, j] ** (2 * k) * rising(alpha, k) / math.factorial(k))


# --- exact polynomial moments of (L^x, L^y) ----------------------------------

def bivariate_moments(a: float, b: float, c: float, alpha: float, deg: int) -> np.ndarray:
    """M[i, j] = E((L^x)^i (L^y)^j), i, j <= deg, for G^xx = a, G^yy = b, G^xy = c.

    Read off E(exp(-t L^x - s L^y)) = (1 + a t + b s + (ab - c^2) t s)^-alpha.
    """
    d = a * b - c * c
    m = deg + 1
    # powers of u = a t + b s + d t s as (m, m) coefficient arrays, truncated
    u = np.zeros((m, m))
    if m > 1:
        u[1, 0], u[0, 1], u[1, 1] = a, b, d
    out = np.zeros((m, m))
    up = np.zeros((m, m))
    up[0, 0] = 1.0
    coef = 1.0
    for k in range(2 * deg + 1):
        out += coef * up
        coef *= (-alpha - k) / (k + 1)
        up = _trunc_mul(up, u, m)
    i = np.arange(m)
    fact = np.array([math.factorial(k) for k in i], dtype=float)
    sign = (-1.0) ** (i[:, None] + i[None, :])
    return out * sign * fact[:, None] * fact[None, :]


def _trunc_mul(p: np.ndarray, q: np.ndarray, m: int) -> np.ndarray:
    r = np.zeros((m, m))
    for i, j in zip(*np.nonzero(q)):
        r[i:, j:] += q[i, j] * p[: m - i, : m - j]
    return r


def qk_coefficients(k: int, alpha: float, sigma: float) -> np.ndarray:
    """Coefficients of Q_k^{alpha,sigma}(u) in increasing powers of u."""
    P = np.polynomial.Polynomial
    prev, cur = P([1.0]), P([0.0, 1.0])
    if k == 0:
        return prev.coef
    for n in range(2, k + 1):
        prev, cur = cur, ((P([-2 * sigma * (n - 1), 1.0])) * cur - sigma**2 * (alpha + n - 2) * prev) / n
    return cur.coef


def product_moments(b: PotentialBundle, alpha: float, x, y, fx, fy) -> tuple[float, float]:
    """Exact mean and variance of fx(L~^x) fy(L~^y), fx and fy given as coefficient arrays in L~."""
    i, j = b.g.index(x), b.g.index(y)
    sx, sy = float(b.G[i, i]), float(b.G[j, j])
    P = np.polynomial.Polynomial
    # shift to polynomials in L = L~ + alpha sigma
    px = P(fx)(P([-alpha * sx, 1.0]))
    py = P(fy)(P([-alpha * sy, 1.0]))
    if i == j:
        f = px * py
        deg = 2 * f.degree()
        M = bivariate_moments(sx, sx, sx, alpha, deg)[:, 0]
        mean = float(f.coef @ M[: len(f.coef)])
        f2 = (f * f).coef
        return mean, float(f2 @ M[: len(f2)] - mean**2)
    deg = 2 * max(px.degree(), py.degree())
    M = bivariate_moments(sx, sy, float(b.G[i, j]), alpha, deg)
    cx, cy = px.coef, py.coef
    mean = float(cx @ M[: len(cx), : len(cy)] @ cy)
    cx2, cy2 = (px * px).coef, (py * py).coef
    return mean, float(cx2 @ M[: len(cx2), : len(cy2)] @ cy2 - mean**2)
