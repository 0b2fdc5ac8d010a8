"""numba kernels for the samplers. Everything here works on dense indices and flat arrays.

Adjacency is CSR: ``indptr``, ``indices``; transition tables are cumulative
probabilities laid out on the same slots.
"""

import numpy as np
from numba import njit



@njit(cache=True)
def _grow_i(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_f(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _pick(rng, indptr, indices, cum, z):
    # cum holds normalized cumulative weights on the slots of z
    lo, hi = indptr[z], indptr[z + 1]
    u = rng.random()
    for s in range(lo, hi):
        if u < cum[s]:
            return indices[s]
    # round-off fallthrough: last slot with positive weight
    for s in range(hi - 1, lo - 1, -1):
        prev = cum[s - 1] if s > lo else 0.0
        if cum[s] > prev:
            return indices[s]
    return indices[hi - 1]


@njit(cache=True)
def length_batch(rng, nrep, alpha, ccum, diagcum, powers, indptr, indices, pvals, lam):
    """Loops by length: k ~ Tr(P^k)/k, base x ~ [P^k]_xx, then bridge steps."""
    nodes = np.empty(1024, np.int64)
    hold = np.empty(1024)
    offsets = np.empty(256, np.int64)
    rep = np.empty(256, np.int64)
    offsets[0] = 0
    npts = 0
    nloops = 0
    total = ccum[-1]
    kmax = ccum.shape[0] - 1
    n = lam.shape[0]
    w = np.empty(indices.shape[0])
    for r in range(nrep):
        cnt = rng.poisson(alpha * total)
        for _ in range(cnt):
            u = rng.random() * total
            k = np.searchsorted(ccum, u, side="right")
            if k > kmax:
                k = kmax
            dsum = diagcum[k, n - 1]
            u = rng.random() * dsum
            x = np.searchsorted(diagcum[k], u, side="right")
            if x >= n:
                x = n - 1
            nodes = _grow_i(nodes, npts + k)
            hold = _grow_f(hold, npts + k)
            cur = x
            nodes[npts] = x
            hold[npts] = rng.standard_exponential() / lam[x]
            for i in range(k - 1):
                rem = k - i - 1
                lo, hi = indptr[cur], indptr[cur + 1]
                tot = 0.0
                for s in range(lo, hi):
                    tot += pvals[s] * powers[rem, indices[s], x]
                    w[s] = tot
                u = rng.random() * tot
                nxt = indices[hi - 1]
                for s in range(lo, hi):
                    if u < w[s]:
                        nxt = indices[s]
                        break
                cur = nxt
                nodes[npts + i + 1] = cur
                hold[npts + i + 1] = rng.standard_exponential() / lam[cur]
            npts += k
            offsets = _grow_i(offsets, nloops + 2)
            rep = _grow_i(rep, nloops + 1)
            rep[nloops] = r
            nloops += 1
            offsets[nloops] = npts
    return nodes[:npts].copy(), hold[:npts].copy(), offsets[: nloops + 1].copy(), rep[:nloops].copy()


@njit(cache=True)
def rooted_batch(rng, nrep, alpha, roots, L, rr, qcum, indptr, indices, lam):
    """Loops grouped by their first node in a fixed order.

    Root j carries Poisson(alpha L_j) loops; each has logseries(r_j) visits to the
    root, separated by independent return excursions drawn from qcum[j].
    """
    nodes = np.empty(1024, np.int64)
    hold = np.empty(1024)
    offsets = np.empty(256, np.int64)
    rep = np.empty(256, np.int64)
    offsets[0] = 0
    npts = 0
    nloops = 0
    for r in range(nrep):
        for j in range(roots.shape[0]):
            if L[j] <= 0.0:
                continue
            x = roots[j]
            cum = qcum[j]
            cnt = rng.poisson(alpha * L[j])
            for _ in range(cnt):
                v = rng.logseries(rr[j])
                for _e in range(v):
                    nodes = _grow_i(nodes, npts + 1)
                    hold = _grow_f(hold, npts + 1)
                    nodes[npts] = x
                    hold[npts] = rng.standard_exponential() / lam[x]
                    npts += 1
                    z = _pick(rng, indptr, indices, cum, x)
                    while z != x:
                        nodes = _grow_i(nodes, npts + 1)
                        hold = _grow_f(hold, npts + 1)
                        nodes[npts] = z
                        hold[npts] = rng.standard_exponential() / lam[z]
                        npts += 1
                        z = _pick(rng, indptr, indices, cum, z)
                offsets = _grow_i(offsets, nloops + 2)
                rep = _grow_i(rep, nloops + 1)
                rep[nloops] = r
                nloops += 1
                offsets[nloops] = npts
    return nodes[:npts].copy(), hold[:npts].copy(), offsets[: nloops + 1].copy(), rep[:nloops].copy()


@njit(cache=True)
def stick_break(rng, total, alpha, eps):
    """Split each total (Gamma(alpha) sums) by GEM(alpha) stick breaking.

    Pieces > eps are returned as (row, col, size); the rest stays in the remainder.
    """
    R, n = total.shape
    rem = total.copy()
    prow = np.empty(64, np.int64)
    pcol = np.empty(64, np.int64)
    psz = np.empty(64)
    m = 0
    for i in range(R):
        for x in range(n):
            t = total[i, x]
            small = 0.0
            while t > eps:
                piece = t * rng.beta(1.0, alpha)
                t -= piece
                if piece > eps:
                    prow = _grow_i(prow, m + 1)
                    pcol = _grow_i(pcol, m + 1)
                    psz = _grow_f(psz, m + 1)
                    prow[m] = i
                    pcol[m] = x
                    psz[m] = piece
                    m += 1
                else:
                    small += piece
            rem[i, x] = small + t
    return prow[:m].copy(), pcol[:m].copy(), psz[:m].copy(), rem


@njit(cache=True)
def killed_batch(rng, starts, cumP, indptr, indices, lam):
    """Paths of the sub-stochastic chain until death; cumP is unnormalized (sum < 1 where killed)."""
    nodes = np.empty(1024, np.int64)
    hold = np.empty(1024)
    offsets = np.empty(starts.shape[0] + 1, np.int64)
    offsets[0] = 0
    npts = 0
    for i in range(starts.shape[0]):
        z = starts[i]
        while True:
            nodes = _grow_i(nodes, npts + 1)
            hold = _grow_f(hold, npts + 1)
            nodes[npts] = z
            hold[npts] = rng.standard_exponential() / lam[z]
            npts += 1
            u = rng.random()
            nxt = -1
            for s in range(indptr[z], indptr[z + 1]):
                if u < cumP[s]:
                    nxt = indices[s]
                    break
            if nxt < 0:
                break
            z = nxt
        offsets[i + 1] = npts
    return nodes[:npts].copy(), hold[:npts].copy(), offsets


@njit(cache=True)
def bridge_batch(rng, m, x, y, q, qcum, indptr, indices, lam):
    """Paths x -> y: Doob first passage, then Geometric(q) - 1 return excursions at y.

    qcum is the Doob table for target y, with y's own slots holding the
    first-step law of a return excursion.
    """
    nodes = np.empty(1024, np.int64)
    hold = np.empty(1024)
    offsets = np.empty(m + 1, np.int64)
    offsets[0] = 0
    npts = 0
    for i in range(m):
        z = x
        while z != y:
            nodes = _grow_i(nodes, npts + 1)
            hold = _grow_f(hold, npts + 1)
            nodes[npts] = z
            hold[npts] = rng.standard_exponential() / lam[z]
            npts += 1
            z = _pick(rng, indptr, indices, qcum, z)
        returns = rng.geometric(q) - 1
        for _ in range(returns):
            nodes = _grow_i(nodes, npts + 1)
            hold = _grow_f(hold, npts + 1)
            nodes[npts] = y
            hold[npts] = rng.standard_exponential() / lam[y]
            npts += 1
            z = _pick(rng, indptr, indices, qcum, y)
            while z != y:
                nodes = _grow_i(nodes, npts + 1)
                hold = _grow_f(hold, npts + 1)
                nodes[npts] = z
                hold[npts] = rng.standard_exponential() / lam[z]
                npts += 1
                z = _pick(rng, indptr, indices, qcum, z)
        nodes = _grow_i(nodes, npts + 1)
        hold = _grow_f(hold, npts + 1)
        nodes[npts] = y
        hold[npts] = rng.standard_exponential() / lam[y]
        npts += 1
        offsets[i + 1] = npts
    return nodes[:npts].copy(), hold[:npts].copy(), offsets


@njit(cache=True)
def wilson_batch(rng, runs, order, cumP, indptr, indices, lam, max_steps):
    """Wilson's algorithm with chronological loop erasure, Delta in the tree from the start.

    parent[r, x] = n stands for Delta. Erased nontrivial loops are returned flat;
    last[r, x] is the holding of the final (kept) visit to x, a one-point erased loop.
    """
    n = lam.shape[0]
    parent = np.empty((runs, n), np.int64)
    last = np.empty((runs, n))
    nodes = np.empty(1024, np.int64)
    hold = np.empty(1024)
    offsets = np.empty(256, np.int64)
    lrun = np.empty(256, np.int64)
    offsets[0] = 0
    npts = 0
    nloops = 0
    stack = np.empty(n, np.int64)
    hstack = np.empty(n)
    pos = np.empty(n, np.int64)
    intree = np.empty(n, np.bool_)
    steps = 0
    for r in range(runs):
        intree[:] = False
        pos[:] = -1
        for start in order:
            if intree[start]:
                continue
            top = 0
            stack[0] = start
            hstack[0] = rng.standard_exponential() / lam[start]
            pos[start] = 0
            while True:
                steps += 1
                if steps > max_steps:
                    return parent, last, nodes[:npts].copy(), hold[:npts].copy(), offsets[: nloops + 1].copy(), lrun[:nloops].copy(), False
                z = stack[top]
                u = rng.random()
                w = n
                for s in range(indptr[z], indptr[z + 1]):
                    if u < cumP[s]:
                        w = indices[s]
                        break
                if w == n or intree[w]:
                    for i in range(top + 1):
                        s_ = stack[i]
                        parent[r, s_] = stack[i + 1] if i < top else w
                        last[r, s_] = hstack[i]
                        intree[s_] = True
                        pos[s_] = -1
                    break
                p = pos[w]
                if p >= 0:
                    k = top - p + 1
                    nodes = _grow_i(nodes, npts + k)
                    hold = _grow_f(hold, npts + k)
                    for i in range(k):
                        nodes[npts + i] = stack[p + i]
                        hold[npts + i] = hstack[p + i]
                    npts += k
                    offsets = _grow_i(offsets, nloops + 2)
                    lrun = _grow_i(lrun, nloops + 1)
                    lrun[nloops] = r
                    nloops += 1
                    offsets[nloops] = npts
                    for i in range(p + 1, top + 1):
                        pos[stack[i]] = -1
                    top = p
                    hstack[p] = rng.standard_exponential() / lam[w]
                else:
                    top += 1
                    stack[top] = w
                    hstack[top] = rng.standard_exponential() / lam[w]
                    pos[w] = top
    return parent, last, nodes[:npts].copy(), hold[:npts].copy(), offsets[: nloops + 1].copy(), lrun[:nloops].copy(), True


@njit(cache=True)
def pattern_sums(nodes, hold, offsets, pats):
    """Per loop: sum over patterns of weighted increasing subsequences matching the pattern."""
    nl = offsets.shape[0] - 1
    npat, m = pats.shape
    out = np.zeros(nl)
    dp = np.empty(m + 1)
    for l in range(nl):
        acc = 0.0
        for j in range(npat):
            dp[:] = 0.0
            dp[0] = 1.0
            for i in range(offsets[l], offsets[l + 1]):
                v = nodes[i]
                for t in range(m, 0, -1):
                    if pats[j, t - 1] == v:
                        dp[t] += dp[t - 1] * hold[i]
            acc += dp[m]
        out[l] = acc
    return out


@njit(cache=True)
def offspring_counts(nodes, offsets, lo, hi, kcap):
    """Path-graph loops (node i = level i+1). For each up-crossing into level n,
    lo <= n <= hi, count up-crossings n -> n+1 before the next n -> n-1.

    Each loop is read cyclically from its minimum. Returns a histogram with the
    last bin pooling counts >= kcap.
    """
    hist = np.zeros(kcap + 1, np.int64)
    maxnode = 0
    for i in range(nodes.shape[0]):
        if nodes[i] > maxnode:
            maxnode = nodes[i]
    active = np.zeros(maxnode + 3, np.bool_)
    cnt = np.zeros(maxnode + 3, np.int64)
    for l in range(offsets.shape[0] - 1):
        a, b = offsets[l], offsets[l + 1]
        k = b - a
        if k < 2:
            continue
        start = a
        for i in range(a, b):
            if nodes[i] < nodes[start]:
                start = i
        for t in range(k):
            u = nodes[a + (start - a + t) % k] + 1
            v = nodes[a + (start - a + t + 1) % k] + 1
            if v == u + 1:
                if active[u]:
                    cnt[u] += 1
                active[v] = True
                cnt[v] = 0
            elif v == u - 1:
                if active[u]:
                    if lo <= u <= hi:
                        c = cnt[u]
                        hist[min(c, kcap)] += 1
                    active[u] = False
    return hist
