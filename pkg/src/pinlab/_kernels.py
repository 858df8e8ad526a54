"""Compiled inner loops for the pinning recursions.

Conventions shared by every kernel: ``lp[t]`` is log p(t) with ``lp[0] = -inf``
and ``w[j] = h + omega_j`` for j = 1..n (``w[0]`` is unused).  Arrays are
indexed by site, so F[0] corresponds to the fixed contact at the origin.
"""

import numpy as np
from numba import njit

_NEG_INF = -np.inf


@njit(cache=True)
def forward(lp, w, n, t_max):
    """F[j] = w[j] + logsumexp_{j - t_max <= i < j}(F[i] + lp[j - i])."""
    F = np.empty(n + 1)
    F[0] = 0.0
    for j in range(1, n + 1):
        lo = max(0, j - t_max)
        m = _NEG_INF
        for i in range(lo, j):
            v = F[i] + lp[j - i]
            if v > m:
                m = v
        s = 0.0
        for i in range(lo, j):
            s += np.exp(F[i] + lp[j - i] - m)
        F[j] = w[j] + m + np.log(s)
    return F


@njit(cache=True)
def backward(lp, w, n, t_max):
    """B[i] = logsumexp_{i < j <= min(n, i + t_max)}(lp[j - i] + w[j] + B[j])."""
    B = np.empty(n + 1)
    B[n] = 0.0
    for i in range(n - 1, -1, -1):
        hi = min(n, i + t_max)
        m = _NEG_INF
        for j in range(i + 1, hi + 1):
            v = lp[j - i] + w[j] + B[j]
            if v > m:
                m = v
        s = 0.0
        for j in range(i + 1, hi + 1):
            s += np.exp(lp[j - i] + w[j] + B[j] - m)
        B[i] = m + np.log(s)
    return B


@njit(cache=True)
def forward_batch(lp, W, n):
    """Row-wise ``forward`` for a (replicas, n + 1) array of site weights; returns F[n] per row."""
    R = W.shape[0]
    out = np.empty(R)
    F = np.empty(n + 1)
    for r in range(R):
        F[0] = 0.0
        for j in range(1, n + 1):
            m = _NEG_INF
            for i in range(j):
                v = F[i] + lp[j - i]
                if v > m:
                    m = v
            s = 0.0
            for i in range(j):
                s += np.exp(F[i] + lp[j - i] - m)
            F[j] = W[r, j] + m + np.log(s)
        out[r] = F[n]
    return out


@njit(cache=True)
def shifted_moments(lp, w, F, n, r_max, rho, t_max):
    """Moments of D_j = L_j - rho * j under the system pinned at j.

    R[m, j] = E_j[D_j^m] for m = 0..r_max.  Because D_j = D_i + (1 - rho (j - i))
    when i is the contact preceding j, the moments obey a binomial recursion
    whose transition weights are the exact backward-step probabilities.  The
    second return value is max_j |sum_i pi_j(i) - 1|.
    """
    R = np.zeros((r_max + 1, n + 1))
    R[0, 0] = 1.0
    binom = np.zeros((r_max + 1, r_max + 1))
    for m in range(r_max + 1):
        binom[m, 0] = 1.0
        for q in range(1, m + 1):
            binom[m, q] = binom[m - 1, q - 1] + (binom[m - 1, q] if q <= m - 1 else 0.0)
    leak = 0.0
    dpow = np.empty(r_max + 1)
    acc = np.empty(r_max + 1)
    for j in range(1, n + 1):
        lo = max(0, j - t_max)
        acc[:] = 0.0
        tot = 0.0
        for i in range(lo, j):
            pi = np.exp(F[i] + lp[j - i] + w[j] - F[j])
            if pi == 0.0:
                continue
            tot += pi
            d = 1.0 - rho * (j - i)
            dpow[0] = 1.0
            for k in range(1, r_max + 1):
                dpow[k] = dpow[k - 1] * d
            for m in range(r_max + 1):
                s = 0.0
                for q in range(m + 1):
                    s += binom[m, q] * dpow[m - q] * R[q, i]
                acc[m] += pi * s
        for m in range(r_max + 1):
            R[m, j] = acc[m]
        if abs(tot - 1.0) > leak:
            leak = abs(tot - 1.0)
    return R, leak


@njit(cache=True)
def step_normalization(lp, w, F, n, t_max):
    """max_j |sum_i exp(F[i] + lp[j-i] + w[j] - F[j]) - 1|."""
    leak = 0.0
    for j in range(1, n + 1):
        tot = 0.0
        for i in range(max(0, j - t_max), j):
            tot += np.exp(F[i] + lp[j - i] + w[j] - F[j])
        if abs(tot - 1.0) > leak:
            leak = abs(tot - 1.0)
    return leak


@njit(cache=True)
def sample_paths(lp, w, F, n, t_max, U, want_marks):
    """Backward sampling of ``U.shape[0]`` paths from the pinned Gibbs law.

    Row k of ``U`` holds the uniforms of path k (one per contact, at most n).
    The predecessor of j is found by inverse CDF scanning i = j-1, j-2, ...,
    nearest first, so the expected scan length is the mean gap.
    Returns L, M, marks (marks is (paths, n+1) when requested) and a flag that
    is set if some scan ran out of mass before reaching its uniform.
    """
    P = U.shape[0]
    L = np.zeros(P, dtype=np.int64)
    M = np.zeros(P, dtype=np.int64)
    if want_marks:
        marks = np.zeros((P, n + 1), dtype=np.bool_)
    else:
        marks = np.zeros((0, 0), dtype=np.bool_)
    leak = False
    for k in range(P):
        j = n
        c = 0
        big = 0
        while j > 0:
            if want_marks:
                marks[k, j] = True
            u = U[k, c]
            c += 1
            cum = 0.0
            lo = max(0, j - t_max)
            pick = lo
            found = False
            for i in range(j - 1, lo - 1, -1):
                cum += np.exp(F[i] + lp[j - i] + w[j] - F[j])
                if cum >= u:
                    pick = i
                    found = True
                    break
            if not found and cum < 1.0 - 1e-6:
                leak = True
            gap = j - pick
            if gap > big:
                big = gap
            j = pick
        L[k] = c
        M[k] = big
    return L, M, marks, leak


@njit(cache=True)
def sample_one(lp, w, F, n, t_max, U):
    """Single path; returns the renewal points in decreasing order and a leak flag."""
    pts = np.empty(n, dtype=np.int64)
    j = n
    c = 0
    leak = False
    while j > 0:
        pts[c] = j
        u = U[c]
        c += 1
        cum = 0.0
        lo = max(0, j - t_max)
        pick = lo
        found = False
        for i in range(j - 1, lo - 1, -1):
            cum += np.exp(F[i] + lp[j - i] + w[j] - F[j])
            if cum >= u:
                pick = i
                found = True
                break
        if not found and cum < 1.0 - 1e-6:
            leak = True
        j = pick
    return pts[:c], leak


# ---- double-double arithmetic -------------------------------------------
# A value is carried as an unevaluated sum hi + lo with |lo| <= ulp(hi) / 2.

@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _split(a):
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e += al + bl
    return _two_sum(s, e)


@njit(cache=True, inline="always")
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _two_sum(p, e)


@njit(cache=True, inline="always")
def _dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _dd_mul(q1, 0.0, bh, bl)
    rh, rl = _dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = _dd_mul(q2, 0.0, bh, bl)
    rh, rl = _dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    sh, sl = _two_sum(q1, q2)
    return _dd_add(sh, sl, q3, 0.0)


@njit(cache=True)
def _dd_forward(q, e, n, start):
    """Y[j] = e[j] sum_{start <= i < j} Y[i] q[j - i], Y[start] = 1, in double-double."""
    yh = np.zeros(n + 1)
    yl = np.zeros(n + 1)
    yh[start] = 1.0
    for j in range(start + 1, n + 1):
        sh = 0.0
        sl = 0.0
        for i in range(start, j):
            ph, pl = _dd_mul(yh[i], yl[i], q[j - i], 0.0)
            sh, sl = _dd_add(sh, sl, ph, pl)
        yh[j], yl[j] = _dd_mul(sh, sl, e[j], 0.0)
    return yh, yl


@njit(cache=True)
def _dd_backward(q, e, n):
    vh = np.zeros(n + 1)
    vl = np.zeros(n + 1)
    vh[n] = 1.0
    for i in range(n - 1, -1, -1):
        sh = 0.0
        sl = 0.0
        for j in range(i + 1, n + 1):
            ph, pl = _dd_mul(q[j - i], 0.0, e[j], 0.0)
            ph, pl = _dd_mul(ph, pl, vh[j], vl[j])
            sh, sl = _dd_add(sh, sl, ph, pl)
        vh[i] = sh
        vl[i] = sl
    return vh, vl


@njit(cache=True)
def dd_covariances(q, e, n, a_list, b_list):
    """Cov(X_a, X_b) and both marginals for each (a, b) pair, without cancellation loss.

    ``q[t] = p(t) exp(-c t)`` and ``e[j] = exp(w[j])`` for a scale c close to
    the free energy, so Y_j = Z_j exp(-c j) stays in range for moderate n.
    Every sum has positive terms; only the final difference
    E[X_a X_b] - E[X_a] E[X_b] cancels, and it is formed in double-double.
    """
    yh, yl = _dd_forward(q, e, n, 0)
    vh, vl = _dd_backward(q, e, n)
    K = a_list.size
    cov = np.empty(K)
    ma = np.empty(K)
    mb = np.empty(K)
    zn_h, zn_l = yh[n], yl[n]
    z2h, z2l = _dd_mul(zn_h, zn_l, zn_h, zn_l)
    last_a = -1
    gh = np.zeros(n + 1)
    gl = np.zeros(n + 1)
    for k in range(K):
        a = a_list[k]
        b = b_list[k]
        if a != last_a:
            gh, gl = _dd_forward(q, e, n, a)
            last_a = a
        # marginals
        xa_h, xa_l = _dd_mul(yh[a], yl[a], vh[a], vl[a])
        xb_h, xb_l = _dd_mul(yh[b], yl[b], vh[b], vl[b])
        # Y_a G_a[b] V_b Y_n  versus  (Y_a V_a)(Y_b V_b)
        ph, pl = _dd_mul(yh[a], yl[a], gh[b], gl[b])
        ph, pl = _dd_mul(ph, pl, vh[b], vl[b])
        ph, pl = _dd_mul(ph, pl, zn_h, zn_l)
        qh, ql = _dd_mul(xa_h, xa_l, xb_h, xb_l)
        dh, dl = _dd_add(ph, pl, -qh, -ql)
        ch, cl = _dd_div(dh, dl, z2h, z2l)
        cov[k] = ch + cl
        r1, r2 = _dd_div(xa_h, xa_l, zn_h, zn_l)
        ma[k] = r1 + r2
        r1, r2 = _dd_div(xb_h, xb_l, zn_h, zn_l)
        mb[k] = r1 + r2
    return cov, ma, mb


@njit(cache=True)
def pair_moment_log(lp, w, F, B, n, a):
    """log E[X_a X_b] for every b in a+1..n (entries b <= a are -inf)."""
    G = np.full(n + 1, _NEG_INF)
    G[a] = 0.0
    for j in range(a + 1, n + 1):
        m = _NEG_INF
        for i in range(a, j):
            v = G[i] + lp[j - i]
            if v > m:
                m = v
        s = 0.0
        for i in range(a, j):
            s += np.exp(G[i] + lp[j - i] - m)
        G[j] = w[j] + m + np.log(s)
    out = np.full(n + 1, _NEG_INF)
    for b in range(a + 1, n + 1):
        out[b] = F[a] + G[b] + B[b] - F[n]
    return out


@njit(cache=True)
def no_common_contact(q, e, n):
    """Scaled weight of pairs of paths on [0, n] with no shared interior contact.

    With both paths pinned at 0 and n, state (t, x), x < t, means one path
    has its latest contact at t, the other at x and jumps over t.  The next
    interior contact is either the leader moving on (state (s, x)) or the
    follower landing beyond t (state (s, t)).  Inputs are scaled as in
    ``dd_covariances`` so the result is N exp(-2 c n).
    """
    if n == 1:
        return q[1] * q[1] * e[1] * e[1]
    E = np.zeros((n, n))  # E[t, x], 0 <= x < t <= n - 1
    for s in range(1, n):
        E[s, 0] = 2.0 * q[s] * e[s]
        for x in range(0, s):
            acc = 0.0
            for t in range(x + 1, s):
                acc += E[t, x] * q[s - t]
            for y in range(0, x):
                acc += E[x, y] * q[s - y]
            E[s, x] += acc * e[s]
    tot = q[n] * q[n]
    for t in range(1, n):
        for x in range(0, t):
            tot += E[t, x] * q[n - t] * q[n - x]
    return tot * e[n] * e[n]
