"""Exact quenched computations for the pinned polymer.

For fixed (law, omega, h) a PolymerWorkspace holds the log-domain forward
and backward arrays

    F[j] = log Z_j,   B[i] = log (weight of paths from a contact at i to n),

from which partition functions, marginals, pair correlations, contact-number
moments and exact path samples all follow.
"""

from __future__ import annotations

import csv
from math import comb
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels as K
from .disorder import DisorderSample
from .errors import NumericalLeak, SizeMismatch, TooLarge

LEAK_TOL = 1e-6


@dataclass
class PolymerWorkspace:
    h: float
    n: int
    log_forward: np.ndarray
    log_backward: np.ndarray
    lp: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    t_max: int = 0
    approximate: bool = False
    rho_shift: float = 0.0
    shifted_moments: np.ndarray | None = field(default=None, repr=False)
    step_leak: float | None = None

    @property
    def log_moment_forward(self):
        return self.shifted_moments

    def log_p(self, t):
        return float(self.lp[t]) if t <= self.t_max else -np.inf


def _site_weights(disorder, h):
    values = disorder.values if isinstance(disorder, DisorderSample) else np.asarray(disorder, float)
    w = np.empty(values.size + 1)
    w[0] = 0.0
    w[1:] = h + values
    return w


def build_workspace(law, disorder, h, r_max=2, t_max=None, backward=True):
    """Run the O(n^2) forward/backward recursions (O(n t_max) with a cutoff).

    With ``t_max`` set, masses beyond t_max are dropped without
    renormalization and the workspace is flagged approximate.  Pass
    ``backward=False`` when only partition functions or path samples are
    needed; marginals then become unavailable.
    """
    w = _site_weights(disorder, float(h))
    n = w.size - 1
    if n < 1 or n > law.n_max:
        raise SizeMismatch(f"disorder length {n} outside 1..{law.n_max}")
    if not 0 <= r_max <= 4:
        raise ValueError("r_max must lie in 0..4")
    approximate = t_max is not None and int(t_max) < n
    t_cut = n if not approximate else int(t_max)
    lp = np.asarray(law.log_p[: n + 1])
    F = K.forward(lp, w, n, t_cut)
    B = K.backward(lp, w, n, t_cut) if backward else None
    if not np.all(np.isfinite(F)) or (backward and not np.all(np.isfinite(B))):
        raise FloatingPointError("non-finite entry in the forward/backward arrays")
    ws = PolymerWorkspace(float(h), n, F, B, lp, w, t_cut, approximate)
    if r_max > 0:
        _fill_moments(ws, r_max)
    return ws


def _fill_moments(ws, r_max):
    # first pass locates the mean so the second pass works with centred values
    R, _ = K.shifted_moments(ws.lp, ws.w, ws.log_forward, ws.n, 1, 0.0, ws.t_max)
    rho = R[1, ws.n] / ws.n
    R, leak = K.shifted_moments(ws.lp, ws.w, ws.log_forward, ws.n, r_max, rho, ws.t_max)
    ws.rho_shift = rho
    ws.shifted_moments = R
    ws.step_leak = leak


def log_partition(ws):
    return float(ws.log_forward[ws.n])


def log_partition_minus(ws):
    return float(ws.log_forward[ws.n] - ws.w[ws.n])


def _need_backward(ws):
    if ws.log_backward is None:
        raise ValueError("workspace was built without the backward pass")


def contact_marginal(ws, i=None):
    """P(X_i = 1); all sites 1..n as an array when ``i`` is None."""
    _need_backward(ws)
    F, B = ws.log_forward, ws.log_backward
    if i is None:
        out = np.exp(F[1:] + B[1:] - F[ws.n])
        out[-1] = 1.0
        return np.minimum(out, 1.0)
    i = int(i)
    if not 1 <= i <= ws.n:
        raise IndexError(f"site {i} outside 1..{ws.n}")
    if i == ws.n:
        return 1.0
    return float(min(np.exp(F[i] + B[i] - F[ws.n]), 1.0))


def pair_moment(ws, a, b):
    """E[X_a X_b] via a forward pass restarted at a (log domain)."""
    if a > b:
        a, b = b, a
    if a == b:
        return contact_marginal(ws, a)
    _need_backward(ws)
    lm = K.pair_moment_log(ws.lp, ws.w, ws.log_forward, ws.log_backward, ws.n, int(a))
    return float(np.exp(lm[b]))


def _scaled_weights(ws):
    c = ws.log_forward[ws.n] / ws.n
    t = np.arange(ws.n + 1)
    q = np.exp(ws.lp - c * t)
    q[0] = 0.0
    if ws.approximate:
        q[ws.t_max + 1:] = 0.0
    return q, np.exp(ws.w)


def covariance_profile(ws, a, b_values):
    """Cov(X_a, X_b) together with E[X_a] and E[X_b] for each b.

    Computed in double-double arithmetic so that covariances many orders of
    magnitude below the marginals are still resolved.
    """
    b_values = np.atleast_1d(np.asarray(b_values, dtype=np.int64))
    a = int(a)
    if np.any(b_values <= a) or np.any(b_values > ws.n) or a < 1:
        raise IndexError("need 1 <= a < b <= n")
    q, e = _scaled_weights(ws)
    cov, ma, mb = K.dd_covariances(q, e, ws.n, np.full(b_values.size, a, dtype=np.int64), b_values)
    cov[b_values == ws.n] = 0.0
    return cov, ma, mb


def pair_covariance(ws, a, b):
    a, b = int(a), int(b)
    if a == b:
        m = contact_marginal(ws, a)
        return m - m * m
    if a > b:
        a, b = b, a
    if b == ws.n:
        return 0.0
    return float(covariance_profile(ws, a, [b])[0][0])


def covariance_matrix(ws):
    """Full Cov(X_a, X_b) for 1 <= a, b <= n (O(n^3); small n only)."""
    n = ws.n
    C = np.zeros((n, n))
    marg = contact_marginal(ws)
    C[np.arange(n), np.arange(n)] = marg - marg**2
    for a in range(1, n - 1):
        bs = np.arange(a + 1, n)
        cov, _, _ = covariance_profile(ws, a, bs)
        C[a - 1, bs - 1] = cov
        C[bs - 1, a - 1] = cov
    return C


def _central_from_shifted(ws, r):
    """Raw moments of L_n and its cumulants from the shifted recursion."""
    if ws.shifted_moments is None or ws.shifted_moments.shape[0] - 1 < r:
        _fill_moments(ws, max(r, 2))
    R = ws.shifted_moments[:, ws.n]
    shift = ws.rho_shift * ws.n
    raw = []
    for m in range(1, r + 1):
        raw.append(sum(comb(m, q) * shift ** (m - q) * R[q] for q in range(m + 1)))
    # cumulants are shift invariant beyond the first
    d1 = R[1]
    mu = [1.0, 0.0]
    for m in range(2, r + 1):
        mu.append(sum(comb(m, q) * (-d1) ** (m - q) * R[q] for q in range(m + 1)))
    cum = [raw[0]]
    if r >= 2:
        cum.append(mu[2])
    if r >= 3:
        cum.append(mu[3])
    if r >= 4:
        cum.append(mu[4] - 3 * mu[2] ** 2)
    return np.array(raw), np.array(cum)


def contact_moments(ws, r=2):
    """E[L_n^m] for m = 1..r."""
    return _central_from_shifted(ws, int(r))[0]


def contact_cumulants(ws, r=2):
    """Mean, variance, and third/fourth cumulants of L_n (as many as requested)."""
    return _central_from_shifted(ws, int(r))[1]


def endpoint_mass(ws):
    """P(T_1 = n) = p(n) / Z^-."""
    if ws.approximate and ws.n > ws.t_max:
        return 0.0
    return float(np.exp(ws.lp[ws.n] - log_partition_minus(ws)))


@dataclass
class PathSample:
    renewal_points: np.ndarray
    L_n: int
    M_n: int
    gaps: np.ndarray


def _check_leak(ws):
    if ws.step_leak is None:
        ws.step_leak = K.step_normalization(ws.lp, ws.w, ws.log_forward, ws.n, ws.t_max)
    if ws.step_leak > LEAK_TOL:
        raise NumericalLeak(f"step probabilities off by {ws.step_leak:.3g}")


def sample_path(ws, seed):
    """One exact draw from the pinned Gibbs law."""
    _check_leak(ws)
    rng = np.random.default_rng(int(seed))
    U = rng.random(ws.n)
    pts, leak = K.sample_one(ws.lp, ws.w, ws.log_forward, ws.n, ws.t_max, U)
    if leak:
        raise NumericalLeak("inverse-CDF scan exhausted before reaching the uniform")
    pts = np.sort(pts)
    gaps = np.diff(np.concatenate([[0], pts]))
    return PathSample(pts, int(pts.size), int(gaps.max()), gaps)


def sample_paths(ws, count, seed, marks=False, chunk=2048):
    """Draw ``count`` paths; returns L_n, M_n and (optionally) contact indicators."""
    _check_leak(ws)
    rng = np.random.default_rng(int(seed))
    Ls, Ms, Xs = [], [], []
    done = 0
    while done < count:
        m = min(chunk, count - done)
        # one uniform per potential contact; a path never has more than n
        U = rng.random((m, ws.n))
        L, M, X, leak = K.sample_paths(ws.lp, ws.w, ws.log_forward, ws.n, ws.t_max, U, marks)
        if leak:
            raise NumericalLeak("inverse-CDF scan exhausted before reaching the uniform")
        Ls.append(L)
        Ms.append(M)
        if marks:
            Xs.append(X[:, 1:])
        done += m
    out = (np.concatenate(Ls), np.concatenate(Ms))
    if marks:
        out = out + (np.concatenate(Xs),)
    return out


def dump_arrays(ws, path):
    """CSV debug dump: index, log_forward, log_backward."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "log_forward", "log_backward"])
        for i in range(ws.n + 1):
            wr.writerow([i, repr(float(ws.log_forward[i])), repr(float(ws.log_backward[i]))])


@dataclass
class BruteForceResult:
    log_Z: float
    marginals: np.ndarray
    moments: np.ndarray
    endpoint_mass: float
    pair_moments: np.ndarray


def brute_force(law, disorder, h):
    """Enumerate all 2^(n-1) contact sets; the reference oracle for small n."""
    w = _site_weights(disorder, float(h))
    n = w.size - 1
    if n > 20:
        raise TooLarge(f"brute force limited to n <= 20, got {n}")
    lp = law.log_p[: n + 1]
    codes = np.arange(2 ** (n - 1))[:, None]
    bits = ((codes >> np.arange(n - 1)) & 1).astype(bool)
    X = np.concatenate([bits, np.ones((bits.shape[0], 1), dtype=bool)], axis=1)
    sites = np.arange(1, n + 1)
    # previous contact of each site: running max of contact positions, 0 at the origin
    pos = np.where(X, sites, 0)
    prev = np.concatenate([np.zeros((X.shape[0], 1), dtype=int),
                           np.maximum.accumulate(pos, axis=1)[:, :-1]], axis=1)
    terms = np.where(X, lp[np.where(X, sites - prev, 1)] + w[1:], 0.0)
    logw = terms.sum(axis=1)
    logZ = float(logsumexp(logw))
    prob = np.exp(logw - logZ)
    Xf = X.astype(float)
    marg = prob @ Xf
    L = Xf.sum(axis=1)
    moments = np.array([prob @ L, prob @ L**2])
    pair = (Xf * prob[:, None]).T @ Xf
    return BruteForceResult(logZ, marg, moments, float(prob[0]), pair)
