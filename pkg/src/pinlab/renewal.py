"""Heavy-tailed inter-arrival laws p(t) = K * l(t) / t**(1 + alpha).

Masses are kept as log-probabilities. The normalizing constant K is obtained
by direct summation up to a horizon T plus an Euler-Maclaurin estimate of the
tail beyond T.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InvalidHorizon, NoConvergence, NonSummable, OutOfRange

_CHUNK = 1 << 20


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def log_ell(self, t):
        return np.full(np.shape(t), np.log(self.c))

    def log_ell_logx(self, logx):
        return np.log(self.c) + 0.0 * logx

    def to_dict(self):
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class LogPower:
    """l(t) = c * log(1 + t)**beta."""

    c: float = 1.0
    beta: float = 0.0

    def log_ell(self, t):
        return np.log(self.c) + self.beta * np.log(np.log1p(np.asarray(t, dtype=float)))

    def log_ell_logx(self, logx):
        # log(1 + x) computed from log x without overflow
        return np.log(self.c) + self.beta * np.log(np.logaddexp(0.0, logx))

    def to_dict(self):
        return {"kind": "logpower", "c": self.c, "beta": self.beta}


def ell_from_dict(d):
    kind = str(d.get("kind", "constant")).lower()
    if kind == "constant":
        return Constant(float(d.get("c", 1.0)))
    if kind in ("logpower", "log_power", "log-power"):
        return LogPower(float(d.get("c", 1.0)), float(d.get("beta", 0.0)))
    raise ValueError(f"unknown slowly varying family {kind!r}")


@dataclass(frozen=True, eq=False)
class InterArrivalLaw:
    alpha: float
    ell: Constant | LogPower
    horizon: int
    n_max: int
    norm_constant: float
    tail_mass: float
    normalization_error: float
    log_mass_cache: np.ndarray = field(repr=False)

    @property
    def log_p(self):
        """Array indexed by t (entry 0 is -inf) for t = 0..n_max."""
        out = np.empty(self.n_max + 1)
        out[0] = -np.inf
        out[1:] = self.log_mass_cache
        return out

    def log_mass_at(self, t):
        """log p(t) from the closed form, valid for any integer t >= 1."""
        t = np.asarray(t, dtype=float)
        return np.log(self.norm_constant) + self.ell.log_ell(t) - (1.0 + self.alpha) * np.log(t)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "ell": self.ell.to_dict(),
            "horizon": self.horizon,
            "n_max": self.n_max,
        }


def _unnormalized(alpha, ell, t):
    t = np.asarray(t, dtype=float)
    return np.exp(ell.log_ell(t) - (1.0 + alpha) * np.log(t))


def _check_summable(alpha, ell):
    if alpha < 0:
        raise NonSummable(f"alpha must be non-negative, got {alpha}")
    if alpha == 0:
        if isinstance(ell, Constant) or ell.beta >= -1:
            raise NonSummable("alpha = 0 needs a LogPower slowly varying part with beta < -1")


def _tail_estimate(alpha, ell, T):
    """Sum_{t > T} l(t) / t**(1 + alpha) and an error estimate."""
    # x = T * exp(y) turns the tail integral into a smooth, decaying integrand
    logT = np.log(T)

    def integrand(y):
        logx = logT + y
        return float(np.exp(ell.log_ell_logx(logx) - alpha * logx))

    integral, abserr = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=500)
    fT = float(_unnormalized(alpha, ell, T))
    if isinstance(ell, Constant):
        dfT = -(1.0 + alpha) * fT / T
    else:
        dfT = fT * (ell.beta / ((1.0 + T) * np.log1p(T)) - (1.0 + alpha) / T)
    tail = integral - fT / 2.0 - dfT / 12.0
    # next Euler-Maclaurin term is of order f'''(T) / 720
    err = abserr + (1 + alpha) * (2 + alpha) * (3 + alpha) * fT / T**3 / 720.0
    return tail, err


def build_law(alpha, ell=None, horizon=10**7, n_max=8192):
    """Normalized law p(t) on {1, 2, ...} with a log-mass cache up to ``n_max``."""
    ell = Constant() if ell is None else ell
    return _build_law(float(alpha), ell, int(horizon), int(n_max))


@functools.lru_cache(maxsize=32)
def _build_law(alpha, ell, horizon, n_max):
    _check_summable(alpha, ell)
    if n_max < 1 or horizon < n_max:
        raise InvalidHorizon(f"need horizon >= n_max >= 1, got horizon={horizon}, n_max={n_max}")

    # sum from the small end first so the partial sums stay accurate
    partial = 0.0
    for stop in range(horizon, 0, -_CHUNK):
        start = max(1, stop - _CHUNK + 1)
        partial += float(np.sum(_unnormalized(alpha, ell, np.arange(stop, start - 1, -1))))
    tail, tail_err = _tail_estimate(alpha, ell, horizon)
    total = partial + tail
    K = 1.0 / total
    t = np.arange(1, n_max + 1, dtype=float)
    cache = np.log(K) + ell.log_ell(t) - (1.0 + alpha) * np.log(t)
    cache.setflags(write=False)
    return InterArrivalLaw(
        alpha=alpha,
        ell=ell,
        horizon=horizon,
        n_max=n_max,
        norm_constant=K,
        tail_mass=tail * K,
        normalization_error=tail_err * K,
        log_mass_cache=cache,
    )


def law_from_dict(d):
    return build_law(
        float(d["alpha"]),
        ell_from_dict(d.get("ell", {"kind": "constant", "c": 1.0})),
        int(d.get("horizon", 10**7)),
        int(d.get("n_max", 8192)),
    )


def mass(law, t):
    """log p(t) for 1 <= t <= n_max."""
    t = int(t)
    if t < 1 or t > law.n_max:
        raise OutOfRange(f"t={t} outside 1..{law.n_max}")
    return float(law.log_mass_cache[t - 1])


def xi_bound(law, t_max, rtol=1e-12):
    """Smallest xi >= 1 with p(s+t) <= xi min(s,t)**xi p(s)p(t) and p(t) >= (1+t)**-xi.

    Both constraints are scanned exhaustively over 1 <= s, t <= t_max.
    """
    t_max = int(t_max)
    if t_max < 1 or t_max > law.n_max:
        raise OutOfRange(f"t_max={t_max} outside 1..{law.n_max}")
    t = np.arange(1, t_max + 1)
    lp = law.log_mass_at(t)
    lp_sum = law.log_mass_at(np.arange(2, 2 * t_max + 1))
    S, T = np.meshgrid(t, t, indexing="ij")
    lhs = lp_sum[S + T - 2]
    rhs_base = lp[S - 1] + lp[T - 1]
    log_min = np.log(np.minimum(S, T))
    log1t = np.log1p(t)

    def ok(xi):
        pair = np.all(lhs <= np.log(xi) + xi * log_min + rhs_base)
        lower = np.all(lp >= -xi * log1t)
        return bool(pair and lower)

    if ok(1.0):
        return 1.0
    lo, hi = 1.0, 2.0
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _laplace_sum(law, b, lp_cache):
    """Sum_t p(t) exp(-b t), summed far enough that the remainder is < 1e-18."""
    t_need = law.horizon if b <= 0 else min(law.horizon, int(np.ceil(42.0 / b)) + 1)
    if t_need > lp_cache[0].size:
        t = np.arange(1, t_need + 1, dtype=float)
        lp_cache[0] = law.log_mass_at(t)
    lp = lp_cache[0][:t_need]
    t = np.arange(1, t_need + 1, dtype=float)
    s = float(np.sum(np.exp(lp - b * t)[::-1]))
    if t_need == law.horizon:
        s += law.tail_mass * np.exp(-b * law.horizon)
    return s, t_need


def pure_free_energy(law, h, tol=1e-12):
    """Free energy of the homogeneous model: root b of sum_t p(t) e^{-bt} = e^{-h}."""
    h = float(h)
    if h <= 0:
        return 0.0
    target = np.exp(-h)
    lp_cache = [np.empty(0)]
    lo, hi = 0.0, h  # sum p e^{-bt} <= e^{-b}, so b = h is always an upper bracket
    if 42.0 / hi > law.horizon:
        raise NoConvergence("horizon too small to resolve the root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s, t_need = _laplace_sum(law, mid, lp_cache)
        if s > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(hi, 1e-300):
            break
    b = 0.5 * (lo + hi)
    s, t_need = _laplace_sum(law, b, lp_cache)
    if t_need >= law.horizon and b < 42.0 / law.horizon:
        raise NoConvergence(f"root b={b:.3g} not resolvable within horizon {law.horizon}")
    if abs(s - target) > tol:
        raise NoConvergence(f"residual {abs(s - target):.3g} above {tol}")
    return b
