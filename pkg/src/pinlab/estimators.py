"""Disorder-averaged estimators built on the exact quenched engine.

Every estimator draws replica r of the disorder from seed ``seed + r``, so
runs at different h (or n) share their environments (common random numbers).
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import polymer as P
from ._parallel import pmap
from .disorder import replica_seed, sample
from .errors import NotBracketed, StencilOutOfRange

CSV_FIELDS = ("name", "h", "n", "replicas", "point", "std_error", "method", "seed")
STENCIL_DELTA = 0.05


class LowESSWarning(UserWarning):
    """Importance weights of the mu estimator are dominated by a few replicas."""


@dataclass
class EstimateRecord:
    name: str
    h: float
    n: int
    replicas: int
    point: float
    std_error: float
    method: str
    seed: int
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.std_error < 0 or not self.replicas >= 1:
            raise ValueError("need std_error >= 0 and replicas >= 1")

    def row(self):
        return tuple(getattr(self, k) for k in CSV_FIELDS)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def _method(base, t_max):
    return base if t_max is None else f"{base}|approximate(t_max={t_max})"


def _replica_job(law, spec, n, hs, r, t_max, seed):
    """All per-h quantities needed by the estimators for one environment."""
    omega = sample(spec, n, seed)
    out = {"logZ": [], "logZm": [], "cum": []}
    for h in hs:
        ws = P.build_workspace(law, omega, h, r_max=r, t_max=t_max, backward=False)
        out["logZ"].append(P.log_partition(ws))
        out["logZm"].append(P.log_partition_minus(ws))
        if r:
            out["cum"].append(P.contact_cumulants(ws, r))
    return {k: np.asarray(v) for k, v in out.items()}


def replica_table(law, spec, hs, n, replicas, seed, r=0, t_max=None):
    """Stack per-replica results: logZ and logZm are (replicas, len(hs)) arrays."""
    hs = [float(h) for h in np.atleast_1d(hs)]
    job = functools.partial(_replica_job, law, spec, int(n), hs, r, t_max)
    rows = pmap(job, [replica_seed(seed, i) for i in range(int(replicas))])
    table = {k: np.stack([row[k] for row in rows]) for k in ("logZ", "logZm")}
    if r:
        table["cum"] = np.stack([row["cum"] for row in rows])
    return table


def _mu_from_logzm(logzm, n):
    R = logzm.size
    a = -logzm
    m = a.max()
    x = np.exp(a - m)
    point = -(logsumexp(a) - np.log(R)) / n
    xbar = x.mean()
    se_log = x.std(ddof=1) / (np.sqrt(R) * xbar) if R > 1 else 0.0
    ess = x.sum() ** 2 / np.sum(x * x)
    return float(point), float(se_log / n), float(ess)


def free_energy(law, spec, h, n, replicas, seed, t_max=None):
    """(1/n) E[log Z_{n,h}] averaged over disorder replicas."""
    if replicas < 2:
        raise ValueError("free_energy needs replicas >= 2")
    return free_energy_curve(law, spec, [h], n, replicas, seed, t_max)[0]


def free_energy_curve(law, spec, h_grid, n, replicas, seed, t_max=None, table=None):
    table = table or replica_table(law, spec, h_grid, n, replicas, seed, t_max=t_max)
    recs = []
    for k, h in enumerate(np.atleast_1d(h_grid)):
        vals = table["logZ"][:, k] / n
        pt, se = _mean_se(vals)
        recs.append(EstimateRecord(
            "free_energy", float(h), int(n), int(replicas), pt, se, _method("replica-mean", t_max), int(seed),
            {"birkhoff": float(vals[0]), "normalization_error": law.normalization_error},
        ))
    return recs


def mu_hat(law, spec, h, n, replicas, seed, t_max=None):
    """-(1/n) log of the replica mean of 1/Z^-, with ESS diagnostics."""
    if replicas < 100:
        raise ValueError("mu_hat needs replicas >= 100")
    return mu_curve(law, spec, [h], n, replicas, seed, t_max)[0]


def mu_curve(law, spec, h_grid, n, replicas, seed, t_max=None, table=None):
    table = table or replica_table(law, spec, h_grid, n, replicas, seed, t_max=t_max)
    recs = []
    for k, h in enumerate(np.atleast_1d(h_grid)):
        pt, se, ess = _mu_from_logzm(table["logZm"][:, k], n)
        low = ess < 0.01 * replicas
        if low:
            warnings.warn(f"mu_hat at h={h}: ESS {ess:.1f} below 1% of {replicas}", LowESSWarning, stacklevel=2)
        recs.append(EstimateRecord(
            "mu", float(h), int(n), int(replicas), pt, se, _method("log-mean-exp", t_max), int(seed),
            {"ess": ess, "ess_fraction": ess / replicas, "low_ess": low},
        ))
    return recs


def free_energy_derivatives(law, spec, h, n, replicas, order, seed, delta=STENCIL_DELTA,
                            h_floor=None, t_max=None):
    """rho (order 1) and v (order 2) from exact cumulants; order 3 by a 5-point stencil."""
    if not 1 <= order <= 3:
        raise ValueError("order must be 1, 2 or 3")
    h = float(h)
    recs = []
    r = min(order, 2) if order < 3 else 3
    hs = [h]
    if order == 3:
        if h_floor is not None and h - 2 * delta < h_floor:
            raise StencilOutOfRange(f"h - 2 delta = {h - 2 * delta} below floor {h_floor}")
        hs = [h - 2 * delta, h - delta, h, h + delta, h + 2 * delta]
    table = replica_table(law, spec, hs, n, replicas, seed, r=r, t_max=t_max)
    mid = hs.index(h)
    cum = table["cum"][:, mid, :] / n
    names = ["rho", "v"]
    for k in range(min(order, 2)):
        pt, se = _mean_se(cum[:, k])
        diag = {}
        if k == 1:
            diag["localized"] = bool(pt > 3 * se)
        recs.append(EstimateRecord(names[k], h, int(n), int(replicas), pt, se,
                                   _method("exact-cumulant", t_max), int(seed), diag))
    if order == 3:
        f = table["logZ"] / n
        per = (f[:, 4] - 2 * f[:, 3] + 2 * f[:, 1] - f[:, 0]) / (2 * delta**3)
        pt, se = _mean_se(per)
        exact, exact_se = _mean_se(cum[:, 2])
        recs.append(EstimateRecord("third_derivative", h, int(n), int(replicas), pt, se,
                                   _method(f"stencil5(delta={delta})", t_max), int(seed),
                                   {"exact_cumulant": exact, "exact_cumulant_se": exact_se}))
    return recs


def _centering_job(law, spec, n, h, t_max, seed):
    omega = sample(spec, n, seed)
    ws = P.build_workspace(law, omega, h, r_max=0, t_max=t_max)
    marg = P.contact_marginal(ws)
    half = n // 2
    ws_half = P.build_workspace(law, omega.values[:half], h, r_max=0, t_max=t_max)
    lo, hi = n // 4, (3 * n) // 4
    return np.array([marg.sum(), P.contact_marginal(ws_half).sum(), marg[lo - 1:hi].mean()])


def centering_statistics(law, spec, h, n, replicas, seed, t_max=None):
    """Per-replica E_{n,h,omega}[L_n]: mean/n estimates rho, variance/n estimates w.

    rho is also estimated from the replica-averaged bulk density (sites n/4
    to 3n/4), and |E[E_omega L_m] - rho m| is reported at m = n/2 and m = n.
    """
    if replicas < 200:
        raise ValueError("centering_statistics needs replicas >= 200")
    n = int(n)
    job = functools.partial(_centering_job, law, spec, n, float(h), t_max)
    rows = np.stack(pmap(job, [replica_seed(seed, i) for i in range(int(replicas))]))
    EL, EL_half, bulk = rows[:, 0], rows[:, 1], rows[:, 2]
    rho_pt, rho_se = _mean_se(EL / n)
    rho_bulk = float(bulk.mean())
    dev = EL - EL.mean()
    w_pt = float(np.mean(dev**2) * replicas / (replicas - 1) / n)
    w_se = float(np.std(dev**2, ddof=1) / np.sqrt(replicas) / n)
    offsets = {n // 2: float(abs(EL_half.mean() - rho_bulk * (n // 2))), n: float(abs(EL.mean() - rho_bulk * n))}
    method = _method("exact-first-moment", t_max)
    rho_rec = EstimateRecord("rho_n", float(h), n, int(replicas), rho_pt, rho_se, method, int(seed),
                             {"rho_bulk": rho_bulk, "offsets": offsets})
    w_rec = EstimateRecord("w", float(h), n, int(replicas), w_pt, w_se, method, int(seed),
                           {"per_replica_mean_contacts": EL})
    return rho_rec, w_rec


@dataclass
class ScanResult:
    h_c: float
    bracket: tuple
    f_records: list
    mu_records: list
    annealed_bound_ok: bool


def critical_point_scan(law, spec, h_grid, n, replicas, seed, t_max=None):
    """Smallest grid h where both f and mu are positive at three standard errors."""
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size < 5 or np.any(np.diff(h_grid) <= 0):
        raise ValueError("h_grid must be sorted and have at least 5 points")
    table = replica_table(law, spec, h_grid, n, replicas, seed, t_max=t_max)
    f = free_energy_curve(law, spec, h_grid, n, replicas, seed, t_max, table)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowESSWarning)
        mu = mu_curve(law, spec, h_grid, n, replicas, seed, t_max, table)

    def positive(rec):
        return rec.point > 3 * rec.std_error and rec.point > 0

    if positive(f[0]):
        raise NotBracketed(f"f is already positive at h={h_grid[0]}")
    idx = next((k for k in range(h_grid.size) if positive(f[k]) and positive(mu[k])), None)
    if idx is None:
        h_c, bracket = float("inf"), (float(h_grid[-1]), float("inf"))
    else:
        h_c, bracket = float(h_grid[idx]), (float(h_grid[idx - 1]), float(h_grid[idx]))
    step = float(np.max(np.diff(h_grid)))
    return ScanResult(h_c, bracket, f, mu, bool(h_c <= step))
