"""Desk-scale falsifiable checks of the localized-phase statements.

Each check returns a CheckReport with the measured statistic, the threshold
it is compared to, the direction of the comparison and per-row details.
Statistical thresholds live in THRESHOLDS and nowhere else.
"""

from __future__ import annotations

import functools
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import _kernels as K
from . import polymer as P
from ._parallel import pmap
from .disorder import (IID, gamma_bar_n, replica_seed, sample, sample_batch, spectral_bounds,
                       toeplitz_matrix, truncate)
from .errors import DegenerateVariance, NotInvertible
from .estimators import (LowESSWarning, _mu_from_logzm, centering_statistics, free_energy_derivatives,
                         mu_hat, replica_table)

THRESHOLDS = {
    "se_strict": 3.0,      # k in "within k standard errors" for sign and ordering claims
    "se_loose": 4.0,       # k for Monte Carlo inequality checks
    "ks_max": 0.05,
    "r2_min": 0.9,
    "gap_band": (0.6, 1.67),
    "slope_factor": 2.0,
    "tail_eps": 0.5,
    "ess_report_fraction": 0.01,
}


@dataclass
class CheckReport:
    check_name: str
    params: dict
    statistic: float
    threshold: float
    passed: bool
    direction: str = "<="
    rows: list = field(default_factory=list)
    notes: str = ""

    def to_json(self):
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    return x


def _fit(x, y):
    res = stats.linregress(np.asarray(x, float), np.asarray(y, float))
    return float(res.slope), float(res.rvalue**2)


def _log_mean_exp(a):
    """log of the mean of exp(a) and its delta-method standard error."""
    a = np.asarray(a, float)
    m = a.max()
    x = np.exp(a - m)
    se = x.std(ddof=1) / (np.sqrt(a.size) * x.mean())
    return float(logsumexp(a) - np.log(a.size)), float(se)


def batch_log_partition(law, values, h):
    """log Z for each row of a (replicas, n) disorder array."""
    values = np.atleast_2d(values)
    n = values.shape[1]
    W = np.empty((values.shape[0], n + 1))
    W[:, 0] = 0.0
    W[:, 1:] = h + values
    return K.forward_batch(np.asarray(law.log_p[: n + 1]), W, n)


def _batched_log_inv_zminus(law, spec, n, h, replicas, seed, chunk=100_000):
    out = np.empty(replicas)
    for k, start in enumerate(range(0, replicas, chunk)):
        m = min(chunk, replicas - start)
        vals = sample_batch(spec, n, m, replica_seed(seed, k))
        out[start:start + m] = -(batch_log_partition(law, vals, h) - (h + vals[:, -1]))
    return out


# ---------------------------------------------------------------- comparison


def check_comparison_lemma(law, h, n, spec, r, replicas=10**6, seed=0):
    """|log E[1/Z^-] - log E'[1/Z^-]| against sum_ij |Gamma - Gamma'|."""
    if n > 12:
        raise ValueError("comparison check limited to n <= 12")
    trunc = truncate(spec, r)
    G, Gt = toeplitz_matrix(spec, n), toeplitz_matrix(trunc, n)
    bound = float(np.abs(G - Gt).sum())
    k = np.arange(n)
    toeplitz_bound = float(2 * n * np.abs(spec.gammas(k) - trunc.gammas(k)).sum())
    a = _batched_log_inv_zminus(law, spec, n, h, replicas, seed)
    b = _batched_log_inv_zminus(law, trunc, n, h, replicas, seed + 7919)
    la, sa = _log_mean_exp(a)
    lb, sb = _log_mean_exp(b)
    diff = abs(la - lb)
    se = float(np.hypot(sa, sb))
    thr = bound + THRESHOLDS["se_loose"] * se
    per_site = 2 * float(np.abs(spec.gammas(k) - trunc.gammas(k)).sum())
    rows = [
        {"quantity": "log E[1/Z-] original", "value": la, "se": sa},
        {"quantity": "log E[1/Z-] truncated", "value": lb, "se": sb},
        {"quantity": "sum |Gamma - Gamma'|", "value": bound},
        {"quantity": "2n sum |gamma - gamma'|", "value": toeplitz_bound},
        {"quantity": "per-site difference", "value": diff / n, "bound": per_site,
         "passed": bool(diff / n <= per_site + THRESHOLDS["se_loose"] * se / n)},
        {"quantity": "slack", "value": bound - diff},
    ]
    params = {"law": law.to_dict(), "h": h, "n": n, "spec": spec.to_dict(), "r": r,
              "replicas": replicas, "seed": seed}
    return CheckReport("comparison_lemma", params, diff, thr, bool(diff <= thr), "<=", rows)


# ---------------------------------------------------------------- endpoint


def _endpoint_job(law, spec, n_list, h, seed):
    nmax = max(n_list)
    omega = sample(spec, nmax, seed)
    out = []
    for n in n_list:
        ws = P.build_workspace(law, omega.values[:n], h, r_max=0, backward=False)
        out.append(P.log_partition_minus(ws))
    return np.array(out)


def check_endpoint_decay(law, spec, h, n_list, replicas, seed=0, mu_n=None, mu_replicas=None):
    """Mean endpoint mass p(n) E[1/Z^-] against exponential decay in n."""
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 4:
        raise ValueError("need at least 4 sizes")
    job = functools.partial(_endpoint_job, law, spec, n_list, float(h))
    logzm = np.stack(pmap(job, [replica_seed(seed, i) for i in range(replicas)]))
    log_mean = []
    rows = []
    for k, n in enumerate(n_list):
        lm, se = _log_mean_exp(law.log_p[n] - logzm[:, k])
        log_mean.append(lm)
        rows.append({"n": n, "log_mean_endpoint_mass": lm, "se": se})
    slope, r2 = _fit(n_list, log_mean)
    poly_slope, poly_r2 = _fit(np.log(n_list), log_mean)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowESSWarning)
        mu = mu_hat(law, spec, h, mu_n or n_list[-1], max(100, mu_replicas or replicas), seed)
    ratio = -slope / mu.point if mu.point > 0 else float("inf")
    f = THRESHOLDS["slope_factor"]
    exponential = slope < 0 and r2 >= THRESHOLDS["r2_min"] and r2 >= poly_r2
    passed = exponential and 1 / f <= ratio <= f
    rows.append({"fit": "exponential", "slope": slope, "r2": r2})
    rows.append({"fit": "power", "slope": poly_slope, "r2": poly_r2})
    rows.append({"mu_hat": mu.point, "mu_se": mu.std_error, "ess": mu.diagnostics["ess"],
                 "slope_over_mu": ratio})
    notes = "exponential fit accepted" if exponential else "exponential fit rejected"
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n_list": n_list,
              "replicas": replicas, "seed": seed}
    return CheckReport("endpoint_decay", params, slope, 0.0, bool(passed), "<", rows, notes)


# ---------------------------------------------------------------- Gibbs decay


def _gibbs_job(law, spec, n, h, lags, seed):
    omega = sample(spec, n, seed)
    ws = P.build_workspace(law, omega, h, r_max=0, backward=False)
    a = n // 2
    cov, ma, mb = P.covariance_profile(ws, a, a + np.asarray(lags))
    return np.abs(cov) / np.minimum(ma, mb), P.log_partition(ws) / n


def check_gibbs_decay(law, spec, h, n, replicas, seed=0, lags=tuple(range(2, 41, 2))):
    """Replica-averaged |Cov(X_a, X_b)| / min(E X_a, E X_b) against exp(-eps (b - a))."""
    lags = np.asarray(lags)
    if n // 2 + lags.max() > n:
        raise ValueError("largest lag runs past n")
    job = functools.partial(_gibbs_job, law, spec, int(n), float(h), lags)
    res = pmap(job, [replica_seed(seed, i) for i in range(replicas)])
    ratios = np.stack([r[0] for r in res])
    f = np.array([r[1] for r in res])
    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / np.sqrt(replicas)
    slope, r2 = _fit(lags, np.log(mean))
    f_pt, f_se = float(f.mean()), float(f.std(ddof=1) / np.sqrt(replicas))
    rows = [{"lag": int(d), "mean_ratio": float(m), "se": float(s)} for d, m, s in zip(lags, mean, se)]
    rows.append({"fit_slope": slope, "r2": r2, "eps_hat": -slope})
    rows.append({"free_energy": f_pt, "se": f_se,
                 "localized": bool(f_pt > THRESHOLDS["se_strict"] * f_se)})
    passed = slope < 0 and r2 >= THRESHOLDS["r2_min"]
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n": n, "replicas": replicas,
              "seed": seed, "lags": lags}
    return CheckReport("gibbs_decay", params, slope, 0.0, bool(passed), "<", rows,
                       f"eps_hat={-slope:.6g}")


# ---------------------------------------------------------------- two replicas


def no_common_contact_probability(ws):
    """Exact P^{x2}(no shared contact in 1..n-1) for two independent Gibbs paths."""
    if ws.n == 1:
        return 1.0
    q, e = P._scaled_weights(ws)
    yn = np.exp(ws.log_forward[ws.n] - ws.n * (ws.log_forward[ws.n] / ws.n))
    return float(K.no_common_contact(q, e, ws.n) / yn**2)


def _decoupling_job(law, spec, n_list, h, pairs, seed):
    omega = sample(spec, max(n_list), seed)
    out = []
    for k, n in enumerate(n_list):
        ws = P.build_workspace(law, omega.values[:n], h, r_max=0, backward=False)
        exact = no_common_contact_probability(ws)
        if pairs and n > 1:
            _, _, X = P.sample_paths(ws, 2 * pairs, replica_seed(seed, 1000 + k), marks=True)
            inter = X[:, : n - 1]
            hit = np.any(inter[0::2] & inter[1::2], axis=1)
            mc = 1.0 - hit.mean()
        else:
            mc = 1.0
        out.append((exact, mc))
    return np.array(out)


def check_replica_decoupling(law, spec, h, n_list, replicas, paths_per_replica, seed=0):
    """Two independent Gibbs paths rarely avoid each other: decay of E^{x2}[prod (1 - X_i X'_i)].

    The fitted statistic uses the exact two-replica recursion; the paired
    sampling estimate is reported next to it as a cross-check.
    """
    n_list = sorted(int(n) for n in n_list)
    job = functools.partial(_decoupling_job, law, spec, n_list, float(h), int(paths_per_replica))
    res = np.stack(pmap(job, [replica_seed(seed, i) for i in range(replicas)]))
    exact = res[:, :, 0].mean(axis=0)
    mc = res[:, :, 1].mean(axis=0)
    mc_se = res[:, :, 1].std(axis=0, ddof=1) / np.sqrt(replicas) if replicas > 1 else np.zeros(len(n_list))
    rows = [{"n": n, "exact": float(e), "sampled": float(m), "sampled_se": float(s)}
            for n, e, m, s in zip(n_list, exact, mc, mc_se)]
    if len(n_list) >= 2:
        slope, r2 = _fit(n_list, np.log(exact))
    else:
        slope, r2 = 0.0, 0.0
    rows.append({"fit_slope": slope, "r2": r2})
    passed = slope < 0 and r2 >= THRESHOLDS["r2_min"]
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n_list": n_list,
              "replicas": replicas, "paths_per_replica": paths_per_replica, "seed": seed}
    return CheckReport("replica_decoupling", params, slope, 0.0, bool(passed), "<", rows,
                       "statistic from the exact two-replica recursion; sampling as cross-check")


# ---------------------------------------------------------------- largest gap


def _gap_job(law, spec, n_list, h, paths, t_max, seed):
    omega = sample(spec, max(n_list), seed)
    out = []
    for k, n in enumerate(n_list):
        ws = P.build_workspace(law, omega.values[:n], h, r_max=0, t_max=t_max, backward=False)
        _, M = P.sample_paths(ws, paths, replica_seed(seed, 2000 + k))
        out.append(M / np.log(n))
    return out


def check_largest_gap(law, spec, h, n_list, replicas, paths, seed=0, mu_n=1024, mu_replicas=400,
                      t_max=None):
    """Median of M_n / log n against 1 / mu_hat, with the upper-tail trend."""
    n_list = sorted(int(n) for n in n_list)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowESSWarning)
        mu = mu_hat(law, spec, h, mu_n, mu_replicas, replica_seed(seed, 10**6))
    inv = 1.0 / mu.point
    job = functools.partial(_gap_job, law, spec, n_list, float(h), int(paths), t_max)
    res = pmap(job, [replica_seed(seed, i) for i in range(replicas)])
    eps = THRESHOLDS["tail_eps"]
    rows, medians, tails = [], [], []
    for k, n in enumerate(n_list):
        vals = np.concatenate([r[k] for r in res])
        med = float(np.median(vals))
        tail = float(np.mean(vals >= (1 + eps) / mu.point))
        medians.append(med)
        tails.append(tail)
        rows.append({"n": n, "median": med, "median_times_mu": med * mu.point,
                     "distance_to_inverse_mu": abs(med - inv), "upper_tail": tail,
                     "upper_tail_se": float(np.sqrt(tail * (1 - tail) / vals.size))})
    lo, hi = THRESHOLDS["gap_band"]
    stat = medians[-1] * mu.point
    in_band = lo <= stat <= hi
    tail_decreasing = bool(np.all(np.diff(tails) <= 0))
    dist_slope, _ = _fit(np.log(n_list), np.abs(np.array(medians) - inv)) if len(n_list) > 1 else (0.0, 0.0)
    rows.append({"mu_hat": mu.point, "mu_se": mu.std_error, "mu_n": mu_n, "ess": mu.diagnostics["ess"],
                 "tail_decreasing": tail_decreasing, "distance_trend_slope": dist_slope})
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n_list": n_list, "replicas": replicas,
              "paths": paths, "seed": seed, "approximate": t_max is not None}
    notes = "approximate (kernel cutoff)" if t_max is not None else "exact"
    return CheckReport("largest_gap", params, stat, hi, bool(in_band and tail_decreasing), "in_band", rows, notes)


# ---------------------------------------------------------------- CLT


def _clt_job(law, spec, n, h, paths, seed):
    omega = sample(spec, n, seed)
    ws = P.build_workspace(law, omega, h, r_max=2, backward=False)
    mean, var = P.contact_cumulants(ws, 2)
    L, _ = P.sample_paths(ws, paths, replica_seed(seed, 3000))
    return mean, var, L


def check_clt(law, spec, h, n, omega_replicas, paths_per_omega, seed=0, v_replicas=None):
    """Per-environment KS distance of (L_n - E_omega L_n) / sqrt(n v) to N(0, 1)."""
    job = functools.partial(_clt_job, law, spec, int(n), float(h), int(paths_per_omega))
    res = pmap(job, [replica_seed(seed, i) for i in range(omega_replicas)])
    if v_replicas:
        v = free_energy_derivatives(law, spec, h, n, v_replicas, 2, replica_seed(seed, 10**6))[1]
        v_pt, v_se = v.point, v.std_error
    else:
        per = np.array([r[1] for r in res]) / n
        v_pt = float(per.mean())
        v_se = float(per.std(ddof=1) / np.sqrt(per.size)) if per.size > 1 else 0.0
    if not v_pt > THRESHOLDS["se_strict"] * v_se or v_pt <= 0:
        raise DegenerateVariance(f"v_hat={v_pt:.3g} not above {THRESHOLDS['se_strict']} SE")
    scale = np.sqrt(n * v_pt)
    ks, rows = [], []
    for i, (mean, var, L) in enumerate(res):
        z = (L - mean) / scale
        d = float(stats.kstest(z, "norm").statistic)
        dev = np.abs(L - mean)
        tails = [float(np.mean(dev > u * np.sqrt(n))) for u in (1, 2, 3)]
        ks.append(d)
        rows.append({"omega": i, "ks": d, "exact_mean": float(mean), "var_over_n": float(var / n),
                     "tail_sqrt_n": tails, "tail_decreasing": bool(np.all(np.diff(tails) <= 0))})
    med = float(np.median(ks))
    rows.append({"v_hat": v_pt, "v_se": v_se, "median_ks": med})
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n": n,
              "omega_replicas": omega_replicas, "paths_per_omega": paths_per_omega, "seed": seed}
    return CheckReport("clt", params, med, THRESHOLDS["ks_max"], bool(med <= THRESHOLDS["ks_max"]), "<=", rows)


# ---------------------------------------------------------------- concentration


def check_concentration(law, spec, h, n, replicas, seed=0, chunk=2000):
    """Empirical tails of |log Z - mean| against 2 exp(-u^2 / (4 n gamma_bar_n))."""
    vals = []
    for k, start in enumerate(range(0, replicas, chunk)):
        m = min(chunk, replicas - start)
        vals.append(batch_log_partition(law, sample_batch(spec, n, m, replica_seed(seed, k)), h))
    logz = np.concatenate(vals)
    sigma = float(logz.std(ddof=1))
    dev = np.abs(logz - logz.mean())
    gbar = gamma_bar_n(spec, n)
    rows, worst = [], -np.inf
    for mult in (0, 1, 2, 3):
        u = mult * sigma
        emp = float(np.mean(dev >= u))
        bound = float(min(2.0, 2 * np.exp(-u * u / (4 * n * gbar))))
        se = float(np.sqrt(max(emp * (1 - emp), 1.0 / replicas) / replicas))
        excess = emp - bound - THRESHOLDS["se_strict"] * se
        worst = max(worst, excess)
        rows.append({"u_over_sigma": mult, "u": u, "empirical": emp, "bound": bound, "se": se,
                     "violation": bool(excess > 0)})
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n": n, "replicas": replicas,
              "seed": seed, "gamma_bar_n": gbar}
    return CheckReport("concentration", params, float(worst), 0.0, bool(worst <= 0), "<=", rows)


# ---------------------------------------------------------------- hypercontractivity


def _phi_library(block):
    """Non-negative bounded-or-integrable test functions of one block, keyed by name."""
    return {
        "indicator_all_positive": np.all(block >= 0, axis=1).astype(float),
        "exp_mean": np.exp(block.mean(axis=1)),
        "clipped_quadratic": np.minimum(1.0 + np.mean(block**2, axis=1), 3.0),
        "clipped_linear": np.clip(1.0 + block[:, 0] + block[:, -1], 0.0, 4.0),
    }


def check_hypercontractivity(spec, n, block_count, replicas=10**6, seed=0, chunk=50_000):
    """E[prod phi_i] <= prod ||phi_i||_kappa with kappa = 2 gamma_bar / lambda_min(Gamma_n).

    Every block configuration is tested: the equal partition into
    ``block_count`` blocks and the single block.
    """
    lam_min, lam_max = spectral_bounds(spec, n)
    if not lam_min > 0:
        raise NotInvertible(f"lambda_min estimate {lam_min:.3g} is not positive")
    kappa = 2 * spec.gamma_bar / lam_min
    if kappa < 1:
        raise AssertionError("kappa must be at least 1")
    configs = {f"{block_count}_blocks": np.array_split(np.arange(n), block_count),
               "single_block": [np.arange(n)]}
    names = list(_phi_library(np.zeros((1, 2))))
    acc = {c: {"prod": [], "pow": []} for c in configs}
    for k, start in enumerate(range(0, replicas, chunk)):
        m = min(chunk, replicas - start)
        X = sample_batch(spec, n, m, replica_seed(seed, k))
        for c, blocks in configs.items():
            phis = [_phi_library(X[:, b]) for b in blocks]
            acc[c]["prod"].append(np.stack([np.prod([ph[nm] for ph in phis], axis=0) for nm in names]))
            acc[c]["pow"].append(np.stack([np.stack([ph[nm] ** kappa for ph in phis]) for nm in names]))
    rows, worst = [], -np.inf
    k4 = THRESHOLDS["se_loose"]
    for c in configs:
        prod = np.concatenate(acc[c]["prod"], axis=1)      # (phi, replicas)
        powv = np.concatenate(acc[c]["pow"], axis=2)       # (phi, block, replicas)
        for j, nm in enumerate(names):
            lhs = float(prod[j].mean())
            lhs_se = float(prod[j].std(ddof=1) / np.sqrt(replicas))
            mom = powv[j].mean(axis=1)
            mom_se = powv[j].std(axis=1, ddof=1) / np.sqrt(replicas)
            norms = mom ** (1 / kappa)
            rhs = float(np.prod(norms))
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(mom > 0, mom_se / (kappa * mom), 0.0)
            rhs_se = float(rhs * np.sqrt(np.sum(rel**2)))
            excess = lhs - rhs - k4 * float(np.hypot(lhs_se, rhs_se))
            worst = max(worst, excess)
            rows.append({"config": c, "phi": nm, "lhs": lhs, "lhs_se": lhs_se, "rhs": rhs,
                         "rhs_se": rhs_se, "passed": bool(excess <= 0)})
    params = {"spec": spec.to_dict(), "n": n, "block_count": block_count, "replicas": replicas, "seed": seed,
              "kappa": kappa, "lambda_min": lam_min, "lambda_max": lam_max}
    return CheckReport("hypercontractivity", params, float(worst), 0.0, bool(worst <= 0), "<=", rows,
                       f"kappa={kappa:.6g} from the finite-n smallest eigenvalue")


# ---------------------------------------------------------------- mu sandwich


def check_mu_sandwich(law, spec, h_grid, n, replicas, seed=0, lipschitz_step=0.2):
    """mu_hat <= f_hat, mu_hat > 0 where f_hat > 0, and |mu_hat(h + 0.2) - mu_hat(h)| <= 0.2."""
    h_grid = [float(h) for h in h_grid]
    hs = sorted(set(h_grid) | {round(h + lipschitz_step, 12) for h in h_grid})
    table = replica_table(law, spec, hs, n, replicas, seed)
    k3 = THRESHOLDS["se_strict"]
    f = table["logZ"] / n
    rows, ok = [], True
    mu = {}
    for k, h in enumerate(hs):
        f_pt = float(f[:, k].mean())
        f_se = float(f[:, k].std(ddof=1) / np.sqrt(replicas))
        m_pt, m_se, ess = _mu_from_logzm(table["logZm"][:, k], n)
        mu[h] = (m_pt, m_se)
        upper = m_pt <= f_pt + k3 * float(np.hypot(f_se, m_se))
        positive = (m_pt > 0) if f_pt > k3 * f_se else True
        row = {"h": h, "f_hat": f_pt, "f_se": f_se, "mu_hat": m_pt, "mu_se": m_se, "ess": ess,
               "ess_fraction": ess / replicas,
               "ess_flag": bool(ess < THRESHOLDS["ess_report_fraction"] * replicas),
               "upper_bound_ok": bool(upper), "positivity_ok": bool(positive)}
        if h in h_grid:
            ok &= upper and positive
        rows.append(row)
    worst_lip = -np.inf
    for h in h_grid:
        h2 = round(h + lipschitz_step, 12)
        (a, sa), (b, sb) = mu[h], mu[h2]
        excess = abs(b - a) - lipschitz_step - k3 * float(np.hypot(sa, sb))
        worst_lip = max(worst_lip, excess)
        rows.append({"h": h, "h_plus": h2, "mu_increment": b - a, "lipschitz_ok": bool(excess <= 0)})
    ok &= worst_lip <= 0
    stat = max(r["mu_hat"] - r["f_hat"] for r in rows if "f_hat" in r and r["h"] in h_grid)
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h_grid": h_grid, "n": n,
              "replicas": replicas, "seed": seed}
    return CheckReport("mu_sandwich", params, float(stat), 0.0, bool(ok), "<=", rows,
                       "lower-bound constant not checked; ESS reported per h")


# ---------------------------------------------------------------- convolution


def _convolution_terms(eps, a, k_max, rel=1e-16):
    U = int(np.ceil(-np.log(rel) / eps)) + 1
    i = np.arange(-U, U + 1)
    u = np.exp(-eps * np.abs(i))
    W = k_max + 2 * U
    j = np.arange(-W, W + 1)
    w = (1.0 + np.abs(j)) ** (-1.0 - a)
    uw = np.convolve(u, w)             # index offset U + W
    uwu = np.convolve(uw, u)           # index offset 2U + W
    k = np.arange(k_max + 1)
    return k, uw[U + W + k], uwu[2 * U + W + k], U


def check_convolution_decay(eps, a, a_prime, k_max):
    """sup_k (u*w*u)_k (1+k)^(1+a') is finite, reached early, and the sequence then decreases."""
    if not 0 < a_prime < a < 1:
        raise ValueError("need 0 < a' < a < 1")
    k, uw, uwu, U = _convolution_terms(eps, a, k_max)
    g = uwu * (1.0 + k) ** (1 + a_prime)
    g1 = uw * (1.0 + k) ** (1 + a_prime)
    kstar = int(np.argmax(g))
    rises = np.flatnonzero(np.diff(g) > 0)
    k0 = int(rises[-1] + 1) if rises.size else 0
    rises1 = np.flatnonzero(np.diff(g1) > 0)
    k01 = int(rises1[-1] + 1) if rises1.size else 0
    early = k_max // 10
    passed = kstar <= early and k0 <= early and g[0] > 0 and uwu[0] > uwu[1]
    # truncating u at |i| <= U drops at most a relative 2 e^{-eps U} / (1 - e^{-eps}) of each sum
    trunc_rel = 2 * np.exp(-eps * (U + 1)) / (1 - np.exp(-eps))
    rows = [{"k": int(kk), "uwu": float(uwu[kk]), "normalized": float(g[kk]), "uw_normalized": float(g1[kk])}
            for kk in sorted({0, 1, 2, 5, 10, 20, 50, 100, 1000, k_max} & set(range(k_max + 1)))]
    rows.append({"sup": float(g.max()), "argmax": kstar, "nonincreasing_from": k0,
                 "uw_sup": float(g1.max()), "uw_nonincreasing_from": k01,
                 "truncation_relative_error": float(trunc_rel)})
    params = {"eps": eps, "a": a, "a_prime": a_prime, "k_max": k_max}
    return CheckReport("convolution_decay", params, float(k0), float(early), bool(passed), "<=", rows)


# ---------------------------------------------------------------- centering variance


def _marginal_job(law, spec, n, h, seed):
    omega = sample(spec, n, seed)
    ws = P.build_workspace(law, omega, h, r_max=0)
    return P.contact_marginal(ws)


def check_centering_variance(law, spec, h, n_list, replicas, seed=0, eps_hat=None, pairs=None):
    """w_hat at two sizes agrees, is positive, and the marginal covariance bound holds."""
    n_list = sorted(int(n) for n in n_list)[:2]
    k4, k3 = THRESHOLDS["se_loose"], THRESHOLDS["se_strict"]
    recs = [centering_statistics(law, spec, h, n, replicas, seed)[1] for n in n_list]
    (w1, w2) = recs
    agree = abs(w1.point - w2.point) <= k4 * float(np.hypot(w1.std_error, w2.std_error))
    degenerate = isinstance(spec, IID) and spec.sigma2 == 0
    lam_min = 0.0 if degenerate else spectral_bounds(spec, min(n_list[0], 256))[0]
    positive = (w2.point > k3 * w2.std_error) if lam_min > 0 else True
    rows = [{"n": r.n, "w_hat": r.point, "se": r.std_error} for r in recs]
    # environment covariance of marginals at the larger size
    n = n_list[-1]
    job = functools.partial(_marginal_job, law, spec, n, float(h))
    M = np.stack(pmap(job, [replica_seed(seed, i) for i in range(replicas)]))
    eps = eps_hat if eps_hat is not None else 0.5
    idx = np.arange(1, n + 1)
    absG = np.abs(toeplitz_matrix(spec, n))
    pairs = pairs or [(n // 2, n // 2), (n // 2, n // 2 + 2), (n // 2, n // 2 + 8),
                      (n // 2, n // 2 + 32), (n // 4, 3 * n // 4)]
    bound_ok, C = True, None
    for i, j in pairs:
        di = M[:, i - 1] - M[:, i - 1].mean()
        dj = M[:, j - 1] - M[:, j - 1].mean()
        prod = di * dj
        cov = float(prod.sum() / (replicas - 1))
        se = float(prod.std(ddof=1) / np.sqrt(replicas))
        shape = float(np.exp(-eps * np.abs(i - idx)) @ absG @ np.exp(-eps * np.abs(j - idx)))
        if C is None:
            C = abs(cov) / shape if shape > 0 else 0.0  # fitted on the first pair, then frozen
        bound = C * shape
        ok = abs(cov) <= bound + k3 * se
        bound_ok &= ok
        rows.append({"i": i, "j": j, "env_cov": cov, "se": se, "bound": bound, "passed": bool(ok)})
    passed = agree and positive and bound_ok
    params = {"law": law.to_dict(), "spec": spec.to_dict(), "h": h, "n_list": n_list, "replicas": replicas,
              "seed": seed, "eps_hat": eps, "C_fitted": C}
    return CheckReport("centering_variance", params, abs(w1.point - w2.point),
                       k4 * float(np.hypot(w1.std_error, w2.std_error)), bool(passed), "<=", rows)
