"""End-to-end acceptance runs at full scale.

Each test records one PASS/FAIL line; the lines are printed together in the
pytest terminal summary (see conftest.py).  Expect roughly 10 minutes on one core.
"""

import json
import warnings

import numpy as np
import pytest
from scipy import stats

from pinlab import disorder as D
from pinlab import estimators as E
from pinlab import polymer as P
from pinlab import runner as R
from pinlab import verification as V
from pinlab.renewal import build_law, pure_free_energy

pytestmark = pytest.mark.acceptance

SEED = 20240611
IID, EXP, PW = D.IID(1.0), D.ExpDecay(1.0, 0.5), D.PowerLaw(1.0, 0.2, 0.5)
FAMILIES = {"iid": IID, "exp_decay": EXP, "power_law": PW}


def _report(record, number, title, passed, detail=""):
    record(number, title, bool(passed), detail)
    return bool(passed)


def _random_spec(rng):
    kind = rng.integers(4)
    if kind == 0:
        return D.IID(float(rng.uniform(0.2, 2.0)))
    if kind == 1:
        return D.ExpDecay(float(rng.uniform(0.2, 2.0)), float(rng.uniform(-0.8, 0.8)))
    if kind == 2:
        return D.PowerLaw(1.0, float(rng.uniform(0.05, 0.3)), float(rng.uniform(0.3, 1.5)))
    return D.FiniteRange((1.0, float(rng.uniform(-0.4, 0.4)), float(rng.uniform(-0.1, 0.1))))


def test_oracle_equivalence(acceptance_record):
    rng = np.random.default_rng(SEED)
    worst = 0.0

    def rel(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))

    for _ in range(200):
        alpha = float(rng.choice([0.5, 1.0, 1.5]))
        law = build_law(alpha, n_max=64)
        n = int(rng.integers(1, 15))
        h = float(rng.uniform(-2, 2))
        omega = D.sample(_random_spec(rng), n, int(rng.integers(2**32)))
        ws = P.build_workspace(law, omega, h, r_max=2)
        bf = P.brute_force(law, omega, h)
        worst = max(worst,
                    rel(P.log_partition(ws), bf.log_Z),
                    rel(P.contact_marginal(ws), bf.marginals),
                    rel(P.contact_moments(ws, 2), bf.moments),
                    rel(P.endpoint_mass(ws), bf.endpoint_mass))
    ok = _report(acceptance_record, 1, "oracle equivalence (200 instances, n <= 14)", worst <= 1e-9,
                 f"max relative error {worst:.2e}")
    assert ok


def test_homogeneous_oracle(acceptance_record):
    law = build_law(0.5)
    t = np.arange(1, law.horizon + 1, dtype=float)
    errs, resid = [], []
    for h in (0.5, 1.0, 2.0):
        b = pure_free_energy(law, h)
        resid.append(abs(np.sum(np.exp(law.log_mass_at(t) - b * t)[::-1]) - np.exp(-h)))
        ws = P.build_workspace(law, np.zeros(4096), h, r_max=0, backward=False)
        errs.append(abs(P.log_partition(ws) / 4096 - b))
    ok = max(errs) <= 0.01 and max(resid) <= 1e-12
    _report(acceptance_record, 2, "homogeneous oracle (n=4096)", ok,
            f"max |f_n - f_pure| {max(errs):.4f}, max residual {max(resid):.1e}")
    assert ok


def test_sampler_exactness(acceptance_record):
    law = build_law(0.5)
    omega = D.sample(IID, 10, SEED)
    ws = P.build_workspace(law, omega, 1.0)
    exact = P.brute_force(law, omega, 1.0).marginals
    _, _, X = P.sample_paths(ws, 10**5, SEED, marks=True)
    freq = X.mean(axis=0)
    se = np.sqrt(np.clip(exact * (1 - exact), 0, None) / X.shape[0])
    z = np.abs(freq - exact) / np.where(se > 0, se, np.inf)
    ok = bool(np.all((z <= 4) | ((se == 0) & (freq == exact))))
    _report(acceptance_record, 3, "sampler exactness (n=10, 1e5 paths)", ok, f"max |z| {np.max(z):.2f}")
    assert ok


def test_gaussian_field(acceptance_record):
    worst = 0.0
    for spec in (EXP, PW):
        X = D.sample_batch(spec, 512, 2000, SEED)
        g, se = D.empirical_covariance(X, 20)
        z = np.abs(g - spec.gammas(np.arange(21))) / se
        worst = max(worst, float(z.max()))
    ks = []
    for spec in (EXP, PW):
        a = D.sample_batch(spec, 512, 2000, SEED, method="circulant")[:, 0]
        b = D.sample_batch(spec, 512, 2000, SEED + 1, method="cholesky")[:, 0]
        ks.append(stats.ks_2samp(a, b).statistic)
    ok = worst <= 5 and max(ks) <= 0.05
    _report(acceptance_record, 4, "Gaussian field covariances and sampler agreement", ok,
            f"max |z| {worst:.2f} over k <= 20, KS {max(ks):.4f}")
    assert ok


def test_comparison_lemma(acceptance_record):
    rep = V.check_comparison_lemma(build_law(0.5), 1.0, 10, EXP, 3, 10**6, SEED)
    _report(acceptance_record, 5, "covariance comparison bound (n=10, r=3)", rep.passed,
            f"|diff| {rep.statistic:.4f} <= {rep.threshold:.4f}")
    assert rep.passed


def test_gibbs_decay(acceptance_record):
    law = build_law(0.5)
    reps = {name: V.check_gibbs_decay(law, spec, 1.5, 512, 200, SEED) for name, spec in FAMILIES.items()}
    ok = all(r.passed for r in reps.values())
    detail = ", ".join(f"{k}: slope {r.statistic:.3f} r2 {r.rows[-2]['r2']:.4f}" for k, r in reps.items())
    _report(acceptance_record, 6, "exponential decorrelation of Gibbs covariances", ok, detail)
    assert ok


def test_endpoint_decay(acceptance_record):
    rep = V.check_endpoint_decay(build_law(0.5), IID, 2.0, [64, 128, 256, 512], 500, SEED)
    fit = next(r for r in rep.rows if r.get("fit") == "exponential")
    ratio = next(r for r in rep.rows if "slope_over_mu" in r)["slope_over_mu"]
    _report(acceptance_record, 7, "endpoint mass decay (h=2)", rep.passed,
            f"slope {rep.statistic:.4f}, r2 {fit['r2']:.4f}, -slope/mu_hat {ratio:.3f}")
    assert rep.passed


def _gap(record, spec, name):
    rep = V.check_largest_gap(build_law(0.5), spec, 1.5, [1024, 2048, 4096, 8192], 200, 200, SEED)
    tails = [r["upper_tail"] for r in rep.rows if "upper_tail" in r]
    record(8, f"largest gap law [{name}]", rep.passed,
           f"median*mu_hat {rep.statistic:.3f}, upper tails {', '.join(f'{t:.4f}' for t in tails)}")
    return rep


def test_largest_gap_iid(acceptance_record):
    assert _gap(acceptance_record, IID, "iid").passed


@pytest.mark.xfail(strict=True, reason=(
    "upper-tail frequency is not monotone in n for ExpDecay at these sizes: M_n is an integer, "
    "the threshold 1.5 log n / mu_hat advances about one site per doubling of n, and with an "
    "effective rate below log 2 the tail cannot shrink across those steps; see the decisions ledger"))
def test_largest_gap_exp_decay(acceptance_record):
    assert _gap(acceptance_record, EXP, "exp_decay").passed


def test_quenched_clt(acceptance_record):
    law = build_law(0.5)
    reps = {k: V.check_clt(law, FAMILIES[k], 1.5, 4096, 10, 10**4, SEED) for k in ("iid", "exp_decay")}
    ok = all(r.passed for r in reps.values())
    _report(acceptance_record, 9, "quenched CLT (n=4096)", ok,
            ", ".join(f"{k}: median KS {r.statistic:.4f}" for k, r in reps.items()))
    assert ok


def test_concentration(acceptance_record):
    law = build_law(0.5)
    reps = {k: V.check_concentration(law, s, 1.0, 256, 10**4, SEED) for k, s in FAMILIES.items()}
    ok = all(r.passed for r in reps.values())
    _report(acceptance_record, 10, "Gaussian concentration of log Z (n=256)", ok,
            ", ".join(f"{k}: worst excess {r.statistic:.3g}" for k, r in reps.items()))
    assert ok


def test_mu_sandwich(acceptance_record):
    rep = V.check_mu_sandwich(build_law(0.5), IID, [0.5, 1.0, 1.5, 2.0], 1024, 500, SEED)
    ess = [round(r["ess_fraction"], 4) for r in rep.rows if "ess" in r]
    _report(acceptance_record, 11, "mu sandwich and Lipschitz (n=1024)", rep.passed,
            f"max mu_hat - f_hat {rep.statistic:.4f}, ESS fractions {ess}")
    assert rep.passed


def test_hypercontractivity(acceptance_record):
    reps = {k: V.check_hypercontractivity(FAMILIES[k], 64, 4, 10**6, SEED) for k in ("iid", "exp_decay")}
    ok = all(r.passed for r in reps.values())
    _report(acceptance_record, 12, "hypercontractive product bound (n=64, 4 blocks)", ok,
            ", ".join(f"{k}: worst excess {r.statistic:.3g}" for k, r in reps.items()))
    assert ok


def test_convolution_decay(acceptance_record):
    rep = V.check_convolution_decay(0.5, 0.5, 0.4, 10**4)
    sup = rep.rows[-1]
    _report(acceptance_record, 13, "convolution decay (k <= 1e4)", rep.passed,
            f"sup {sup['sup']:.4f} at k={sup['argmax']}, non-increasing from k={sup['nonincreasing_from']}")
    assert rep.passed


def _strip_times(manifest_text):
    m = json.loads(manifest_text)
    m.pop("start"), m.pop("end")
    return m


def test_determinism(acceptance_record, tmp_path):
    outputs = []
    for attempt in range(2):
        files = {}
        for command, extra in (("free-energy", {"h_grid": [0.5, 1.0, 1.5], "n": 512, "replicas": 20}),
                               ("mu", {"h": 1.5, "n": 256, "replicas": 100}),
                               ("decay", {"h": 1.5, "n_list": [64, 128, 256, 512], "replicas": 20})):
            out = tmp_path / f"{command}-{attempt}"
            cfg = R.ExperimentConfig.from_dict({"command": command, "seed": SEED, "output_dir": str(out), **extra})
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", E.LowESSWarning)
                R.run(cfg)
            for p in sorted(out.iterdir()):
                text = p.read_text()
                files[f"{command}/{p.name}"] = _strip_times(text) if p.name == "manifest.json" else text
        outputs.append(files)
    a, b = outputs
    for key in a:
        if isinstance(a[key], dict):
            a[key]["config"].pop("output_dir"), b[key]["config"].pop("output_dir")
    ok = a == b and len(a) >= 6
    _report(acceptance_record, 14, "determinism (repeat runs, same seed)", ok,
            f"{len(a)} output files compared byte for byte")
    assert ok
