import json

import numpy as np
import pytest
from scipy.special import logsumexp

from pinlab import disorder as D
from pinlab import polymer as P
from pinlab import verification as V

IID, EXP, PW = D.IID(1.0), D.ExpDecay(1.0, 0.5), D.PowerLaw(1.0, 0.2, 0.5)


def _path_logweights(law, w, n):
    codes = np.arange(2 ** (n - 1))
    out = []
    for c in codes:
        pts = [i + 1 for i in range(n - 1) if (c >> i) & 1] + [n]
        prev, lw = 0, 0.0
        for p in pts:
            lw += law.log_p[p - prev] + w[p]
            prev = p
        out.append(lw)
    return codes, np.array(out)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_no_common_contact_matches_enumeration(law, n):
    om = D.sample(EXP, n, 3)
    ws = P.build_workspace(law, om, 1.0)
    codes, lw = _path_logweights(law, ws.w, n)
    prob = np.exp(lw - logsumexp(lw))
    disjoint = (codes[:, None] & codes[None, :]) == 0
    expect = float(prob @ disjoint @ prob)
    assert V.no_common_contact_probability(ws) == pytest.approx(expect, rel=1e-10)


def test_batch_log_partition(law):
    X = D.sample_batch(IID, 40, 3, 1)
    got = V.batch_log_partition(law, X, 0.7)
    for row, g in zip(X, got):
        assert g == pytest.approx(P.log_partition(P.build_workspace(law, row, 0.7, r_max=0)), abs=1e-11)


def test_log_mean_exp():
    a = np.array([0.0, np.log(3.0)])
    lm, se = V._log_mean_exp(a)
    assert lm == pytest.approx(np.log(2.0))
    assert se > 0


def test_report_json_roundtrip():
    rep = V.CheckReport("x", {"a": np.int64(3), "b": (1.0, 2.0)}, np.float64(0.5), 1.0, np.bool_(True))
    d = json.loads(rep.to_json())
    assert d["params"]["a"] == 3 and d["passed"] is True and d["statistic"] == 0.5


def test_comparison_lemma_small(law):
    rep = V.check_comparison_lemma(law, 1.0, 6, EXP, 2, 20_000, 0)
    assert rep.passed and rep.statistic <= rep.threshold
    with pytest.raises(ValueError):
        V.check_comparison_lemma(law, 1.0, 13, EXP, 2, 10, 0)


def test_endpoint_decay_small(law):
    rep = V.check_endpoint_decay(law, IID, 2.0, [32, 64, 96, 128], 100, 0)
    assert rep.rows and rep.statistic < 0


def test_gibbs_decay_small(law):
    rep = V.check_gibbs_decay(law, IID, 1.5, 128, 20, 0, lags=range(2, 21, 2))
    assert rep.passed and rep.statistic < 0 and "eps_hat" in rep.notes


def test_replica_decoupling_small(law):
    rep = V.check_replica_decoupling(law, IID, 1.5, [16, 32, 64], 8, 20, 0)
    assert rep.passed


def test_concentration_small(law):
    rep = V.check_concentration(law, IID, 1.0, 64, 2000, 0)
    assert rep.passed


def test_hypercontractivity_small():
    rep = V.check_hypercontractivity(EXP, 16, 4, 20_000, 0)
    assert rep.passed
    assert {"indicator_all_positive", "exp_mean"} <= set(V._phi_library(np.zeros((2, 3))))


def test_phi_library_nonnegative(rng):
    lib = V._phi_library(rng.standard_normal((1000, 5)))
    for name, vals in lib.items():
        assert np.all(vals >= 0), name


def test_convolution_against_direct_sum():
    eps, a, ap = 0.5, 0.5, 0.4
    rep = V.check_convolution_decay(eps, a, ap, 10**4)
    assert rep.passed
    # direct evaluation of (u*w*u)_k on a finite window
    U = 200
    i = np.arange(-U, U + 1)
    u = np.exp(-eps * np.abs(i))
    k = np.arange(-3 * U, 3 * U + 1)
    w = (1.0 + np.abs(k)) ** (-1 - a)
    conv = np.convolve(np.convolve(u, w), u)
    center = conv.size // 2
    direct = conv[center:center + 50] * (1 + np.arange(50)) ** (1 + ap)
    _, _, uwu, _ = V._convolution_terms(eps, a, 49)
    assert np.allclose(uwu * (1 + np.arange(50)) ** (1 + ap), direct, rtol=1e-10)
    with pytest.raises(ValueError):
        V.check_convolution_decay(eps, 0.4, 0.5, 100)


def test_mu_sandwich_small(law):
    rep = V.check_mu_sandwich(law, IID, [1.0, 2.0], 128, 100, 0)
    assert rep.passed


def test_clt_small(law):
    rep = V.check_clt(law, IID, 1.5, 512, 4, 2000, 0)
    assert rep.statistic < 0.1


def test_largest_gap_runs(law):
    rep = V.check_largest_gap(law, IID, 1.5, [64, 128, 256, 512], 4, 50, 0, mu_n=128, mu_replicas=100)
    assert rep.rows and np.isfinite(rep.statistic)


def test_centering_variance_small(law):
    rep = V.check_centering_variance(law, IID, 1.5, [128, 256], 200, 0)
    assert np.isfinite(rep.statistic)
