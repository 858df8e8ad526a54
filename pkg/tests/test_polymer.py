import numpy as np
import pytest
from scipy import stats

from pinlab import disorder as D
from pinlab import polymer as P
from pinlab.errors import SizeMismatch, TooLarge


def _omega(n, seed=0, spec=D.IID(1.0)):
    return D.sample(spec, n, seed)


@pytest.mark.parametrize("n", [1, 2, 5, 12, 16])
@pytest.mark.parametrize("h", [-1.0, 0.0, 1.0, 2.0])
def test_matches_enumeration(law, n, h):
    om = _omega(n, seed=n)
    ws = P.build_workspace(law, om, h, r_max=2)
    bf = P.brute_force(law, om, h)
    assert abs(P.log_partition(ws) - bf.log_Z) <= 1e-10 * max(1.0, abs(bf.log_Z))
    assert np.max(np.abs(P.contact_marginal(ws) - bf.marginals)) <= 1e-10
    assert np.max(np.abs(P.contact_moments(ws, 2) - bf.moments)) <= 1e-8
    assert P.endpoint_mass(ws) == pytest.approx(bf.endpoint_mass, rel=1e-9, abs=1e-300)


def test_pair_moments_match_enumeration(law):
    om = _omega(10, 3, D.ExpDecay(1.0, 0.5))
    ws = P.build_workspace(law, om, 0.7)
    bf = P.brute_force(law, om, 0.7)
    for a in range(1, 11):
        for b in range(a, 11):
            assert P.pair_moment(ws, a, b) == pytest.approx(bf.pair_moments[a - 1, b - 1], rel=1e-9, abs=1e-14)
    C = P.covariance_matrix(ws)
    m = bf.marginals
    assert np.max(np.abs(C - (bf.pair_moments - np.outer(m, m)))) < 1e-12


def test_single_site_chain(law):
    ws = P.build_workspace(law, np.array([0.3]), 1.0)
    assert P.log_partition(ws) == pytest.approx(law.log_p[1] + 1.3, abs=1e-15)
    assert P.endpoint_mass(ws) == pytest.approx(1.0)


def test_endpoint_identity(law):
    om = _omega(64, 7)
    ws = P.build_workspace(law, om, 1.2)
    expect = np.exp(law.log_p[64] + 1.2 + om.values[-1] - P.log_partition(ws))
    assert P.endpoint_mass(ws) == pytest.approx(expect, rel=1e-12)
    assert P.log_partition_minus(ws) == pytest.approx(P.log_partition(ws) - 1.2 - om.values[-1], abs=1e-12)


def test_splitting_identity(law):
    # every path has exactly one renewal interval (i, j] covering site k
    from scipy.special import logsumexp
    om = _omega(80, 11)
    ws = P.build_workspace(law, om, 0.9)
    F, B, lp, w = ws.log_forward, ws.log_backward, ws.lp, ws.w
    for k in (1, 17, 40, 80):
        terms = [F[i] + lp[j - i] + w[j] + B[j] for i in range(k) for j in range(k, 81)]
        assert logsumexp(terms) == pytest.approx(F[80], abs=1e-11)
    assert P.contact_marginal(ws).sum() == pytest.approx(P.contact_moments(ws, 1)[0], rel=1e-10)


def test_variance_from_covariances(law):
    om = _omega(200, 1, D.ExpDecay(1.0, 0.5))
    ws = P.build_workspace(law, om, 1.0)
    var = P.contact_cumulants(ws, 2)[1]
    assert P.covariance_matrix(ws).sum() == pytest.approx(var, rel=1e-8)


def test_cumulants_match_derivatives(law):
    om = _omega(300, 2)
    h, d = 1.0, 1e-3
    f = [P.log_partition(P.build_workspace(law, om, h + k * d, r_max=0)) for k in (-2, -1, 0, 1, 2)]
    k1 = (f[3] - f[1]) / (2 * d)
    k2 = (f[3] - 2 * f[2] + f[1]) / d**2
    cum = P.contact_cumulants(P.build_workspace(law, om, h, r_max=4), 4)
    assert cum[0] == pytest.approx(k1, rel=1e-6)
    assert cum[1] == pytest.approx(k2, rel=1e-4)


def test_covariance_profile_endpoint_zero(law):
    ws = P.build_workspace(law, _omega(100, 4), 1.0)
    cov, ma, mb = P.covariance_profile(ws, 10, [11, 50, 100])
    assert cov[-1] == 0.0
    assert cov[0] == pytest.approx(P.pair_covariance(ws, 10, 11), rel=1e-10)
    marg = P.contact_marginal(ws)
    assert np.allclose(ma, marg[9], rtol=1e-12) and np.allclose(mb, marg[[10, 49, 99]], rtol=1e-12)
    assert cov[0] == pytest.approx(P.pair_moment(ws, 10, 11) - marg[9] * marg[10], rel=1e-6)


def test_cutoff_is_lower_bound(law):
    om = _omega(200, 5)
    full = P.build_workspace(law, om, 1.0)
    cut = P.build_workspace(law, om, 1.0, t_max=30)
    assert cut.approximate and not full.approximate
    assert P.log_partition(cut) <= P.log_partition(full)


def test_errors(law):
    with pytest.raises(SizeMismatch):
        P.build_workspace(law, np.zeros(0), 1.0)
    with pytest.raises(TooLarge):
        P.brute_force(law, np.zeros(21), 1.0)
    ws = P.build_workspace(law, np.zeros(5), 1.0, backward=False)
    with pytest.raises(ValueError):
        P.contact_marginal(ws)
    with pytest.raises(IndexError):
        P.contact_marginal(P.build_workspace(law, np.zeros(5), 1.0), 6)


def test_sampler_matches_exact_law(law):
    om = _omega(10, 9)
    ws = P.build_workspace(law, om, 0.5)
    bf = P.brute_force(law, om, 0.5)
    L, M, X = P.sample_paths(ws, 40000, seed=1, marks=True)
    se = np.sqrt(np.clip(bf.marginals * (1 - bf.marginals), 0, None) / L.size)
    z = (X.mean(axis=0) - bf.marginals) / np.where(se > 0, se, 1)
    assert np.all(np.abs(z) < 4.5)
    assert np.all(X[:, -1] == 1)
    assert np.array_equal(L, X.sum(axis=1))
    # largest gap consistent with contact marks
    for row, m in zip(X[:200], M[:200]):
        pts = np.flatnonzero(row) + 1
        assert m == np.diff(np.concatenate([[0], pts])).max()


def test_sampler_distribution_of_L(law):
    om = _omega(12, 10)
    ws = P.build_workspace(law, om, 1.0)
    bf = P.brute_force(law, om, 1.0)
    L, _ = P.sample_paths(ws, 20000, seed=2)
    # compare the histogram of L with the exact law of L via a chi-square test
    codes = np.arange(2**11)[:, None]
    Lc = ((codes >> np.arange(11)) & 1).sum(axis=1) + 1
    w = ws.w
    exact = np.zeros(13)
    for c, l in zip(range(2**11), Lc):
        pts = [i + 1 for i in range(11) if (c >> i) & 1] + [12]
        prev, lw = 0, 0.0
        for p in pts:
            lw += law.log_p[p - prev] + w[p]
            prev = p
        exact[l] += np.exp(lw - bf.log_Z)
    obs = np.bincount(L, minlength=13)
    keep = exact * L.size > 5
    res = stats.chisquare(obs[keep], exact[keep] / exact[keep].sum() * obs[keep].sum())
    assert res.pvalue > 1e-4


def test_sample_path_deterministic(law):
    ws = P.build_workspace(law, _omega(50, 12), 1.0)
    a, b = P.sample_path(ws, 3), P.sample_path(ws, 3)
    assert np.array_equal(a.renewal_points, b.renewal_points)
    assert a.renewal_points[-1] == 50 and a.L_n == a.renewal_points.size
    assert a.gaps.sum() == 50 and a.M_n == a.gaps.max()


def test_dump_arrays(law, tmp_path):
    ws = P.build_workspace(law, _omega(6, 1), 1.0)
    p = tmp_path / "fb.csv"
    P.dump_arrays(ws, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "index,log_forward,log_backward" and len(lines) == 8
    assert float(lines[-1].split(",")[1]) == P.log_partition(ws)


def test_large_n_finite(law):
    ws = P.build_workspace(law, _omega(4096, 3), 1.0, r_max=2)
    assert np.isfinite(P.log_partition(ws))
    m = P.contact_marginal(ws)
    assert np.all((m >= 0) & (m <= 1))
    assert P.contact_cumulants(ws, 2)[1] > 0
