import numpy as np
import pytest
from scipy.special import zeta

from pinlab.errors import InvalidHorizon, NonSummable, OutOfRange
from pinlab.renewal import Constant, LogPower, build_law, law_from_dict, mass, pure_free_energy, xi_bound


def test_ratio_forced_by_shape(law1):
    assert mass(law1, 1) - mass(law1, 2) == pytest.approx(2 * np.log(2), abs=1e-14)
    assert np.exp(mass(law1, 1) - mass(law1, 2)) == pytest.approx(4.0, rel=1e-14)


def test_normalization_matches_zeta(law1):
    # sum_t t^-2 = zeta(2), so K = 1 / zeta(2)
    assert law1.norm_constant * zeta(2) == pytest.approx(1.0, abs=1e-12)
    assert law1.normalization_error < 1e-8


def test_family_shape_constant(law):
    t = np.arange(1, law.n_max + 1)
    shape = law.log_mass_cache + 1.5 * np.log(t)
    assert np.ptp(shape) < 1e-12 * np.max(np.abs(shape)) + 1e-12


def test_mass_bounds_and_partial_sums(law1):
    p = np.exp(law1.log_mass_cache)
    assert np.all((p > 0) & (p < 1))
    assert p.sum() <= 1.0
    # partial sum up to the horizon plus the tail is one
    t = np.arange(1, 10**7 + 1, dtype=float)
    direct = np.sum((law1.norm_constant / t**2)[::-1])
    assert direct + law1.tail_mass == pytest.approx(1.0, abs=1e-8)


def test_doubling_identity(law):
    for t in (1, 3, 17, 100):
        assert mass(law, t) - mass(law, 2 * t) == pytest.approx(1.5 * np.log(2), abs=1e-12)


def test_log_power_law():
    lp = build_law(0.5, LogPower(1.0, 2.0), horizon=10**6, n_max=256)
    t = np.arange(1, 257)
    shape = lp.log_mass_cache + 1.5 * np.log(t) - 2.0 * np.log(np.log1p(t))
    assert np.ptp(shape) < 1e-12
    total = np.exp(lp.log_mass_at(np.arange(1, 10**6 + 1, dtype=float))[::-1]).sum() + lp.tail_mass
    assert total == pytest.approx(1.0, abs=1e-8)


def test_alpha_zero_needs_summable_ell():
    with pytest.raises(NonSummable):
        build_law(0.0)
    with pytest.raises(NonSummable):
        build_law(0.0, LogPower(1.0, -0.5))
    law0 = build_law(0.0, LogPower(1.0, -2.0), horizon=10**5, n_max=64)
    assert law0.norm_constant > 0


def test_errors():
    with pytest.raises(NonSummable):
        build_law(-0.1)
    with pytest.raises(InvalidHorizon):
        build_law(1.0, horizon=10, n_max=100)
    small = build_law(1.0, horizon=10**5, n_max=16)
    with pytest.raises(OutOfRange):
        mass(small, 17)
    with pytest.raises(OutOfRange):
        mass(small, 0)


def test_xi_bound_rescan(law1):
    for t_max in (1, 10, 50, 100):
        xi = xi_bound(law1, t_max)
        s = np.arange(1, t_max + 1)
        S, T = np.meshgrid(s, s, indexing="ij")
        p = np.exp(law1.log_mass_at(np.arange(1, 2 * t_max + 1)))
        assert np.all(p[S + T - 1] <= xi * np.minimum(S, T) ** xi * p[S - 1] * p[T - 1] * (1 + 1e-12))
        assert np.all(p[:t_max] >= (1 + s) ** -xi * (1 - 1e-12))


def test_xi_bound_single_constraint(law1):
    p1, p2 = np.exp(mass(law1, 1)), np.exp(mass(law1, 2))
    xi = xi_bound(law1, 1)
    assert xi == max(1.0, xi)
    assert p2 <= xi * p1**2 * (1 + 1e-12)
    assert p1 >= 2.0**-xi


def test_xi_bound_monotone(law1):
    vals = [xi_bound(law1, t) for t in (10, 50, 100)]
    assert vals == sorted(vals)


def test_pure_free_energy_residual(law1, law):
    for lw in (law1, law):
        for h in (0.25, 1.0, 2.0):
            b = pure_free_energy(lw, h)
            t = np.arange(1, 10**7 + 1, dtype=float)
            s = np.sum(np.exp(lw.log_mass_at(t) - b * t)[::-1])
            assert abs(s - np.exp(-h)) <= 1e-12
    assert pure_free_energy(law1, 0.0) == 0.0
    assert pure_free_energy(law1, -1.0) == 0.0


def test_pure_free_energy_monotone_convex(law):
    hs = np.linspace(0.1, 2.0, 20)
    f = np.array([pure_free_energy(law, h) for h in hs])
    assert np.all(np.diff(f) >= 0)
    assert np.all(np.diff(f, 2) >= -1e-10)


def test_law_from_dict_roundtrip(law):
    again = law_from_dict(law.to_dict())
    assert again.norm_constant == law.norm_constant
    assert np.array_equal(again.log_mass_cache, law.log_mass_cache)
    assert isinstance(law.ell, Constant)
