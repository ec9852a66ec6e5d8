import math

import numpy as np
import pytest
from scipy import integrate

from coupling_lab import analytics as A
from coupling_lab.model_spaces import HEISENBERG, SL2, SL2_COVER, SU2, su2_cyl_to_r4

# high-precision values from an independent mpmath evaluation (30 digits)
TAIL_1_1 = 0.94501254199785102642
TAIL_1_2 = 0.73903622714568729836
HBM_1 = 0.4488340286571699958
NCDF_196 = 0.97500210485177956379
LOWER_001 = 0.019996710131866303547
CONV_11 = {0.0: 0.63661977236758134308, 0.7: 0.31439029506773723831}
CONV_12 = {0.3: 0.3884754229970208375, 2.0: 0.057492749683816873572}


def test_levy_density_values():
    assert A.levy_area_density(1.0, 0.0) == pytest.approx(1.0)
    z = np.linspace(-3, 3, 13)
    assert np.allclose(A.levy_area_density(2.0, z), A.levy_area_density(2.0, -z))
    total, _ = integrate.quad(lambda x: A.levy_area_density(1.0, x), -50, 50, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_levy_cdf_is_integral_of_density():
    for t, z in [(1.0, 0.3), (2.5, -1.0), (0.5, 2.0)]:
        ref, _ = integrate.quad(lambda x: A.levy_area_density(t, x), -np.inf, z)
        assert A.levy_area_cdf(t, z) == pytest.approx(ref, abs=1e-10)


def test_heisenberg_tail_values():
    assert A.heisenberg_tail_exact(1.0, 1.0) == pytest.approx(TAIL_1_1, abs=1e-14)
    assert A.heisenberg_tail_exact(1.0, 2.0) == pytest.approx(TAIL_1_2, abs=1e-14)
    assert A.heisenberg_tail_exact(1e3, 1e-3) == pytest.approx(1.0)
    ts = np.linspace(0.5, 20, 40)
    v = A.heisenberg_tail_exact(1.0, ts)
    assert np.all(np.diff(v) < 0) and np.all((v > 0) & (v < 1))


def test_heisenberg_tail_is_one_minus_twice_upper_mass():
    for a, t in [(1.0, 1.0), (0.3, 2.0), (2.0, 0.7)]:
        upper, _ = integrate.quad(lambda x: A.levy_area_density(t, x), a, np.inf, epsabs=1e-13)
        assert A.heisenberg_tail_exact(a, t) == pytest.approx(1 - 2 * upper, abs=1e-8)


def test_heisenberg_tail_bounds():
    lo, hi = A.heisenberg_tail_bounds(0.01, 1.0)
    assert hi == pytest.approx(0.02) and lo == pytest.approx(LOWER_001, abs=1e-15)
    assert A.heisenberg_tail_bounds(0.0, 1.0) == (0.0, 0.0)
    for x in (0.01, 0.05, 0.1, 0.2, 0.5):
        lo, hi = A.heisenberg_tail_bounds(x, 1.0)
        assert lo < A.heisenberg_tail_exact(x, 1.0) < hi


def test_hyperbolic_success():
    assert A.hyperbolic_success_prob(0.0) == 1.0
    assert A.hyperbolic_success_prob(1.0) == pytest.approx(HBM_1, abs=1e-14)
    assert A.hyperbolic_success_prob(50.0) == pytest.approx(0.0, abs=1e-12)
    r = np.linspace(0, 5, 11)
    assert np.allclose(A.hyperbolic_success_prob(r) + A.horizontal_tv_limit_sl2(r), 1.0, atol=0)


def test_normal_cdf():
    assert A.normal_cdf(0.0) == 0.5
    assert A.normal_cdf(1.96) == pytest.approx(NCDF_196, abs=1e-7)
    x = np.linspace(0, 4, 9)
    assert np.allclose(A.normal_cdf(-x), 1 - A.normal_cdf(x))


def test_nonisotropic_tail_bound():
    assert A.nonisotropic_tail_bound((1.0, 2.0), 1.0, 4.0) == pytest.approx(0.25)
    assert A.nonisotropic_tail_bound((1.0, 2.0), 0.0, 4.0) == 0.0


def test_nonisotropic_density_single_factor():
    assert A.nonisotropic_density((2.0,), 1.0, 0.0) == pytest.approx(0.5)
    z = np.linspace(-2, 2, 9)
    assert np.allclose(A.nonisotropic_density((1.5,), 2.0, z), A.levy_area_density(3.0, z))


@pytest.mark.parametrize("w,table", [((1.0, 1.0), CONV_11), ((1.0, 2.0), CONV_12)])
def test_nonisotropic_density_against_quadrature(w, table):
    for z, ref in table.items():
        assert A.nonisotropic_density(w, 1.0, z) == pytest.approx(ref, abs=1e-6)


def test_nonisotropic_density_mass_and_bound():
    for w in [(1.0, 1.0), (1.0, 2.0), (0.5, 1.0, 3.0)]:
        g = A.nonisotropic_density_grid(w, 1.0)
        mass = np.trapezoid(g.density, g.z) if hasattr(np, "trapezoid") else np.trapz(g.density, g.z)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert g.density.max() <= 1.0 / max(w) + 1e-9
        assert g.cdf(g.z[-1]) == pytest.approx(1.0, abs=1e-8)


def test_empirical_tail_counting():
    tc = A.empirical_tail([1.0, 2.0, 3.0], [2.5])
    assert tc.survival[0] == pytest.approx(1 / 3)
    tc = A.empirical_tail([5.0, 5.0], [1.0, 4.0], censored=[True, True])
    assert np.all(tc.survival == 1.0) and tc.n_truncated == 2
    p = np.r_[np.zeros(5000), np.full(5000, 10.0)]
    tc = A.empirical_tail(p, [1.0])
    assert tc.stderr[0] == pytest.approx(0.005)


def test_witness_sets():
    z = np.array([0.5, 1.5])
    assert list(A.witness_membership(HEISENBERG, 1.0, z)) == [True, False]
    # semicircle (a - 2pi, a) on SL(2)
    a = 1.0
    inside = np.array([a - 0.1, a - 2 * math.pi + 0.1, a + 4 * math.pi - 0.5])
    outside = np.array([a + 0.1, a - 2 * math.pi - 0.1])
    assert A.witness_membership(SL2, a, inside).all()
    assert not A.witness_membership(SL2, a, outside).any()
    # SU(2): the fiber point at height 0 is in U, the one at 2a is not
    assert A.witness_membership(SU2, a, [0.0], [0.0])[0]
    assert not A.witness_membership(SU2, a, [2 * a], [0.0])[0]


def test_tv_witness_edge_cases():
    z = np.linspace(-1, 0.9, 100)
    assert A.empirical_tv_witness(z, z, HEISENBERG, 1.0).value == 0.0
    assert A.empirical_tv_witness(z, z + 5, HEISENBERG, 1.0).value == 1.0


def test_reflection_check_trivial_limit():
    # a level never reached: both sides equal 1
    n = 1000
    e = A.reflection_principle_check(HEISENBERG, 100.0, 1.0, np.full(n, 1.0), np.ones(n, bool),
                                     np.linspace(-1, 1, n))
    assert e.value == 0.0


def test_ks_requires_samples():
    with pytest.raises(ValueError):
        A.ks_test(np.zeros(10), A.normal_cdf)


def test_clt_check():
    rng = np.random.default_rng(0)
    n = 20_000
    res = A.clt_check_sl2(rng.standard_normal(n) * math.sqrt(4.0), 4.0)
    assert res.ks <= 1.36 / math.sqrt(n) * 1.5 and res.domination_ok
    assert A.clt_check_sl2(np.zeros(2000), 1.0).ks == pytest.approx(0.5)


def test_exp_rate_fit_synthetic():
    rng = np.random.default_rng(1)
    times = rng.exponential(1.0, 100_000)
    curve = A.empirical_tail(times, np.linspace(0.5, 6, 12))
    fit = A.exp_rate_fit(curve, (0.5, 6))
    assert fit.rate == pytest.approx(1.0, rel=0.05) and fit.r2 > 0.99
    flat = A.TailCurve(np.arange(1.0, 6.0), np.full(5, 0.5), np.zeros(5), 100, 0)
    assert A.exp_rate_fit(flat, (1, 5)).rate == pytest.approx(0.0, abs=1e-12)


def test_power_fit_synthetic():
    t = np.geomspace(1, 100, 10)
    curve = A.TailCurve(t, 0.8 / np.sqrt(t), np.zeros(10), 10_000, 0)
    fit = A.power_fit(curve, (1, 100))
    assert fit.rate == pytest.approx(-0.5) and fit.prefactor == pytest.approx(0.8)


def test_gradient_constant_function_is_zero():
    z = np.linspace(-1, 1, 100)
    r = np.ones(100)
    g = A.gradient_from_pairs("radial-bump", 0.5, 1.0, r, z, z + 1.0)
    assert g.value == 0.0 and g.bound == 1.0
