import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from coupling_lab import analytics as A
from coupling_lab.couplings import invariant_area_difference
from coupling_lab.experiments.output import csv_text, format_value
from coupling_lab.model_spaces import (SL2, SL2_COVER, SU2, HEISENBERG, BasePoint, base_distance,
                                       nonisotropic_product, reflect_base, wrap_fiber)
from coupling_lab.sde_sim import rng_stream

pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)
real = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
angle = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)

settings.register_profile("lab", deadline=None, max_examples=60)
settings.load_profile("lab")


@given(t=pos, z=real)
def test_density_scaling(t, z):
    assert math.isclose(A.levy_area_density(t, z), A.levy_area_density(1.0, z / t) / t,
                        rel_tol=1e-10, abs_tol=1e-300)


@given(a=pos, t1=pos, t2=pos)
def test_tail_monotone_in_time(a, t1, t2):
    lo, hi = sorted((t1, t2))
    assert A.heisenberg_tail_exact(a, hi) <= A.heisenberg_tail_exact(a, lo) + 1e-15


@given(a1=pos, a2=pos, t=pos)
def test_tail_monotone_in_level(a1, a2, t):
    lo, hi = sorted((a1, a2))
    assert A.heisenberg_tail_exact(lo, t) <= A.heisenberg_tail_exact(hi, t) + 1e-15


@given(a=st.floats(min_value=1e-3, max_value=5.0), t=st.floats(min_value=1.0, max_value=50.0))
def test_bounds_bracket_exact_tail(a, t):
    lo, hi = A.heisenberg_tail_bounds(a, t)
    exact = A.heisenberg_tail_exact(a, t)
    assert lo - 1e-12 <= exact <= hi + 1e-12


@given(times=st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=60),
       extra=st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=20))
def test_empirical_tail_monotone_and_censoring(times, extra):
    grid = np.linspace(0.1, 10.0, 15)
    base = A.empirical_tail(times, grid)
    assert np.all(np.diff(base.survival) <= 1e-15)
    # replacing events by censoring at the same times never lowers survival
    cens = A.empirical_tail(times + extra, grid, censored=[False] * len(times) + [True] * len(extra))
    evts = A.empirical_tail(times + extra, grid)
    assert np.all(cens.survival >= evts.survival - 1e-15)


@given(r=st.floats(min_value=0.0, max_value=30.0))
def test_success_and_tv_limit_sum_to_one(r):
    s = A.hyperbolic_success_prob(r)
    assert 0.0 <= s <= 1.0
    assert math.isclose(s + A.horizontal_tv_limit_sl2(r), 1.0, abs_tol=1e-12)


@given(z=st.floats(min_value=-1e3, max_value=1e3))
def test_wrap_fiber_range(z):
    for spec in (SL2, SU2):
        w = wrap_fiber(spec, z)
        assert -2 * math.pi < w <= 2 * math.pi
        k = (z - w) / (4 * math.pi)
        assert abs(k - round(k)) < 1e-9
    assert wrap_fiber(SL2_COVER, z) == z


@given(r=st.floats(min_value=0.0, max_value=3.0), th=angle, axis=angle)
def test_reflection_is_involution(r, th, axis):
    p = BasePoint(-1, r, th)
    back = reflect_base(SL2_COVER, axis, reflect_base(SL2_COVER, axis, p))
    assert back.r == p.r
    assert math.isclose(math.cos(back.theta - p.theta), 1.0, abs_tol=1e-9) or r == 0.0


@given(r1=st.floats(min_value=0.0, max_value=3.0), r2=st.floats(min_value=0.0, max_value=3.0),
       t1=angle, t2=angle)
def test_distance_symmetric(r1, r2, t1, t2):
    for kappa, spec in ((0, HEISENBERG), (-1, SL2_COVER), (1, SU2)):
        p, q = BasePoint(kappa, r1, t1), BasePoint(kappa, r2, t2)
        d = base_distance(spec, p, q)
        assert d >= 0.0
        assert math.isclose(d, base_distance(spec, q, p), rel_tol=1e-12, abs_tol=1e-12)


@given(seed=st.integers(min_value=0, max_value=2 ** 63), path=st.integers(0, 10 ** 6),
       stream=st.integers(0, 100))
def test_rng_deterministic(seed, path, stream):
    a = rng_stream(seed, path, stream).normal(8)
    b = rng_stream(seed, path, stream).normal(8)
    assert np.array_equal(a, b) and np.all(np.isfinite(a))


vec2 = st.lists(st.floats(min_value=-3, max_value=3), min_size=2, max_size=2)


@given(x=vec2, y=vec2, xt=vec2, yt=vec2, z=real, zt=real,
       incs=st.lists(st.tuples(vec2, vec2), min_size=1, max_size=5))
def test_invariant_constant_under_synchronous_moves(x, y, xt, yt, z, zt, incs):
    w = (1.0, 2.5)
    g, h = (np.array(x), np.array(y), z), (np.array(xt), np.array(yt), zt)
    a0 = invariant_area_difference(w, *g, *h)
    for dx, dy in incs:
        d = (np.array(dx), np.array(dy), 0.0)
        g, h = nonisotropic_product(w, g, d), nonisotropic_product(w, h, d)
    assert math.isclose(invariant_area_difference(w, *g, *h), a0, rel_tol=1e-9, abs_tol=1e-9)


@given(vals=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1,
                     max_size=10))
def test_csv_roundtrip_twelve_digits(vals):
    text = csv_text(["v"], [[v] for v in vals])
    lines = text.split("\r\n")
    assert lines[0] == "v"
    for v, cell in zip(vals, lines[1:]):
        back = float(cell)
        assert back == float(f"{v:.12g}")
        assert math.isclose(back, v, rel_tol=1e-11, abs_tol=0.0)
    assert format_value(float("nan")) == "nan"
