import math

import numpy as np
import pytest

from coupling_lab.model_spaces import (HEISENBERG, SL2, SL2_COVER, SU2, Base, BasePoint, Fiber,
                                       GeometryError, SpaceSpec, apply_Tb, area_rate,
                                       base_distance, embed, hemisphere_sign,
                                       homogeneous_norm_omega, make_point,
                                       nonisotropic_inverse, nonisotropic_product,
                                       polar_from_embedded, reflect_base, space_from_name,
                                       su2_cyl_to_r4, su2_equidistant_normal, su2_hopf,
                                       su2_isometry_Tb, su2_swap_reflection,
                                       swept_area_increment, wrap_fiber)


def _angles_area(kappa, a, b, c):
    """Unsigned triangle area from side lengths via the law of cosines."""
    if kappa > 0:
        cos_ang = lambda x, y, z: (math.cos(x) - math.cos(y) * math.cos(z)) / (math.sin(y) * math.sin(z))
        angs = [math.acos(cos_ang(a, b, c)), math.acos(cos_ang(b, c, a)), math.acos(cos_ang(c, a, b))]
        return sum(angs) - math.pi
    cos_ang = lambda x, y, z: (math.cosh(y) * math.cosh(z) - math.cosh(x)) / (math.sinh(y) * math.sinh(z))
    angs = [math.acos(cos_ang(a, b, c)), math.acos(cos_ang(b, c, a)), math.acos(cos_ang(c, a, b))]
    return math.pi - sum(angs)


def test_named_spaces():
    assert space_from_name("heisenberg") == HEISENBERG
    assert SL2.circle and not SL2_COVER.circle
    assert SU2.kappa == 1 and SL2.kappa == -1 and HEISENBERG.kappa == 0
    assert space_from_name("nonisotropic-heisenberg", [1, 2]).name == "nonisotropic-heisenberg"


@pytest.mark.parametrize("kw", [
    dict(base=Base.SPHERICAL, fiber=Fiber.LINE),
    dict(base=Base.HYPERBOLIC, fiber=Fiber.LINE, weights=(1.0, 2.0)),
    dict(base=Base.EUCLIDEAN, fiber=Fiber.LINE, weights=(2.0, 1.0)),
    dict(base=Base.EUCLIDEAN, fiber=Fiber.LINE, weights=(0.0, 1.0)),
])
def test_invalid_spaces(kw):
    with pytest.raises(GeometryError):
        SpaceSpec(**kw)


def test_unknown_space_name():
    with pytest.raises(GeometryError):
        space_from_name("torus")


@pytest.mark.parametrize("kappa", [0, -1, 1])
def test_embedding_roundtrip(kappa):
    r = np.array([0.3, 1.0, 2.5])
    th = np.array([0.1, 2.0, 5.0])
    rr, tt = polar_from_embedded(kappa, embed(kappa, r, th))
    assert np.allclose(rr, r, atol=1e-12) and np.allclose(tt, th, atol=1e-12)


def test_basepoint_validation():
    with pytest.raises(GeometryError):
        BasePoint(1, 4.0, 0.0)
    with pytest.raises(GeometryError):
        BasePoint(0, -1.0, 0.0)
    with pytest.raises(GeometryError):
        BasePoint.from_embedded(-1, [0.5, 0.0, 0.0])
    assert BasePoint(0, 0.0, 3.0).theta == 0.0


@pytest.mark.parametrize("kappa", [0, -1, 1])
def test_distance_matches_embedded(kappa):
    p, q = BasePoint(kappa, 0.7, 0.2), BasePoint(kappa, 1.3, 2.1)
    e1, e2 = p.embedded, q.embedded
    if kappa == 0:
        ref = np.linalg.norm(e1 - e2)
    elif kappa > 0:
        ref = math.acos(float(e1 @ e2))
    else:
        ref = math.acosh(e1[0] * e2[0] - e1[1] * e2[1] - e1[2] * e2[2])
    spec = {0: HEISENBERG, -1: SL2_COVER, 1: SU2}[kappa]
    assert base_distance(spec, p, q) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("spec,kappa", [(SU2, 1), (SL2_COVER, -1)])
def test_swept_area_against_angle_excess(spec, kappa):
    o = BasePoint.origin(kappa)
    for r1, r2, dth in [(0.5, 0.9, 0.7), (1.2, 0.4, 1.5), (0.3, 0.31, 0.01), (2.0, 1.5, 2.5)]:
        p, q = BasePoint(kappa, r1, 0.0), BasePoint(kappa, r2, dth)
        a, b, c = base_distance(spec, p, q), base_distance(spec, o, q), base_distance(spec, o, p)
        ref = _angles_area(kappa, a, b, c)
        got = swept_area_increment(spec, p, q)
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-13)
        assert swept_area_increment(spec, q, p) == pytest.approx(-got, abs=1e-15)


def test_swept_area_plane():
    p, q = BasePoint(0, 1.0, 0.0), BasePoint(0, 1.0, math.pi / 2)
    assert swept_area_increment(HEISENBERG, p, q) == pytest.approx(0.5)


def test_area_rates():
    assert area_rate(HEISENBERG, 2.0) == pytest.approx(1.0)
    assert area_rate(SL2_COVER, 1.0) == pytest.approx(math.tanh(0.5) ** 2)
    assert area_rate(SU2, 1.0) == pytest.approx(math.tan(0.5) ** 2)
    with pytest.raises(GeometryError):
        area_rate(SU2, math.pi)


def test_reflect_base_involution():
    p = BasePoint(-1, 1.4, 0.3)
    q = reflect_base(SL2_COVER, 1.1, p)
    back = reflect_base(SL2_COVER, 1.1, q)
    assert back.r == p.r and back.theta == pytest.approx(p.theta)
    # points on the axis are fixed
    on = BasePoint(-1, 2.0, 1.1)
    assert reflect_base(SL2_COVER, 1.1, on).theta == pytest.approx(1.1)


def test_wrap_fiber():
    assert wrap_fiber(HEISENBERG, 100.0) == 100.0
    assert wrap_fiber(SL2, 2 * math.pi) == pytest.approx(2 * math.pi)
    assert wrap_fiber(SL2, -2 * math.pi) == pytest.approx(2 * math.pi)
    assert wrap_fiber(SU2, 4 * math.pi + 0.5) == pytest.approx(0.5)
    assert make_point(SU2, 0.0, 0.0, 5 * math.pi).z == pytest.approx(math.pi)


def test_su2_points_on_unit_sphere_and_hopf():
    r, th, z = np.array([0.4, 1.9]), np.array([0.3, 4.0]), np.array([1.0, -3.0])
    p = su2_cyl_to_r4(r, th, z)
    assert np.allclose(np.linalg.norm(p, axis=-1), 1.0)
    base = su2_hopf(p)
    assert np.allclose(base, embed(1, r, th), atol=1e-12)


def test_su2_equidistant_sphere():
    a = 1.2
    n, h = su2_equidistant_normal(a)
    p0, p2a = su2_cyl_to_r4(0.0, 0.0, 0.0), su2_cyl_to_r4(0.0, 0.0, 2 * a)
    assert np.linalg.norm(p0 - p2a) > 0
    assert float(p0 @ n) == pytest.approx(-float(p2a @ n))
    assert hemisphere_sign(a, p0) == -1 and hemisphere_sign(a, p2a) == 1
    assert hemisphere_sign(a, su2_cyl_to_r4(0.7, 2.0, a)) == 0
    assert float(h @ n) == pytest.approx(0.0, abs=1e-15)
    R = su2_swap_reflection(a)
    assert np.allclose(R @ p0, p2a) and np.allclose(R @ R, np.eye(4))


def test_su2_tb_involution():
    T = su2_isometry_Tb(0.8)
    assert np.allclose(T @ T.T, np.eye(4), atol=1e-15)
    assert np.allclose(T @ T, np.eye(4), atol=1e-15)
    p = su2_cyl_to_r4(0.9, 0.1, 0.4)
    assert np.allclose(apply_Tb(0.8, apply_Tb(0.8, p)), p)


def test_nonisotropic_group():
    w = (1.0, 2.0)
    g = ([1.0, 0.5], [0.2, -1.0], 0.3)
    h = ([-0.4, 2.0], [0.7, 0.1], -1.1)
    e = ([0.0, 0.0], [0.0, 0.0], 0.0)
    x, y, z = nonisotropic_product(w, g, nonisotropic_inverse(g))
    assert np.allclose(x, 0) and np.allclose(y, 0) and z == pytest.approx(0.0)
    x, y, z = nonisotropic_product(w, g, e)
    assert z == pytest.approx(g[2])
    # the commutator is purely vertical: gh (hg)^-1 = (0, 0, sum a_i (x y' - y x'))
    _, _, zgh = nonisotropic_product(w, g, h)
    _, _, zhg = nonisotropic_product(w, h, g)
    expect = sum(a * (g[0][i] * h[1][i] - g[1][i] * h[0][i]) for i, a in enumerate(w))
    assert zgh - zhg == pytest.approx(expect)


def test_homogeneous_norm():
    w = (1.0, 3.0)
    assert homogeneous_norm_omega(w, [0, 0], [0, 0], 0.0) == 0.0
    x, y, z = np.array([0.3, -1.0]), np.array([0.5, 0.2]), 0.8
    n = homogeneous_norm_omega(w, x, y, z)
    assert n > 0 and homogeneous_norm_omega(w, -x, -y, -z) == pytest.approx(n)
    lam = 2.5
    assert homogeneous_norm_omega(w, lam * x, lam * y, lam ** 2 * z) == pytest.approx(lam * n)
    with pytest.raises(GeometryError):
        homogeneous_norm_omega(w, [1.0], [1.0], 0.0)
