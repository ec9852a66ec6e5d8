"""Geometry of the three base space forms and their fibered total spaces.

Base points carry a polar pair (r, theta) and an embedded vector:
the plane as Cartesian (x, y), the hyperbolic plane on the upper sheet of
the hyperboloid x0^2 - x1^2 - x2^2 = 1, the sphere as a unit vector with the
origin at (1, 0, 0).  The vertical coordinate of a total-space point is the
signed area swept by the base path relative to the origin.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi


class GeometryError(ValueError):
    """Raised for invalid space specifications or points."""


class Base(str, enum.Enum):
    EUCLIDEAN = "Euclidean"
    HYPERBOLIC = "Hyperbolic"
    SPHERICAL = "Spherical"

    @property
    def kappa(self) -> int:
        return {"Euclidean": 0, "Hyperbolic": -1, "Spherical": 1}[self.value]


class Fiber(str, enum.Enum):
    LINE = "Line"
    CIRCLE = "Circle"


@dataclass(frozen=True)
class SpaceSpec:
    """Which total space: base curvature, fiber topology, optional weights."""
    base: Base
    fiber: Fiber
    weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "base", Base(self.base))
        object.__setattr__(self, "fiber", Fiber(self.fiber))
        if self.base is Base.SPHERICAL and self.fiber is Fiber.LINE:
            raise GeometryError("a spherical base requires a circle fiber")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if self.base is not Base.EUCLIDEAN or self.fiber is not Fiber.LINE:
                raise GeometryError("weights are only allowed for a Euclidean base with a line fiber")
            if len(w) == 0 or any(not (x > 0.0) or not math.isfinite(x) for x in w):
                raise GeometryError("weights must be positive and finite")
            if any(w[i] > w[i + 1] for i in range(len(w) - 1)):
                raise GeometryError("weights must be sorted ascending")
            object.__setattr__(self, "weights", w)

    @property
    def kappa(self) -> int:
        return self.base.kappa

    @property
    def circle(self) -> bool:
        return self.fiber is Fiber.CIRCLE

    @property
    def factor_weights(self) -> np.ndarray:
        return np.asarray(self.weights if self.weights is not None else (1.0,), dtype=float)

    @property
    def name(self) -> str:
        if self.weights is not None and len(self.weights) > 1:
            return "nonisotropic-heisenberg"
        return {
            (Base.EUCLIDEAN, Fiber.LINE): "heisenberg",
            (Base.HYPERBOLIC, Fiber.LINE): "sl2-cover",
            (Base.HYPERBOLIC, Fiber.CIRCLE): "sl2",
            (Base.SPHERICAL, Fiber.CIRCLE): "su2",
        }.get((self.base, self.fiber), "euclidean-circle")


HEISENBERG = SpaceSpec(Base.EUCLIDEAN, Fiber.LINE)
SL2_COVER = SpaceSpec(Base.HYPERBOLIC, Fiber.LINE)
SL2 = SpaceSpec(Base.HYPERBOLIC, Fiber.CIRCLE)
SU2 = SpaceSpec(Base.SPHERICAL, Fiber.CIRCLE)

NAMED_SPACES = {"heisenberg": HEISENBERG, "sl2-cover": SL2_COVER, "sl2": SL2, "su2": SU2}


def space_from_name(name: str, weights: Optional[Sequence[float]] = None) -> SpaceSpec:
    if name == "nonisotropic-heisenberg":
        if weights is None:
            raise GeometryError("nonisotropic-heisenberg needs weights")
        return SpaceSpec(Base.EUCLIDEAN, Fiber.LINE, tuple(weights))
    try:
        spec = NAMED_SPACES[name]
    except KeyError:
        raise GeometryError(f"unknown space {name!r}; expected one of "
                            f"{sorted(NAMED_SPACES) + ['nonisotropic-heisenberg']}") from None
    if weights is not None:
        return SpaceSpec(spec.base, spec.fiber, tuple(weights))
    return spec


def embed(kappa: int, r, theta) -> np.ndarray:
    """Embedded coordinates of polar points (vectorised over r, theta)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if kappa == 0:
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    if kappa < 0:
        s = np.sinh(r)
        return np.stack([np.cosh(r), s * np.cos(theta), s * np.sin(theta)], axis=-1)
    s = np.sin(r)
    return np.stack([np.cos(r), s * np.cos(theta), s * np.sin(theta)], axis=-1)


def polar_from_embedded(kappa: int, v) -> tuple:
    v = np.asarray(v, dtype=float)
    if kappa == 0:
        r = np.hypot(v[..., 0], v[..., 1])
        th = np.arctan2(v[..., 1], v[..., 0])
    else:
        rho = np.hypot(v[..., 1], v[..., 2])
        r = np.arcsinh(rho) if kappa < 0 else np.arctan2(rho, v[..., 0])
        th = np.arctan2(v[..., 2], v[..., 1])
    return r, np.mod(th, TWO_PI)


@dataclass(frozen=True)
class BasePoint:
    """Point of a base space form: polar pair plus embedded vector."""
    kappa: int
    r: float
    theta: float
    embedded: np.ndarray = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        r = float(self.r)
        if not (r >= 0.0) or not math.isfinite(r):
            raise GeometryError(f"radius must be finite and >= 0, got {r}")
        if self.kappa > 0 and r > math.pi + 1e-12:
            raise GeometryError(f"spherical radius must lie in [0, pi], got {r}")
        if self.kappa > 0:
            r = min(r, math.pi)
        th = float(self.theta) % TWO_PI
        if r == 0.0:
            th = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "embedded", embed(self.kappa, r, th))

    @classmethod
    def from_embedded(cls, kappa: int, v) -> "BasePoint":
        v = np.asarray(v, dtype=float)
        if kappa > 0 and abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise GeometryError("spherical point must have unit norm")
        if kappa < 0:
            q = v[0] ** 2 - v[1] ** 2 - v[2] ** 2
            if abs(q - 1.0) > 1e-10 * max(1.0, v[0] ** 2) or v[0] < 1.0 - 1e-12:
                raise GeometryError("hyperbolic point must lie on the upper hyperboloid sheet")
        r, th = polar_from_embedded(kappa, v)
        return cls(kappa, float(r), float(th))

    @classmethod
    def origin(cls, kappa: int) -> "BasePoint":
        return cls(kappa, 0.0, 0.0)


@dataclass(frozen=True)
class TotalPoint:
    base: BasePoint
    z: float


def make_point(spec: SpaceSpec, r: float, theta: float, z: float = 0.0) -> TotalPoint:
    return TotalPoint(BasePoint(spec.kappa, r, theta), wrap_fiber(spec, z))


def reflect_base(spec: SpaceSpec, axis_angle: float, p: BasePoint) -> BasePoint:
    """Reflection across the geodesic through the origin at angle axis_angle."""
    return BasePoint(spec.kappa, p.r, 2.0 * axis_angle - p.theta)


def base_distance(spec: SpaceSpec, p: BasePoint, q: BasePoint) -> float:
    kappa = spec.kappa
    dth = q.theta - p.theta
    s2 = math.sin(0.5 * dth) ** 2
    if kappa == 0:
        d2 = (p.r - q.r) ** 2 + 4.0 * p.r * q.r * s2
        return math.sqrt(max(d2, 0.0))
    if kappa < 0:
        # cosh d = cosh(r1 - r2) + 2 sinh r1 sinh r2 sin^2(dth/2)
        c = math.cosh(p.r - q.r) + 2.0 * math.sinh(p.r) * math.sinh(q.r) * s2
        return math.acosh(max(c, 1.0))
    # haversine form keeps small distances accurate
    h = math.sin(0.5 * (p.r - q.r)) ** 2 + math.sin(p.r) * math.sin(q.r) * s2
    return 2.0 * math.asin(min(1.0, math.sqrt(max(h, 0.0))))


def area_rate(spec: SpaceSpec, r):
    """Rate of the clock of the time-changed vertical Brownian motion."""
    r = np.asarray(r, dtype=float)
    if spec.kappa == 0:
        out = 0.25 * r * r
    elif spec.kappa < 0:
        out = np.tanh(0.5 * r) ** 2
    else:
        if np.any(r >= math.pi):
            raise GeometryError("clock rate is singular at the south pole r = pi")
        out = np.tan(0.5 * r) ** 2
    return float(out) if out.ndim == 0 else out


def swept_area_increment(spec: SpaceSpec, p_prev: BasePoint, p_next: BasePoint) -> float:
    """Signed area of the geodesic triangle (origin, p_prev, p_next)."""
    kappa = spec.kappa
    r1, r2 = p_prev.r, p_next.r
    dth = p_next.theta - p_prev.theta
    if kappa == 0:
        return 0.5 * r1 * r2 * math.sin(dth)
    s2 = math.sin(0.5 * dth) ** 2
    if kappa > 0:
        if r1 >= math.pi or r2 >= math.pi:
            raise GeometryError("swept area undefined at the south pole")
        det = math.sin(r1) * math.sin(r2) * math.sin(dth)
        pq = math.cos(r1 - r2) - 2.0 * math.sin(r1) * math.sin(r2) * s2
        return 2.0 * math.atan2(det, 1.0 + math.cos(r1) + math.cos(r2) + pq)
    det = math.sinh(r1) * math.sinh(r2) * math.sin(dth)
    pq = math.cosh(r1 - r2) + 2.0 * math.sinh(r1) * math.sinh(r2) * s2
    return 2.0 * math.atan2(det, 1.0 + math.cosh(r1) + math.cosh(r2) + pq)


def wrap_fiber(spec: SpaceSpec, z):
    """Identity on line fibers; reduction into (-2pi, 2pi] on circle fibers."""
    if not spec.circle:
        return z
    zz = np.asarray(z, dtype=float)
    w = zz - FOUR_PI * np.round(zz / FOUR_PI)
    w = np.where(w <= -TWO_PI, w + FOUR_PI, w)
    w = np.where(w > TWO_PI, w - FOUR_PI, w)
    return float(w) if w.ndim == 0 else w


# --- SU(2) as the unit 3-sphere -------------------------------------------

def su2_cyl_to_r4(r, theta, z) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    c, s = np.cos(0.5 * r), np.sin(0.5 * r)
    return np.stack([c * np.cos(0.5 * z), c * np.sin(0.5 * z),
                     s * np.cos(theta - 0.5 * z), s * np.sin(theta - 0.5 * z)], axis=-1)


def su2_hopf(p) -> np.ndarray:
    """Base point (embedded unit vector in R^3) of a point of the 3-sphere."""
    p = np.asarray(p, dtype=float)
    x1, x2, x3, x4 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    # cos r = |q1|^2 - |q2|^2, sin r e^{i theta} = 2 q1 q2 with q1 = x1 + i x2, q2 = x3 + i x4
    re = 2.0 * (x1 * x3 - x2 * x4)
    im = 2.0 * (x1 * x4 + x2 * x3)
    return np.stack([x1 ** 2 + x2 ** 2 - x3 ** 2 - x4 ** 2, re, im], axis=-1)


def su2_equidistant_normal(a: float) -> tuple:
    """Normal N_a of the great sphere equidistant from the fiber points at
    z = 0 and z = 2a, and the unit vector H_a pointing towards z = a."""
    n = np.array([-math.sin(0.5 * a), math.cos(0.5 * a), 0.0, 0.0])
    hv = np.array([math.cos(0.5 * a), math.sin(0.5 * a), 0.0, 0.0])
    return n, hv


def hemisphere_sign(a: float, p) -> np.ndarray:
    """Side of the great sphere S_a: -1 on the open hemisphere containing
    (1, 0, 0, 0), +1 on the other side, 0 within 1e-12 of S_a."""
    n, _ = su2_equidistant_normal(a)
    v = np.asarray(p, dtype=float) @ n
    out = np.where(np.abs(v) < 1e-12, 0, np.sign(v)).astype(int)
    return int(out) if out.ndim == 0 else out


def su2_isometry_Tb(b: float) -> np.ndarray:
    c, s = math.cos(b), math.sin(b)
    return np.array([[1.0, 0.0, 0.0, 0.0],
                     [0.0, -1.0, 0.0, 0.0],
                     [0.0, 0.0, c, s],
                     [0.0, 0.0, s, -c]])


def apply_Tb(b: float, p) -> np.ndarray:
    return np.asarray(p, dtype=float) @ su2_isometry_Tb(b).T


def su2_swap_reflection(a: float) -> np.ndarray:
    """Reflection of R^4 across S_a; swaps the fiber points at z = 0 and z = 2a."""
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0, 0.0], [s, -c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


# --- non-isotropic Heisenberg group ----------------------------------------

def homogeneous_norm_omega(weights: Sequence[float], x, y, z: float) -> float:
    """sum_i (x_i^2 + y_i^2 + |z| / sum(weights))^(1/2)."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != w.shape or y.shape != w.shape:
        raise GeometryError("x and y must have one entry per weight")
    zi = abs(float(z)) / float(w.sum())
    return float(np.sum(np.sqrt(x * x + y * y + zi)))


def nonisotropic_product(weights: Sequence[float], g1: tuple, g2: tuple) -> tuple:
    """Group law: (x, y, z)(x', y', z') = (x + x', y + y', z + z' + 1/2 sum a_i (x_i y'_i - y_i x'_i))."""
    w = np.asarray(weights, dtype=float)
    x1, y1, z1 = np.asarray(g1[0], float), np.asarray(g1[1], float), float(g1[2])
    x2, y2, z2 = np.asarray(g2[0], float), np.asarray(g2[1], float), float(g2[2])
    return x1 + x2, y1 + y2, z1 + z2 + 0.5 * float(np.sum(w * (x1 * y2 - y1 * x2)))


def nonisotropic_inverse(g: tuple) -> tuple:
    return -np.asarray(g[0], float), -np.asarray(g[1], float), -float(g[2])
