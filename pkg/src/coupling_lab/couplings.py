"""Vertical reflection couplings, base mirror couplings and their two-stage
composition.

The vertical coupling starts the primary lift at (origin, 0) and the partner
at (origin, 2a).  Until the primary's vertical coordinate first reaches a
(line fiber) or leaves (a - 2pi, a) (circle fiber), the partner's base is the
primary base reflected across the geodesic through the origin at the angle
the primary occupies at that moment, and its vertical coordinate is 2a - z.
Afterwards the two paths agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from .model_spaces import (BasePoint, Base, GeometryError, SpaceSpec, TotalPoint,
                           base_distance, embed, wrap_fiber)
from .sde_sim import (ConfigError, PathConfig, Scheme, Trajectory, VerticalBatch,
                      configure_threads, run_vertical, time_grid)

TWO_PI = 2.0 * math.pi

# channel offsets keep the streams of different stages apart
STAGE2_CHANNELS = 1000
REFERENCE_CHANNELS = 2000

# a hyperbolic mirror pair this far from its bisector returns with
# probability below 1e-5; such paths are recorded as escaped
DEFAULT_ESCAPE = 12.0


@dataclass(frozen=True)
class CouplingOutcome:
    coupled: bool
    coupling_time: float
    stage1_time: Optional[float] = None
    vertical_displacement_at_stage2: Optional[float] = None
    truncated: bool = False

    def __post_init__(self):
        if self.truncated and self.coupled:
            raise ValueError("a truncated run cannot be coupled")


@dataclass(frozen=True)
class CoupledPair:
    primary_path: Trajectory
    partner_path: Trajectory
    outcome: CouplingOutcome


def check_level(spec: SpaceSpec, a: float) -> None:
    if not (a > 0.0) or not math.isfinite(a):
        raise ConfigError(f"level a must be positive and finite, got {a}")
    if spec.circle and 2.0 * a > TWO_PI + 1e-12:
        raise ConfigError("on a circle fiber the displacement 2a must lie in (0, 2pi]")


def partner_states(spec: SpaceSpec, a: float, sigma, hit, axis, probes, r, theta, z):
    """Partner states at probe times derived from the primary ones.

    Arrays follow ``VerticalBatch`` layout: r, theta (n, factors, probes),
    z (n, probes), axis (n, factors).  Returns (r, theta, z) for the partner.
    """
    before = ~(hit[:, None] & (probes[None, :] >= sigma[:, None]))
    ax = np.where(np.isnan(axis), 0.0, axis)
    th_p = np.where(before[:, None, :], 2.0 * ax[:, :, None] - theta, theta)
    z_p = np.where(before, 2.0 * a - z, z)
    return r.copy(), th_p, z_p


@dataclass
class VerticalSample:
    """Vertical coupling runs in outcome form (plus states at probe times)."""
    spec: SpaceSpec
    a: float
    batch: VerticalBatch

    @property
    def coupled(self) -> np.ndarray:
        return self.batch.hit

    @property
    def times(self) -> np.ndarray:
        """Coupling times, with the horizon standing in for censored runs."""
        return np.where(self.batch.hit, self.batch.sigma, self.batch.horizon)

    def primary(self, j: int):
        b = self.batch
        return b.r[:, :, j], b.theta[:, :, j], wrap_fiber(self.spec, b.z[:, j])

    def partner(self, j: int):
        b = self.batch
        r, th, z = partner_states(self.spec, self.a, b.sigma, b.hit, b.axis, b.probes,
                                  b.r, b.theta, b.z)
        return r[:, :, j], th[:, :, j], wrap_fiber(self.spec, z[:, j])


def vertical_coupling_sample(spec: SpaceSpec, a: float, cfg: PathConfig, n_paths: int,
                             probes: Sequence[float] = (), path_offset: int = 0) -> VerticalSample:
    check_level(spec, a)
    b = run_vertical(spec, cfg, n_paths, levels=a, probes=probes, path_offset=path_offset)
    return VerticalSample(spec, a, b)


def _trajectory(spec, grid, r, theta, zu, clock) -> Trajectory:
    zw = wrap_fiber(spec, zu) if spec.circle else zu.copy()
    return Trajectory(times=grid, r=r, theta=np.mod(theta, TWO_PI), z=zw, clock=clock,
                      spec=spec, z_unwrapped=zu)


def vertical_reflection_coupling(spec: SpaceSpec, a: float, cfg: PathConfig,
                                 path_index: int = 0) -> CoupledPair:
    """One materialised vertical reflection coupling on the grid of ``cfg``."""
    check_level(spec, a)
    grid = time_grid(cfg.horizon, cfg.dt)
    b = run_vertical(spec, cfg, 1, levels=a, probes=grid, path_offset=path_index)
    r_p, th_p, z_p = partner_states(spec, a, b.sigma, b.hit, b.axis, grid, b.r, b.theta, b.z)
    primary = _trajectory(spec, grid, b.r[0], b.theta[0], b.z[0], b.clock[0])
    # reflections are isometries, so the partner runs on the same clock
    partner = _trajectory(spec, grid, r_p[0], th_p[0], z_p[0], b.clock[0])
    hit = bool(b.hit[0])
    outcome = CouplingOutcome(coupled=hit, coupling_time=float(b.sigma[0]), truncated=not hit)
    return CoupledPair(primary, partner, outcome)


def _base_coordinates(kappa: int, r, theta) -> np.ndarray:
    """Coordinates of base points usable for distribution comparisons."""
    e = embed(kappa, r, theta)
    return e if kappa == 0 else e[..., 1:]


def partner_marginal_check(spec: SpaceSpec, a: float, cfg: PathConfig, n_paths: int,
                           t_probe: float) -> dict:
    """KS comparison of the partner at t_probe with an independent motion
    started from (origin, 2a).  Returns statistics and p-values per coordinate."""
    check_level(spec, a)
    if spec.factor_weights.shape[0] != 1:
        raise ConfigError("partner check is implemented for a single planar factor")
    cfg = cfg.replace(horizon=max(cfg.horizon, t_probe))
    s = vertical_coupling_sample(spec, a, cfg, n_paths, probes=[t_probe])
    r_p, th_p, z_p = s.partner(0)
    start = TotalPoint(BasePoint.origin(spec.kappa), wrap_fiber(spec, 2.0 * a))
    ref = run_vertical(spec, cfg, n_paths, probes=[t_probe], start=start,
                       channel_offset=REFERENCE_CHANNELS)
    xy_p = _base_coordinates(spec.kappa, r_p[:, 0], th_p[:, 0])
    xy_r = _base_coordinates(spec.kappa, ref.r[:, 0, 0], ref.theta[:, 0, 0])
    z_r = wrap_fiber(spec, ref.z[:, 0])
    out = {}
    for name, u, v in (("x", xy_p[:, 0], xy_r[:, 0]), ("y", xy_p[:, 1], xy_r[:, 1]),
                       ("z", z_p, z_r)):
        res = stats.ks_2samp(u, v)
        out[name] = {"statistic": float(res.statistic), "pvalue": float(res.pvalue)}
    out["z_mean"] = float(np.mean(z_p))
    out["z_mean_se"] = float(np.std(z_p) / math.sqrt(n_paths))
    out["r2_mean"] = float(np.mean(r_p[:, 0] ** 2))
    out["r2_mean_se"] = float(np.std(r_p[:, 0] ** 2) / math.sqrt(n_paths))
    return out


# --- base mirror coupling ----------------------------------------------------

@dataclass(frozen=True)
class MirrorFrame:
    """Two start points placed symmetrically about the geodesic at angle pi/2:
    primary at (r, theta0) with cos(theta0) > 0, partner at (r, pi - theta0)."""
    r: float
    theta0: float
    z_primary: float
    z_partner: float
    swapped: bool


def mirror_frame(spec: SpaceSpec, start1: TotalPoint, start2: TotalPoint) -> MirrorFrame:
    """Move two start points into the symmetric frame by a group isometry.

    Rotations about the origin fiber leave the vertical coordinate unchanged.
    On the Heisenberg group a left translation first moves the midpoint of
    the base points to the origin.  Curved bases need equal radii.
    """
    p, q = start1.base, start2.base
    z1, z2 = float(start1.z), float(start2.z)
    if spec.kappa == 0 and abs(p.r - q.r) > 1e-12:
        e1, e2 = p.embedded, q.embedded
        m = 0.5 * (e1 + e2)
        # left translation by (-m, 0): z -> z + (m_y x - m_x y)/2
        z1 += 0.5 * (m[1] * e1[0] - m[0] * e1[1])
        z2 += 0.5 * (m[1] * e2[0] - m[0] * e2[1])
        f1, f2 = e1 - m, e2 - m
        p = BasePoint(0, float(np.hypot(*f1)), float(np.arctan2(f1[1], f1[0])))
        q = BasePoint(0, float(np.hypot(*f2)), float(np.arctan2(f2[1], f2[0])))
    if abs(p.r - q.r) > 1e-10:
        raise GeometryError("start points on a curved base must be equidistant from the origin")
    # rotate so that the bisecting geodesic through the origin sits at pi/2
    half = 0.5 * (p.theta - q.theta)
    th_p = math.pi / 2 + half
    swapped = math.cos(th_p) < 0
    if swapped:
        th_p = math.pi - th_p
        z1, z2 = z2, z1
    return MirrorFrame(r=p.r, theta0=th_p, z_primary=z1, z_partner=z2, swapped=swapped)


@dataclass
class MirrorSample:
    met: np.ndarray
    sigma: np.ndarray
    displacement: np.ndarray   # z - z_tilde at the meeting time (primary minus partner)
    escaped: np.ndarray
    horizon: np.ndarray
    probes: np.ndarray
    r: np.ndarray
    theta: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.where(self.met, self.sigma, np.inf)


def mirror_sample(spec: SpaceSpec, frame: MirrorFrame, cfg: PathConfig, n_paths: int,
                  probes: Sequence[float] = (), escape: Optional[float] = None,
                  path_offset: int = 0, batch_size: int = 1 << 16) -> MirrorSample:
    n = int(n_paths)
    if escape is None:
        escape = DEFAULT_ESCAPE if spec.base is Base.HYPERBOLIC else 0.0
    probes = np.asarray(sorted(float(t) for t in probes), dtype=float)
    horizons = np.full(n, float(cfg.horizon))
    met = np.zeros(n, np.bool_)
    sigma = np.zeros(n)
    area = np.zeros(n)
    esc = np.zeros(n, np.bool_)
    pr = np.zeros((n, probes.size))
    pth = np.zeros((n, probes.size))
    configure_threads()
    k0, k1 = cfg.key
    for lo in range(0, n, batch_size):
        hi = min(n, lo + batch_size)
        K.mirror_kernel(spec.kappa, cfg.dt, frame.r, frame.theta0, horizons[lo:hi], float(escape),
                        probes, path_offset + lo, k0, k1, 0, met[lo:hi], sigma[lo:hi],
                        area[lo:hi], esc[lo:hi], pr[lo:hi], pth[lo:hi])
    # reflection across a geodesic through the origin negates swept areas
    disp = (frame.z_primary - frame.z_partner) + 2.0 * area
    if spec.circle:
        disp = wrap_fiber(spec, disp)
    return MirrorSample(met, sigma, disp, esc, horizons, probes, pr, pth)


@dataclass(frozen=True)
class HorizontalOutcome:
    met: bool
    time: float
    escaped: bool
    truncated: bool


def mirror_horizontal_coupling(spec: SpaceSpec, p: BasePoint, q: BasePoint, cfg: PathConfig,
                               z_p: float = 0.0, z_q: float = 0.0, path_index: int = 0) -> tuple:
    """Single mirror-coupled run; returns (HorizontalOutcome, displacement).

    The displacement is z - z_tilde of the two lifts at the meeting time
    (None if the bases never met before the horizon)."""
    if base_distance(spec, p, q) == 0.0:
        raise ConfigError("mirror coupling needs distinct base points")
    frame = mirror_frame(spec, TotalPoint(p, z_p), TotalPoint(q, z_q))
    s = mirror_sample(spec, frame, cfg, 1, path_offset=path_index)
    met = bool(s.met[0])
    d = float(s.displacement[0]) if met else None
    if d is not None and frame.swapped:
        d = -d
    out = HorizontalOutcome(met=met, time=float(s.sigma[0]) if met else math.inf,
                            escaped=bool(s.escaped[0]), truncated=not met and not s.escaped[0])
    return out, d


# --- two-stage coupling ------------------------------------------------------

@dataclass
class TwoStageSample:
    coupled: np.ndarray
    tau: np.ndarray
    stage1_met: np.ndarray
    stage1_time: np.ndarray
    displacement: np.ndarray
    escaped: np.ndarray
    horizon: float

    @property
    def times(self) -> np.ndarray:
        return np.where(self.coupled, self.tau, self.horizon)


def stage2_levels(spec: SpaceSpec, displacement: np.ndarray) -> np.ndarray:
    """Half the vertical displacement, reduced into (0, pi] on circle fibers."""
    d = np.abs(wrap_fiber(spec, displacement) if spec.circle else displacement)
    return 0.5 * d


def _run_stage2(spec, cfg, met, t1, disp, horizon, stage2_scheme, path_offset):
    n = met.shape[0]
    coupled = np.zeros(n, np.bool_)
    tau = np.full(n, float(horizon))
    a = stage2_levels(spec, disp)
    zero = met & (a == 0.0)
    coupled[zero] = True
    tau[zero] = t1[zero]
    todo = np.flatnonzero(met & (a > 0.0) & (t1 < horizon))
    if todo.size:
        cfg2 = cfg.replace(scheme=stage2_scheme)
        # stage-2 streams: same global path index, separate channel block
        b = _vertical_at_indices(spec, cfg2, todo, a[todo], horizon - t1[todo], path_offset)
        coupled[todo] = b.hit
        tau[todo] = np.where(b.hit, t1[todo] + b.sigma, horizon)
    return coupled, tau


def _vertical_at_indices(spec, cfg, idx, levels, horizons, path_offset):
    """Vertical runs for selected global path indices (one kernel call per
    contiguous run of indices keeps the path-keyed streams intact)."""
    n = idx.size
    hit = np.zeros(n, np.bool_)
    sigma = np.zeros(n)
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [n]])
    nf = spec.factor_weights.shape[0]
    k0, k1 = cfg.key
    w = spec.factor_weights
    empty = np.zeros(0)
    for s, e in zip(starts, ends):
        m = e - s
        oh = np.zeros(m, np.bool_)
        osg = np.zeros(m)
        K.vertical_kernel(spec.kappa, spec.circle, w, cfg.scheme.code, cfg.bridge_correction,
                          cfg.pole_guard, cfg.dt, np.zeros(nf), np.zeros(nf), 0.0,
                          np.ascontiguousarray(levels[s:e]), np.ascontiguousarray(horizons[s:e]),
                          empty, int(path_offset + idx[s]), k0, k1, STAGE2_CHANNELS,
                          oh, osg, np.zeros((m, nf)), np.zeros((m, nf, 0)), np.zeros((m, nf, 0)),
                          np.zeros((m, 0)), np.zeros((m, 0)))
        hit[s:e] = oh
        sigma[s:e] = osg
    return VerticalBatch(hit=hit, sigma=sigma, axis=None, probes=empty, r=None, theta=None,
                         z=None, clock=None, horizon=horizons)


def two_stage_sample(spec: SpaceSpec, start1: TotalPoint, start2: TotalPoint, cfg: PathConfig,
                     n_paths: int, stage2_scheme: Scheme = Scheme.BESSEL_CLOCK,
                     escape: Optional[float] = None, path_offset: int = 0) -> TwoStageSample:
    """Mirror-couple the bases, then run the vertical coupling from the
    displacement found at the meeting time; horizon = cfg.horizon overall."""
    n = int(n_paths)
    horizon = float(cfg.horizon)
    configure_threads()
    if base_distance(spec, start1.base, start2.base) == 0.0:
        met = np.ones(n, np.bool_)
        t1 = np.zeros(n)
        disp = np.full(n, float(start1.z) - float(start2.z))
        esc = np.zeros(n, np.bool_)
    else:
        frame = mirror_frame(spec, start1, start2)
        m = mirror_sample(spec, frame, cfg, n, escape=escape, path_offset=path_offset)
        met, t1, disp, esc = m.met, np.where(m.met, m.sigma, horizon), m.displacement, m.escaped
    coupled, tau = _run_stage2(spec, cfg, met, t1, disp, horizon, stage2_scheme, path_offset)
    return TwoStageSample(coupled=coupled, tau=tau, stage1_met=met, stage1_time=t1,
                          displacement=np.where(met, disp, np.nan), escaped=esc, horizon=horizon)


def two_stage_coupling(spec: SpaceSpec, start1: TotalPoint, start2: TotalPoint,
                       cfg: PathConfig, path_index: int = 0,
                       stage2_scheme: Scheme = Scheme.BESSEL_CLOCK) -> CouplingOutcome:
    s = two_stage_sample(spec, start1, start2, cfg, 1, stage2_scheme=stage2_scheme,
                         path_offset=path_index)
    met = bool(s.stage1_met[0])
    coupled = bool(s.coupled[0])
    return CouplingOutcome(coupled=coupled, coupling_time=float(s.tau[0]),
                           stage1_time=float(s.stage1_time[0]) if met else None,
                           vertical_displacement_at_stage2=float(s.displacement[0]) if met else None,
                           truncated=not coupled)


# --- non-isotropic Heisenberg group -------------------------------------------

def nonisotropic_spec(weights: Sequence[float]) -> SpaceSpec:
    return SpaceSpec(Base.EUCLIDEAN, "Line", tuple(weights))


def nonisotropic_vertical_coupling(weights: Sequence[float], a: float, cfg: PathConfig,
                                   path_index: int = 0) -> CoupledPair:
    """Vertical coupling on the weighted product; each factor is reflected
    across its own axis at the passage time."""
    return vertical_reflection_coupling(nonisotropic_spec(weights), a, cfg, path_index)


def _align_x(x, y, xt, yt):
    """Rotate each factor plane so the two start points share their x-coordinate.

    Rotations of a factor plane about the origin preserve its area form, so
    the vertical coordinates are unchanged."""
    x, y, xt, yt = (np.asarray(v, dtype=float).copy() for v in (x, y, xt, yt))
    for i in range(x.size):
        dx, dy = xt[i] - x[i], yt[i] - y[i]
        if dx == 0.0:
            continue
        phi = math.atan2(dx, dy)     # rotate the difference onto the y-axis
        c, s = math.cos(phi), math.sin(phi)
        x[i], y[i] = c * x[i] - s * y[i], s * x[i] + c * y[i]
        xt[i], yt[i] = c * xt[i] - s * yt[i], s * xt[i] + c * yt[i]
    return x, y, xt, yt


def invariant_area_difference(weights, x, y, z, xt, yt, zt) -> float:
    """A = z - z~ - 1/2 sum a_i (x_i y~_i - x~_i y_i).

    Constant while both points are moved by the same group increment (the
    vertical coordinate of g^-1 g~ up to sign).  Equals z - z~ once the
    horizontal coordinates agree."""
    w = np.asarray(weights, dtype=float)
    x, y, xt, yt = (np.asarray(v, dtype=float) for v in (x, y, xt, yt))
    return float(z - zt - 0.5 * np.sum(w * (x * yt - xt * y)))


def nonisotropic_two_stage_sample(weights: Sequence[float], start1: tuple, start2: tuple,
                                  cfg: PathConfig, n_paths: int,
                                  stage2_scheme: Scheme = Scheme.BESSEL_CLOCK,
                                  path_offset: int = 0) -> TwoStageSample:
    """start = (x, y, z) with x, y sequences of per-factor coordinates."""
    spec = nonisotropic_spec(weights)
    w = spec.factor_weights
    x, y, xt, yt = _align_x(start1[0], start1[1], start2[0], start2[1])
    if x.size != w.size:
        raise ConfigError("start coordinates must have one entry per weight")
    n = int(n_paths)
    horizon = float(cfg.horizon)
    dz0 = float(start1[2]) - float(start2[2])
    met = np.zeros(n, np.bool_)
    t1 = np.zeros(n)
    diff = np.zeros(n)
    configure_threads()
    k0, k1 = cfg.key
    K.sync_mirror_kernel(w, cfg.dt, x, y, yt, dz0, np.full(n, horizon), path_offset, k0, k1, 0,
                         met, t1, diff)
    coupled, tau = _run_stage2(spec, cfg, met, t1, diff, horizon, stage2_scheme, path_offset)
    return TwoStageSample(coupled=coupled, tau=tau, stage1_met=met, stage1_time=t1,
                          displacement=np.where(met, diff, np.nan),
                          escaped=np.zeros(n, np.bool_), horizon=horizon)


def nonisotropic_two_stage(weights: Sequence[float], start1: tuple, start2: tuple,
                           cfg: PathConfig, path_index: int = 0) -> CouplingOutcome:
    s = nonisotropic_two_stage_sample(weights, start1, start2, cfg, 1, path_offset=path_index)
    met = bool(s.stage1_met[0])
    coupled = bool(s.coupled[0])
    return CouplingOutcome(coupled=coupled, coupling_time=float(s.tau[0]),
                           stage1_time=float(s.stage1_time[0]) if met else None,
                           vertical_displacement_at_stage2=float(s.displacement[0]) if met else None,
                           truncated=not coupled)
