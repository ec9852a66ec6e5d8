"""Simulation of base Brownian motions and their vertical area processes.

Three schemes are available:

* ``EmbeddedGeodesic`` (default): exponential-map Gaussian steps on the base,
  vertical increment = signed area of the geodesic triangle swept by the step.
* ``PolarEM``: Euler-Maruyama on the polar SDEs, vertical increment
  coefficient(r) * dW2; geodesic steps inside the pole guard.
* ``BesselClock``: base path only drives the clock S(t); the vertical
  coordinate is an independent Brownian motion run at the clock.

All randomness comes from per-path Philox streams (see ``rng_stream``).
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .model_spaces import BasePoint, SpaceSpec, TotalPoint, wrap_fiber


class Scheme(str, enum.Enum):
    POLAR_EM = "PolarEM"
    EMBEDDED_GEODESIC = "EmbeddedGeodesic"
    BESSEL_CLOCK = "BesselClock"

    @property
    def code(self) -> int:
        return {"EmbeddedGeodesic": K.SCHEME_GEODESIC, "PolarEM": K.SCHEME_POLAR,
                "BesselClock": K.SCHEME_BESSEL}[self.value]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-3
    horizon: float = 1.0
    seed: int = 0
    scheme: Scheme = Scheme.EMBEDDED_GEODESIC
    bridge_correction: bool = True
    r_min: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.dt > 0.0):
            raise ConfigError("dt must be positive")
        if not (self.horizon >= self.dt):
            raise ConfigError("horizon must be at least dt")
        if not (0.0 < self.r_min <= 0.1):
            raise ConfigError("r_min must lie in (0, 0.1]")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def key(self) -> tuple:
        s = int(self.seed)
        return np.uint64(s & 0xFFFFFFFF), np.uint64(s >> 32)

    @property
    def pole_guard(self) -> float:
        # EM steps are only trusted a few step-lengths away from the poles
        return max(self.r_min, 4.0 * math.sqrt(self.dt))

    def replace(self, **kw) -> "PathConfig":
        d = dict(dt=self.dt, horizon=self.horizon, seed=self.seed, scheme=self.scheme,
                 bridge_correction=self.bridge_correction, r_min=self.r_min)
        d.update(kw)
        return PathConfig(**d)


@dataclass(frozen=True)
class Trajectory:
    """Discretised path; ``r`` and ``theta`` have one row per factor."""
    times: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    clock: np.ndarray
    spec: SpaceSpec
    z_unwrapped: np.ndarray

    def base(self, i: int, factor: int = 0) -> BasePoint:
        return BasePoint(self.spec.kappa, float(self.r[factor, i]), float(self.theta[factor, i]))

    def point(self, i: int) -> TotalPoint:
        return TotalPoint(self.base(i), float(self.z[i]))

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class HittingRecord:
    hit: bool
    time: float
    crossing_index: int
    sub_step_fraction: float


def configure_threads() -> int:
    """Apply COUPLING_LAB_THREADS to the compiled kernels; returns the count."""
    import numba
    raw = os.environ.get("COUPLING_LAB_THREADS")
    n = numba.config.NUMBA_NUM_THREADS
    if raw:
        try:
            n = max(1, min(int(raw), numba.config.NUMBA_NUM_THREADS))
        except ValueError:
            raise ConfigError(f"COUPLING_LAB_THREADS must be an integer, got {raw!r}") from None
    numba.set_num_threads(n)
    return n


class RngStream:
    """Reproducible stream for one (seed, path_index, channel) triple."""

    def __init__(self, seed: int, path_index: int, channel: int):
        self.k0 = np.uint64(int(seed) & 0xFFFFFFFF)
        self.k1 = np.uint64(int(seed) >> 32)
        self.path = int(path_index)
        self.channel = int(channel)
        self._pos = 0

    def _draw(self, n: int, gaussian: bool) -> np.ndarray:
        out = np.empty(n)
        K.fill_block(self.k0, self.k1, self.path, self.channel, self._pos, n, gaussian, out)
        self._pos += (n + 1) // 2
        return out

    def normal(self, n: int) -> np.ndarray:
        return self._draw(n, True)

    def uniform(self, n: int) -> np.ndarray:
        return self._draw(n, False)


def rng_stream(seed: int, path_index: int, channel: int) -> RngStream:
    return RngStream(seed, path_index, channel)


def step_base(spec: SpaceSpec, state: BasePoint, dW1: float, dW2: float, dt: float,
              scheme: Scheme = Scheme.POLAR_EM, r_min: float = 1e-3) -> BasePoint:
    """One base step driven by the increments (dW1, dW2) over time dt."""
    if not dt > 0.0:
        raise ConfigError("dt must be positive")
    sq = math.sqrt(dt)
    x1, x2 = dW1 / sq, dW2 / sq
    if Scheme(scheme) is Scheme.POLAR_EM:
        rn, dth, _ = K.polar_em(spec.kappa, state.r, sq, x1, x2, r_min)
    else:
        rn, dth, _ = K.geo_step(spec.kappa, state.r, dW1, dW2)
    return BasePoint(spec.kappa, rn, state.theta + dth)


@dataclass
class VerticalBatch:
    """Raw output of a batch of vertical runs (one row per path)."""
    hit: np.ndarray
    sigma: np.ndarray
    axis: np.ndarray           # (n, factors) reflection axis angle at the passage
    probes: np.ndarray
    r: np.ndarray              # (n, factors, probes)
    theta: np.ndarray
    z: np.ndarray              # (n, probes), unwrapped
    clock: np.ndarray
    horizon: np.ndarray


def run_vertical(spec: SpaceSpec, cfg: PathConfig, n_paths: int, levels=np.inf, horizons=None,
                 probes: Sequence[float] = (), start: Optional[TotalPoint] = None,
                 path_offset: int = 0, channel_offset: int = 0,
                 batch_size: int = 1 << 16) -> VerticalBatch:
    """Simulate ``n_paths`` lifts and detect first passages of the level(s).

    ``levels`` and ``horizons`` may be scalars or per-path arrays.  Results
    depend only on (cfg.seed, global path index), not on ``batch_size``.
    """
    n = int(n_paths)
    levels = np.broadcast_to(np.asarray(levels, dtype=float), (n,)).copy()
    horizons = np.broadcast_to(np.asarray(cfg.horizon if horizons is None else horizons,
                                          dtype=float), (n,)).copy()
    probes = np.asarray(sorted(float(t) for t in probes), dtype=float)
    if probes.size and (probes[0] < 0 or probes[-1] > horizons.min() + 1e-12):
        raise ConfigError("probe times must lie in [0, horizon]")
    w = spec.factor_weights
    nf = w.shape[0]
    if start is None:
        r0 = np.zeros(nf)
        th0 = np.zeros(nf)
        z0 = 0.0
    else:
        if nf != 1:
            raise ConfigError("explicit start points are only supported for one factor")
        r0 = np.array([start.base.r])
        th0 = np.array([start.base.theta])
        z0 = float(start.z)
    npb = probes.size
    out = VerticalBatch(hit=np.zeros(n, np.bool_), sigma=np.zeros(n), axis=np.zeros((n, nf)),
                        probes=probes, r=np.zeros((n, nf, npb)), theta=np.zeros((n, nf, npb)),
                        z=np.zeros((n, npb)), clock=np.zeros((n, npb)), horizon=horizons)
    configure_threads()
    k0, k1 = cfg.key
    for lo in range(0, n, batch_size):
        hi = min(n, lo + batch_size)
        K.vertical_kernel(spec.kappa, spec.circle, w, cfg.scheme.code, cfg.bridge_correction,
                          cfg.pole_guard, cfg.dt, r0, th0, z0, levels[lo:hi], horizons[lo:hi],
                          probes, path_offset + lo, k0, k1, channel_offset,
                          out.hit[lo:hi], out.sigma[lo:hi], out.axis[lo:hi], out.r[lo:hi],
                          out.theta[lo:hi], out.z[lo:hi], out.clock[lo:hi])
    return out


def time_grid(horizon: float, dt: float) -> np.ndarray:
    n = int(math.ceil(horizon / dt - 1e-9))
    grid = np.arange(n + 1, dtype=float) * dt
    grid[-1] = horizon
    return grid


def simulate_path(spec: SpaceSpec, start: Optional[TotalPoint], cfg: PathConfig,
                  path_index: int = 0) -> Trajectory:
    """Full trajectory on the grid 0, dt, 2dt, ..., horizon."""
    grid = time_grid(cfg.horizon, cfg.dt)
    b = run_vertical(spec, cfg, 1, probes=grid, start=start, path_offset=path_index)
    zu = b.z[0]
    traj = Trajectory(times=grid, r=b.r[0], theta=np.mod(b.theta[0], 2 * math.pi),
                      z=wrap_fiber(spec, zu) if spec.circle else zu.copy(),
                      clock=b.clock[0], spec=spec, z_unwrapped=zu)
    return traj


def simulate_bessel_clock(spec: SpaceSpec, cfg: PathConfig, n_paths: int = 1,
                          path_offset: int = 0) -> tuple:
    """Radial paths and clocks on the grid, for the decoupled representation
    z_t = z_0 + W(S(t)).  Returns (times, r, clock) with r of shape
    (n_paths, factors, steps)."""
    grid = time_grid(cfg.horizon, cfg.dt)
    b = run_vertical(spec, cfg.replace(scheme=Scheme.BESSEL_CLOCK), n_paths, probes=grid,
                     path_offset=path_offset)
    return grid, b.r, b.clock


def first_passage_vertical(spec: SpaceSpec, traj: Trajectory, level: float,
                           cfg: PathConfig, path_index: int = 0) -> HittingRecord:
    """First passage of a stored trajectory through {a} (line) or
    {a, a - 2pi} (circle), with optional Brownian-bridge correction."""
    zu = traj.z_unwrapped
    times = traj.times
    clock = traj.clock
    u = rng_stream(cfg.seed, path_index, K.CH_BRIDGE + 97).uniform(max(1, len(times) - 1))
    if zu[0] >= level or (spec.circle and zu[0] <= level - 2 * math.pi):
        return HittingRecord(True, float(times[0]), 0, 0.0)
    for i in range(len(times) - 1):
        ds = float(clock[i + 1] - clock[i])
        frac = K.crossing(float(zu[i]), float(zu[i + 1]), ds, float(level), spec.circle,
                          cfg.bridge_correction, float(u[i]))
        if frac >= 0.0:
            t = times[i] + frac * (times[i + 1] - times[i])
            return HittingRecord(True, float(t), i, float(frac))
    return HittingRecord(False, float(times[-1]), len(times) - 1, 0.0)
