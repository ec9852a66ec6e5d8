"""Closed-form laws, empirical estimators and the statistics that compare them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import signal, special, stats

from .model_spaces import SpaceSpec, hemisphere_sign, su2_cyl_to_r4, wrap_fiber

TWO_PI = 2.0 * math.pi


# --- closed forms -------------------------------------------------------------

def levy_area_density(t: float, z):
    """Density (1/t) sech(pi z / t) of the Levy area at time t."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(np.pi * z / t))
    out = 2.0 * e / (t * (1.0 + e * e))   # sech without overflow
    return float(out) if out.ndim == 0 else out


def levy_area_cdf(t: float, z):
    """(2/pi) arctan(exp(pi z / t))."""
    z = np.asarray(z, dtype=float)
    x = np.pi * z / t
    # arctan(e^x) = pi/2 - arctan(e^-x) keeps large x accurate
    out = np.where(x > 0, 1.0 - (2.0 / np.pi) * np.arctan(np.exp(-np.abs(x))),
                   (2.0 / np.pi) * np.arctan(np.exp(-np.abs(x))))
    return float(out) if out.ndim == 0 else out


def heisenberg_tail_exact(a: float, t):
    """Survival probability of the Heisenberg vertical coupling time."""
    t = np.asarray(t, dtype=float)
    if a < 0 or np.any(t <= 0):
        raise ValueError("need a >= 0 and t > 0")
    out = (4.0 / np.pi) * np.arctan(np.tanh(0.5 * np.pi * a / t))
    return float(out) if out.ndim == 0 else out


def heisenberg_tail_bounds(a: float, t: float) -> tuple:
    x = a / t
    return 2.0 * x - (np.pi ** 2 / 3.0) * x ** 3, 2.0 * x


def hyperbolic_success_prob(r):
    """Probability that the mirror coupling of hyperbolic Brownian motions at
    distance 2r ever succeeds."""
    r = np.asarray(r, dtype=float)
    out = 1.0 - (4.0 / np.pi) * np.arctan(np.tanh(0.5 * r))
    return float(out) if out.ndim == 0 else out


def horizontal_tv_limit_sl2(r):
    r = np.asarray(r, dtype=float)
    out = (4.0 / np.pi) * np.arctan(np.tanh(0.5 * r))
    return float(out) if out.ndim == 0 else out


def nonisotropic_tail_bound(weights: Sequence[float], a: float, t):
    t = np.asarray(t, dtype=float)
    out = 2.0 * a / (max(weights) * t)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = special.ndtr(x)
    return float(out) if out.ndim == 0 else out


def reflected_bm_tail(h: float, t):
    """P(first passage of 1-d Brownian motion to distance h exceeds t) = 2 Phi(h / sqrt t) - 1."""
    t = np.asarray(t, dtype=float)
    out = 2.0 * special.ndtr(h / np.sqrt(t)) - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DensityGrid:
    z: np.ndarray
    density: np.ndarray

    def __call__(self, z):
        return np.interp(z, self.z, self.density, left=0.0, right=0.0)

    def cdf(self, z):
        c = np.concatenate([[0.0], np.cumsum(0.5 * (self.density[1:] + self.density[:-1])
                                             * np.diff(self.z))])
        return np.interp(z, self.z, c, left=0.0, right=1.0)


def nonisotropic_density_grid(weights: Sequence[float], t: float, spacing: Optional[float] = None,
                              cutoff: float = 1e-12) -> DensityGrid:
    """Density of sum_i a_i z_i with independent Levy areas z_i at time t,
    by FFT convolution of the scaled sech laws on a common grid."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w <= 0):
        raise ValueError("weights must be positive")
    h = spacing if spacing is not None else w.min() * t / 200.0
    # each factor density < cutoff beyond |z| = (a t / pi) log(2 / (a t cutoff))
    ext = [ai * t / np.pi * math.log(2.0 / (ai * t * cutoff)) for ai in w]
    half = max(ext)
    m = int(math.ceil(half / h))
    grid = np.arange(-m, m + 1) * h
    dens = levy_area_density(w[0] * t, grid)
    for ai in w[1:]:
        dens = signal.fftconvolve(dens, levy_area_density(ai * t, grid), mode="same") * h
    dens = np.clip(dens, 0.0, None)
    return DensityGrid(grid, dens)


def nonisotropic_density(weights: Sequence[float], t: float, z):
    w = np.asarray(weights, dtype=float)
    if w.size == 1:
        return levy_area_density(w[0] * t, z)
    g = nonisotropic_density_grid(w, t)
    out = g(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# --- empirical estimators -------------------------------------------------------

@dataclass(frozen=True)
class TailCurve:
    t_grid: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    n_samples: int
    n_truncated: int


def empirical_tail(times, t_grid, censored=None) -> TailCurve:
    """Survival estimates P(T > t); censored samples survive to every grid
    point strictly below their censoring time and are never counted as events."""
    times = np.asarray(times, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if censored is None:
        censored = np.zeros(times.shape, bool)
    censored = np.asarray(censored, bool)
    n = times.size
    if n == 0:
        raise ValueError("no samples")
    # an uncensored sample survives t iff T > t; a censored one iff t < its horizon
    alive = (times[None, :] > t_grid[:, None]) | (censored[None, :] & (times[None, :] >= t_grid[:, None]))
    p = alive.mean(axis=1)
    se = np.sqrt(p * (1.0 - p) / n)
    return TailCurve(t_grid, p, se, n, int(censored.sum()))


@dataclass(frozen=True)
class DensityEstimate:
    edges: np.ndarray
    counts: np.ndarray
    heights: np.ndarray


def density_histogram(samples, edges) -> DensityEstimate:
    samples = np.asarray(samples, dtype=float)
    edges = np.asarray(edges, dtype=float)
    counts, _ = np.histogram(samples, bins=edges)
    heights = counts / (samples.size * np.diff(edges))
    return DensityEstimate(edges, counts, heights)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def witness_membership(spec: SpaceSpec, a: float, z, r=None) -> np.ndarray:
    """Membership in the set U on which the primary law exceeds the partner's:
    {z < a} (line), the semicircle (a - 2pi, a) (circle over the hyperbolic
    plane) or the hemisphere of (1,0,0,0) cut out by S_a (SU(2))."""
    z = np.asarray(z, dtype=float)
    if not spec.circle:
        return z < a
    zw = wrap_fiber(spec, z)
    if spec.kappa > 0:
        r = np.zeros_like(zw) if r is None else np.asarray(r, dtype=float)
        return hemisphere_sign(a, su2_cyl_to_r4(r, np.zeros_like(zw), zw)) < 0
    # point of the semicircle (a - 2pi, a) modulo 4pi
    u = np.mod(zw - (a - TWO_PI), 2.0 * TWO_PI)
    return (u > 0.0) & (u < TWO_PI)


def empirical_tv_witness(z, z_partner, spec: SpaceSpec, a: float, r=None, r_partner=None) -> Estimate:
    """P(B_t in U) - P(B~_t in U) for paired samples, with paired standard error."""
    u1 = witness_membership(spec, a, z, r).astype(float)
    u2 = witness_membership(spec, a, z_partner, r_partner).astype(float)
    d = u1 - u2
    return Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0)


def reflection_principle_check(spec: SpaceSpec, a: float, t: float, times, censored, z_t, r_t=None) -> Estimate:
    """P(sigma > t) - [1 - 2 P(B_t in S+)] with a paired standard error; S+ is
    the complement of the witness set U."""
    times = np.asarray(times, dtype=float)
    censored = np.asarray(censored, bool)
    surv = ((times > t) | (censored & (times >= t))).astype(float)
    splus = (~witness_membership(spec, a, z_t, r_t)).astype(float)
    d = surv - (1.0 - 2.0 * splus)
    return Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size)))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n: int


def ks_test(samples, cdf: Callable) -> KsResult:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 1000:
        raise ValueError("KS comparisons need at least 1000 samples")
    res = stats.kstest(samples, cdf)
    return KsResult(float(res.statistic), float(res.pvalue), samples.size)


@dataclass(frozen=True)
class CltResult:
    ks: float
    domination_ok: bool
    worst_gap: float


def clt_check_sl2(z_t, t: float, x_grid=None) -> CltResult:
    """KS distance of z_t / sqrt(t) from N(0,1) and the one-sided check
    F_t(x) >= Phi(x) - 3 SE for x >= 0."""
    x = np.asarray(z_t, dtype=float) / math.sqrt(t)
    ks = float(stats.kstest(x, special.ndtr).statistic)
    if x_grid is None:
        x_grid = np.linspace(0.0, 2.0, 41)
    xs = np.sort(x)
    f = np.searchsorted(xs, x_grid, side="right") / xs.size
    se = np.sqrt(np.maximum(f * (1.0 - f), 1e-300) / xs.size)
    gap = f - special.ndtr(x_grid) + 3.0 * se
    return CltResult(ks, bool(np.all(gap >= 0.0)), float(gap.min()))


@dataclass(frozen=True)
class FitResult:
    rate: float
    prefactor: float
    r2: float
    window: tuple


def _window_points(curve: TailCurve, window, min_count: float = 10.0):
    t = curve.t_grid
    keep = (t >= window[0]) & (t <= window[1]) & (curve.survival >= min_count / curve.n_samples)
    return t[keep], curve.survival[keep]


def _line_fit(x, y):
    if x.size < 2:
        raise ValueError("fit window holds fewer than two usable points")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), min(1.0, max(0.0, r2))


def exp_rate_fit(curve: TailCurve, window) -> FitResult:
    """Least-squares line through log survival: survival ~ C exp(-c t)."""
    t, s = _window_points(curve, window)
    slope, icpt, r2 = _line_fit(t, np.log(s))
    return FitResult(rate=-slope, prefactor=math.exp(icpt), r2=r2, window=tuple(window))


def power_fit(curve: TailCurve, window) -> FitResult:
    """Least-squares line through (log t, log survival): survival ~ C t^slope.
    ``rate`` holds the slope."""
    t, s = _window_points(curve, window)
    slope, icpt, r2 = _line_fit(np.log(t), np.log(s))
    return FitResult(rate=slope, prefactor=math.exp(icpt), r2=r2, window=tuple(window))


# --- vertical gradient --------------------------------------------------------

TEST_FUNCTIONS = {
    # name: (f(r, z, a), sup norm)
    "indicator-below-level": (lambda r, z, a: (z < a).astype(float), 1.0),
    "cos-z": (lambda r, z, a: np.cos(z), 1.0),
    "gaussian-bump-z": (lambda r, z, a: np.exp(-z * z), 1.0),
    "logistic-z": (lambda r, z, a: 1.0 / (1.0 + np.exp(-z)), 1.0),
    "radial-bump": (lambda r, z, a: np.exp(-r * r), 1.0),
}


@dataclass(frozen=True)
class GradientEstimate:
    value: float
    stderr: float
    sup_norm: float
    bound: float


def gradient_from_pairs(f_name: str, a: float, t: float, r, z, z_partner) -> GradientEstimate:
    """|E f(B~_t) - E f(B_t)| / (2a) with the coupled pair as common randomness."""
    f, sup = TEST_FUNCTIONS[f_name]
    d = (f(r, z_partner, a) - f(r, z, a)) / (2.0 * a)
    return GradientEstimate(abs(float(d.mean())), float(d.std(ddof=1) / math.sqrt(d.size)),
                            sup, sup / t)


def vertical_gradient_estimate(spec: SpaceSpec, f_name: str, t: float, a: float, cfg,
                               n_paths: int) -> GradientEstimate:
    """Coupled difference quotient of P_t f between (0,0,2a) and (0,0,0)."""
    from .couplings import vertical_coupling_sample
    cfg = cfg.replace(horizon=max(cfg.horizon, t))
    s = vertical_coupling_sample(spec, a, cfg, n_paths, probes=[t])
    r, _, z = s.primary(0)
    _, _, zp = s.partner(0)
    return gradient_from_pairs(f_name, a, t, r[:, 0], z, zp)
