"""Acceptance criteria with fixed seeds.

Each check returns a ``Criterion``; ``run_suite`` runs all of them.  The
``full`` suite uses the stated sample sizes.  The ``fast`` suite divides them
(see ``FAST_SCALE``) and widens only the fixed absolute tolerances that are
sample-size driven (KS distances, fixed allowances) by sqrt(scale).  Tolerances
expressed in standard errors adapt on their own.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .. import analytics as A
from ..couplings import (mirror_frame, mirror_sample, partner_marginal_check, two_stage_sample,
                         vertical_coupling_sample)
from ..model_spaces import HEISENBERG, SL2, SL2_COVER, SU2, BasePoint, TotalPoint
from ..sde_sim import PathConfig, Scheme, run_vertical
from .runner import GEOMETRY_TOLERANCES, su2_geometry_errors

SEED = 20240611
FAST_SCALE = 10


@dataclass
class Criterion:
    number: int
    claim: str
    measured: str
    tolerance: str
    passed: bool
    seconds: float = 0.0
    details: Dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] C{self.number:<2d} {self.claim}: {self.measured} (tol {self.tolerance})"


@dataclass(frozen=True)
class Budget:
    scale: int = 1

    def n(self, full: int) -> int:
        return max(1000, full // self.scale)

    def widen(self, tol: float) -> float:
        return tol * math.sqrt(self.scale)


def _fmt(xs, spec="{:.4f}") -> str:
    return "[" + ", ".join(spec.format(x) for x in xs) + "]"


# --- 1 ----------------------------------------------------------------------

def c01_heisenberg_tail(b: Budget) -> Criterion:
    a, ts = 1.0, np.array([0.5, 1.0, 2.0, 5.0, 10.0])
    cfg = PathConfig(dt=0.01, horizon=10.0, seed=SEED + 1, scheme=Scheme.BESSEL_CLOCK)
    run = run_vertical(HEISENBERG, cfg, b.n(200_000), levels=a)
    times = np.where(run.hit, run.sigma, run.horizon)
    tail = A.empirical_tail(times, ts, ~run.hit)
    exact = A.heisenberg_tail_exact(a, ts)
    allow = b.widen(0.005)
    gap = np.abs(tail.survival - exact)
    ok = bool(np.all(gap <= 3 * tail.stderr + allow))
    return Criterion(1, "Heisenberg first-passage tail vs closed form",
                     f"|emp-exact|={_fmt(gap)} 3SE={_fmt(3 * tail.stderr)}",
                     f"3SE+{allow:.4f}", ok,
                     details={"t": ts.tolist(), "empirical": tail.survival.tolist(),
                              "exact": exact.tolist()})


# --- 2 and 3 share their runs ------------------------------------------------------

REFLECTION_CASES = (("heisenberg", HEISENBERG, 1.0), ("sl2-cover", SL2_COVER, 1.0),
                    ("su2", SU2, math.pi / 2))


def _reflection_runs(b: Budget) -> list:
    out = []
    for k, (name, spec, a) in enumerate(REFLECTION_CASES):
        cfg = PathConfig(dt=0.005, horizon=5.0, seed=SEED + 20 + k)
        s = vertical_coupling_sample(spec, a, cfg, b.n(100_000), probes=[1.0, 5.0])
        rows = []
        for j, t in enumerate((1.0, 5.0)):
            r, _, z = s.primary(j)
            rp, _, zp = s.partner(j)
            rpc = A.reflection_principle_check(spec, a, t, s.times, ~s.coupled, z, r[:, 0])
            tail = A.empirical_tail(s.times, [t], ~s.coupled)
            wit = A.empirical_tv_witness(z, zp, spec, a, r[:, 0], rp[:, 0])
            rows.append((name, t, rpc, tail, wit))
        out.extend(rows)
    return out


def c02_reflection_principle(b: Budget, runs=None) -> Criterion:
    runs = runs if runs is not None else _reflection_runs(b)
    z = [abs(rpc.value) / rpc.stderr if rpc.stderr > 0 else 0.0 for _, _, rpc, _, _ in runs]
    ok = all(abs(rpc.value) <= 3 * rpc.stderr for _, _, rpc, _, _ in runs)
    measured = ", ".join(f"{n}@{t:g}:{rpc.value:+.4f}" for n, t, rpc, _, _ in runs)
    return Criterion(2, "reflection principle discrepancy", measured + f" (max {max(z):.2f} SE)",
                     "3 SE", ok, details={"z_scores": z})


def c03_maximality_witness(b: Budget, runs=None) -> Criterion:
    runs = runs if runs is not None else _reflection_runs(b)
    allow = b.widen(0.005)
    gaps, ok = [], True
    for _, _, _, tail, wit in runs:
        se = math.hypot(float(tail.stderr[0]), wit.stderr)
        gap = abs(float(tail.survival[0]) - wit.value)
        gaps.append(gap)
        ok &= gap <= 3 * se + allow
    measured = ", ".join(f"{n}@{t:g}:{tl.survival[0]:.4f}/{w.value:.4f}" for n, t, _, tl, w in runs)
    return Criterion(3, "coupling tail equals TV witness", measured, f"3SE+{allow:.4f}", bool(ok),
                     details={"gaps": gaps})


# --- 4 ----------------------------------------------------------------------

def c04_levy_density(b: Budget) -> Criterion:
    cfg = PathConfig(dt=1e-3, horizon=1.0, seed=SEED + 4)
    run = run_vertical(HEISENBERG, cfg, b.n(100_000), probes=[1.0])
    ks = A.ks_test(run.z[:, 0], lambda z: A.levy_area_cdf(1.0, z))
    tol = b.widen(0.012)
    return Criterion(4, "KS(z_1, sech law)", f"{ks.statistic:.4f} (p={ks.pvalue:.3f})",
                     f"<= {tol:.4f}", ks.statistic <= tol)


# --- 5 ----------------------------------------------------------------------

def c05_hyperbolic_success(b: Budget) -> Criterion:
    rows, ok = [], True
    for k, r in enumerate((0.5, 1.0, 2.0)):
        cfg = PathConfig(dt=0.01, horizon=400.0, seed=SEED + 50 + k)
        frame = mirror_frame(SL2_COVER, TotalPoint(BasePoint(-1, r, 0.0), 0.0),
                             TotalPoint(BasePoint(-1, r, math.pi), 0.0))
        s = mirror_sample(SL2_COVER, frame, cfg, b.n(50_000))
        freq = float(s.met.mean())
        pending = float(np.mean(~s.met & ~s.escaped))
        exact = float(A.hyperbolic_success_prob(r))
        ok &= abs(freq - exact) + pending <= 0.02
        rows.append((r, freq, exact, pending))
    measured = ", ".join(f"r={r:g}:{f:.4f} vs {e:.4f} (open {p:.4f})" for r, f, e, p in rows)
    return Criterion(5, "hyperbolic mirror coupling success", measured, "|diff|+open <= 0.02", bool(ok))


# --- 6 ----------------------------------------------------------------------

def c06_sl2_clt(b: Budget) -> Criterion:
    t = 50.0
    cfg = PathConfig(dt=0.02, horizon=t, seed=SEED + 6, scheme=Scheme.BESSEL_CLOCK)
    run = run_vertical(SL2_COVER, cfg, b.n(50_000), probes=[t])
    res = A.clt_check_sl2(run.z[:, 0], t)
    tol = b.widen(0.05)
    ok = res.ks <= tol and res.domination_ok
    return Criterion(6, "SL(2) cover CLT and one-sided domination",
                     f"KS={res.ks:.4f}, min(F-Phi+3SE)={res.worst_gap:+.4f}",
                     f"KS <= {tol:.3f}, gap >= 0", bool(ok))


# --- 7 ----------------------------------------------------------------------

def c07_sl2_cover_power(b: Budget) -> Criterion:
    a = 1.0
    grid = np.geomspace(10.0, 100.0, 15)
    cfg = PathConfig(dt=0.02, horizon=100.0, seed=SEED + 7, scheme=Scheme.BESSEL_CLOCK)
    run = run_vertical(SL2_COVER, cfg, b.n(50_000), levels=a)
    times = np.where(run.hit, run.sigma, run.horizon)
    tail = A.empirical_tail(times, grid, ~run.hit)
    fit = A.power_fit(tail, (10.0, 100.0))
    c = float(np.max(tail.survival * np.sqrt(grid) / a))
    ok = abs(fit.rate + 0.5) <= 0.1 and c <= 3.0
    return Criterion(7, "SL(2) cover tail order t^-1/2",
                     f"slope={fit.rate:.3f} (R2={fit.r2:.3f}), c={c:.3f}",
                     "slope -0.5+-0.1, c <= 3", bool(ok))


# --- 8 ----------------------------------------------------------------------

def c08_exponential_tails(b: Budget) -> Criterion:
    grid = np.linspace(2.0, 12.0, 21)
    rows, ok = [], True
    for k, (name, spec) in enumerate((("sl2", SL2), ("su2", SU2))):
        rates = []
        for j, a in enumerate((math.pi / 4, math.pi / 2)):
            cfg = PathConfig(dt=0.01, horizon=12.0, seed=SEED + 80 + 2 * k + j,
                             scheme=Scheme.BESSEL_CLOCK)
            run = run_vertical(spec, cfg, b.n(50_000), levels=a)
            times = np.where(run.hit, run.sigma, run.horizon)
            fit = A.exp_rate_fit(A.empirical_tail(times, grid, ~run.hit), (2.0, 12.0))
            ok &= fit.r2 >= 0.98 and fit.rate > 0
            rates.append(fit.rate)
            rows.append(f"{name} 2a={2 * a:.3f}: c={fit.rate:.3f} R2={fit.r2:.4f}")
        ok &= abs(rates[0] - rates[1]) <= 0.25 * max(rates)
    return Criterion(8, "SL(2)/SU(2) exponential tails", "; ".join(rows),
                     "R2 >= 0.98, c > 0, rates within 25%", bool(ok))


# --- 9 ----------------------------------------------------------------------

def c09_nonisotropic(b: Budget) -> Criterion:
    from ..couplings import nonisotropic_spec
    w, a = (1.0, 2.0), 1.0
    spec = nonisotropic_spec(w)
    an = max(w)
    dens_ok, worst = True, -np.inf
    for t in (0.5, 1.0, 2.0, 5.0):
        g = A.nonisotropic_density_grid(w, t)
        excess = float(g.density.max() - 1.0 / (an * t))
        worst = max(worst, excess)
        dens_ok &= excess <= 1e-9
    cfg = PathConfig(dt=1e-3, horizon=1.0, seed=SEED + 9)
    run = run_vertical(spec, cfg, b.n(100_000), probes=[1.0])
    g1 = A.nonisotropic_density_grid(w, 1.0)
    ks = A.ks_test(run.z[:, 0], g1.cdf)
    ks_tol = b.widen(0.02)
    grid = np.array([1.0, 2.0, 3.0, 5.0, 7.0, 10.0])
    s = vertical_coupling_sample(spec, a, PathConfig(dt=0.01, horizon=10.0, seed=SEED + 90),
                                 b.n(100_000))
    tail = A.empirical_tail(s.times, grid, ~s.coupled)
    bound = A.nonisotropic_tail_bound(w, a, grid)
    tail_ok = bool(np.all(tail.survival <= bound + 3 * tail.stderr))
    ok = dens_ok and ks.statistic <= ks_tol and tail_ok
    return Criterion(9, "non-isotropic density and tail bounds",
                     f"max(f-1/(a_n t))={worst:+.2e}, KS={ks.statistic:.4f}, "
                     f"tail/bound={_fmt(tail.survival / bound, '{:.3f}')}",
                     f"excess <= 1e-9, KS <= {ks_tol:.3f}, tail <= bound+3SE", bool(ok))


# --- 10 ---------------------------------------------------------------------

def c10_two_stage(b: Budget) -> Criterion:
    rows, ok = [], True
    for k, (h, v) in enumerate(((1.0, 0.0), (1.0, 2.0))):
        cfg = PathConfig(dt=0.01, horizon=50.0, seed=SEED + 100 + k)
        p = TotalPoint(BasePoint(0, 0.0, 0.0), 0.0)
        q = TotalPoint(BasePoint(0, h, 0.0), v)
        s = two_stage_sample(HEISENBERG, p, q, cfg, b.n(50_000))
        lo = max(h * h, 2 * abs(v)) + 1.0
        grid = np.linspace(lo, 50.0, 25)
        tail = A.empirical_tail(s.times, grid, ~s.coupled)
        scale = np.sqrt(grid) / h if v == 0 else np.minimum(np.sqrt(grid) / h, grid / abs(v))
        m = float(np.max(tail.survival * scale))
        ok &= m <= 10.0
        rows.append(f"(h,v)=({h:g},{v:g}): max={m:.3f}")
    return Criterion(10, "two-stage Heisenberg tail scaling", "; ".join(rows), "<= 10", bool(ok))


# --- 11 ---------------------------------------------------------------------

def c11_partner_law(b: Budget) -> Criterion:
    rows, ok, pmin = [], True, 1.0
    for k, (name, spec, a) in enumerate(REFLECTION_CASES):
        cfg = PathConfig(dt=0.005, horizon=1.0, seed=SEED + 110 + k)
        res = partner_marginal_check(spec, a, cfg, b.n(20_000), 1.0)
        ps = [res[c]["pvalue"] for c in ("x", "y", "z")]
        pmin = min(pmin, *ps)
        ok &= all(p > 0.01 for p in ps)
        rows.append(f"{name}:{_fmt(ps, '{:.3f}')}")
    return Criterion(11, "reflected partner is a Brownian motion from (0,2a)",
                     "; ".join(rows), "all p > 0.01", bool(ok), details={"min_p": pmin})


# --- 12 ---------------------------------------------------------------------

def c12_su2_geometry(b: Budget) -> Criterion:
    errs = su2_geometry_errors(SEED + 12)
    ok = all(errs[k] <= GEOMETRY_TOLERANCES[k] for k in errs)
    return Criterion(12, "SU(2) equidistant sphere and T_b isometry",
                     ", ".join(f"{k}={v:.1e}" for k, v in errs.items()),
                     ", ".join(f"{k} {GEOMETRY_TOLERANCES[k]:g}" for k in errs), bool(ok))


# --- 13 ---------------------------------------------------------------------

def c13_gradient(b: Budget) -> Criterion:
    a, ts = 0.25, (1.0, 2.0, 5.0)
    cfg = PathConfig(dt=0.005, horizon=5.0, seed=SEED + 13)
    s = vertical_coupling_sample(HEISENBERG, a, cfg, b.n(100_000), probes=ts)
    ok, worst, rows = True, -np.inf, []
    for j, t in enumerate(ts):
        r, _, z = s.primary(j)
        _, _, zp = s.partner(j)
        for name in A.TEST_FUNCTIONS:
            g = A.gradient_from_pairs(name, a, t, r[:, 0], z, zp)
            slack = g.value - g.bound - 5 * g.stderr
            worst = max(worst, slack)
            ok &= slack <= 0.0
        g = A.gradient_from_pairs("indicator-below-level", a, t, r[:, 0], z, zp)
        target = float(A.heisenberg_tail_exact(a, t)) / (2 * a)
        ok &= abs(g.value - target) <= 3 * g.stderr
        rows.append(f"t={t:g}: ind={g.value:.4f} vs {target:.4f}+-{3 * g.stderr:.4f}")
    return Criterion(13, "vertical gradient bound ||f||/t",
                     f"max(est-bound-5SE)={worst:+.4f}; " + "; ".join(rows),
                     "<= 0; indicator within 3SE", bool(ok))


# --- 14 ---------------------------------------------------------------------

def c14_horizontal_tv(b: Budget) -> Criterion:
    t, r = 80.0, 1.0
    cfg = PathConfig(dt=0.01, horizon=t, seed=SEED + 14)
    p = TotalPoint(BasePoint(-1, r, 0.0), 0.0)
    q = TotalPoint(BasePoint(-1, r, math.pi), 0.0)
    frame = mirror_frame(SL2_COVER, p, q)
    m = mirror_sample(SL2_COVER, frame, cfg, b.n(50_000))
    # U is the primary's side of the bisecting geodesic: before meeting the
    # primary is in U and its mirror image is not, afterwards they agree
    witness = float(np.mean(~m.met))
    se = math.sqrt(witness * (1 - witness) / m.met.size)
    target = float(A.horizontal_tv_limit_sl2(r))
    two = two_stage_sample(SL2_COVER, p, q, cfg, b.n(50_000))
    tau_tail = float(np.mean(~two.coupled))
    tol = 0.03
    return Criterion(14, "SL(2) cover horizontal TV floor",
                     f"witness={witness:.4f}+-{se:.4f} vs {target:.4f}; P(tau>{t:g})={tau_tail:.4f}",
                     f"|diff| <= {tol}", abs(witness - target) <= tol)


CHECKS: List[Callable] = [c01_heisenberg_tail, c02_reflection_principle, c03_maximality_witness,
                          c04_levy_density, c05_hyperbolic_success, c06_sl2_clt,
                          c07_sl2_cover_power, c08_exponential_tails, c09_nonisotropic,
                          c10_two_stage, c11_partner_law, c12_su2_geometry, c13_gradient,
                          c14_horizontal_tv]


def budget_for(suite: str) -> Budget:
    if suite not in ("fast", "full"):
        raise ValueError(f"unknown suite {suite!r}")
    return Budget(FAST_SCALE if suite == "fast" else 1)


def run_criterion(number: int, suite: str = "full", cache: dict = None) -> Criterion:
    b = budget_for(suite)
    t0 = time.perf_counter()
    if number in (2, 3):
        cache = {} if cache is None else cache
        if suite not in cache:
            cache[suite] = _reflection_runs(b)
        res = CHECKS[number - 1](b, cache[suite])
    else:
        res = CHECKS[number - 1](b)
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(suite: str = "full", only=None, echo: Callable = None) -> List[Criterion]:
    cache: dict = {}
    out = []
    for k in range(1, len(CHECKS) + 1):
        if only and k not in only:
            continue
        res = run_criterion(k, suite, cache)
        if echo:
            echo(res)
        out.append(res)
    return out
