"""Dispatch of experiment kinds to the simulation and estimation layers."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .. import __version__
from .. import analytics as A
from ..couplings import (mirror_frame, mirror_sample, nonisotropic_two_stage_sample,
                         two_stage_sample, vertical_coupling_sample)
from ..model_spaces import (Base, BasePoint, SpaceSpec, TotalPoint, apply_Tb, su2_cyl_to_r4,
                            su2_equidistant_normal, su2_hopf, su2_isometry_Tb, su2_swap_reflection)
from ..sde_sim import run_vertical
from .config import ExperimentSpec, Kind
from .output import emit_csv, emit_json_manifest, emit_svg_plot, STEP_COLUMNS

LOG_PLOT_KINDS = (Kind.EXP_FIT,)


@dataclass
class Table:
    columns: List[str]
    rows: List[list]
    summary: Dict = field(default_factory=dict)
    assertions: List[Dict] = field(default_factory=list)

    def check(self, name: str, measured: float, tolerance: str, passed: bool) -> None:
        self.assertions.append({"name": name, "measured": _clean(measured),
                                "tolerance": tolerance, "passed": bool(passed)})


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return x if math.isfinite(x) else None
    return v


def _is_heisenberg(spec: SpaceSpec) -> bool:
    return spec.kappa == 0 and not spec.circle and spec.factor_weights.size == 1


def _is_weighted(spec: SpaceSpec) -> bool:
    return spec.factor_weights.size > 1


def _start(spec: SpaceSpec, p) -> TotalPoint:
    return TotalPoint(BasePoint(spec.kappa, p.r, p.theta), p.z)


def _ks_tolerance(full_tol: float, full_n: int, n: int) -> float:
    return full_tol * max(1.0, math.sqrt(full_n / n))


# --- kinds ----------------------------------------------------------------------

def _vertical_tail(es: ExperimentSpec, spec: SpaceSpec, fit: bool = False) -> Table:
    t = np.asarray(es.t_grid)
    s = vertical_coupling_sample(spec, es.a, es.path_config, es.n_paths)
    tail = A.empirical_tail(s.times, t, ~s.coupled)
    nan = np.full(t.size, np.nan)
    exact, lo, hi = nan, nan, nan
    if _is_heisenberg(spec):
        exact = A.heisenberg_tail_exact(es.a, t)
        lo, hi = np.array([A.heisenberg_tail_bounds(es.a, x) for x in t]).T
        lo, hi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
    elif _is_weighted(spec) or spec.kappa == 0:
        hi = A.nonisotropic_tail_bound(spec.factor_weights, es.a, t)
    summary = {"coupled_fraction": float(s.coupled.mean()), "n_truncated": tail.n_truncated}
    if fit:
        res = A.exp_rate_fit(tail, es.fit_window)
        fitted = res.prefactor * np.exp(-res.rate * t)
        tab = Table(["t", "survival", "stderr", "fitted"],
                    [list(row) for row in zip(t, tail.survival, tail.stderr, fitted)], summary)
        summary.update(rate=res.rate, prefactor=res.prefactor, r2=res.r2)
        tab.check("log-linear fit quality R2", res.r2, ">= 0.98", res.r2 >= 0.98)
        tab.check("fitted rate", res.rate, "> 0", res.rate > 0)
        return tab
    tab = Table(["t", "survival", "stderr", "exact", "lower_bound", "upper_bound"],
                [list(row) for row in zip(t, tail.survival, tail.stderr, exact, lo, hi)], summary)
    if _is_heisenberg(spec):
        gap = np.abs(tail.survival - exact) - 3 * tail.stderr
        tab.check("max(|survival-exact| - 3SE)", gap.max(), "<= 0.005", gap.max() <= 0.005)
    elif np.all(np.isfinite(hi)):
        ex = tail.survival - hi - 3 * tail.stderr
        tab.check("max(survival - bound - 3SE)", ex.max(), "<= 0", ex.max() <= 0)
    return tab


def _two_stage(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = np.asarray(es.t_grid)
    cfg = es.path_config
    p, q = es.start1, es.start2
    if _is_weighted(spec):
        s = nonisotropic_two_stage_sample(spec.factor_weights, (p.x, p.y, p.z), (q.x, q.y, q.z),
                                          cfg, es.n_paths)
    else:
        s = two_stage_sample(spec, _start(spec, p), _start(spec, q), cfg, es.n_paths)
    tail = A.empirical_tail(s.times, t, ~s.coupled)
    tab = Table(["t", "survival", "stderr"],
                [list(row) for row in zip(t, tail.survival, tail.stderr)],
                {"stage1_met_fraction": float(s.stage1_met.mean()),
                 "coupled_fraction": float(s.coupled.mean())})
    if _is_heisenberg(spec):
        bp, bq = _start(spec, p).base.embedded, _start(spec, q).base.embedded
        h = float(np.hypot(*(bq - bp)))
        # vertical coordinate of p^-1 q
        v = abs(q.z - p.z - 0.5 * (bp[0] * bq[1] - bp[1] * bq[0]))
        if h > 0:
            keep = t >= max(h * h, 2 * v) + 1.0
            scale = np.sqrt(t) / h if v == 0 else np.minimum(np.sqrt(t) / h, t / v)
            if keep.any():
                m = float(np.max((tail.survival * scale)[keep]))
                tab.summary.update(h=h, v=v, scaled_max=m)
                tab.check("max P(tau>t) min(sqrt(t)/h, t/|v|)", m, "<= 10", m <= 10.0)
    return tab


def _density(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = es.t_grid[-1]
    run = run_vertical(spec, es.path_config, es.n_paths, probes=[t])
    z = run.z[:, 0]
    half = float(np.quantile(np.abs(z), 0.999))
    edges = np.linspace(-half, half, es.bins + 1)
    h = A.density_histogram(z, edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    ref = np.full(mid.size, np.nan)
    tab = Table(["z", "height", "reference", "count"], [], {"t": t})
    if _is_heisenberg(spec) or _is_weighted(spec):
        grid = A.nonisotropic_density_grid(spec.factor_weights, t)
        ref = grid(mid)
        ks = A.ks_test(z, grid.cdf)
        tol = _ks_tolerance(0.02 if _is_weighted(spec) else 0.012, 100_000, es.n_paths)
        tab.summary.update(ks=ks.statistic, ks_pvalue=ks.pvalue,
                           density_max=float(grid.density.max()),
                           density_bound=1.0 / (spec.factor_weights.max() * t))
        tab.check("KS distance to the reference law", ks.statistic, f"<= {tol:.4g}", ks.statistic <= tol)
        excess = float(grid.density.max()) - 1.0 / (spec.factor_weights.max() * t)
        tab.check("density max - 1/(alpha_n t)", excess, "<= 1e-9", excess <= 1e-9)
    tab.rows = [list(row) for row in zip(mid, h.heights, ref, h.counts)]
    return tab


def _tv_witness(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = np.asarray(es.t_grid)
    if es.start1 is None:
        s = vertical_coupling_sample(spec, es.a, es.path_config, es.n_paths, probes=t)
        rows, worst = [], -np.inf
        for j, tj in enumerate(t):
            r, _, z = s.primary(j)
            rp, _, zp = s.partner(j)
            tail = A.empirical_tail(s.times, [tj], ~s.coupled)
            w = A.empirical_tv_witness(z, zp, spec, es.a, r[:, 0], rp[:, 0])
            se = math.hypot(float(tail.stderr[0]), w.stderr)
            worst = max(worst, abs(float(tail.survival[0]) - w.value) - 3 * se)
            rows.append([tj, tail.survival[0], tail.stderr[0], w.value, w.stderr])
        tab = Table(["t", "tail", "tail_stderr", "witness", "witness_stderr"], rows)
        tab.check("max(|tail - witness| - 3SE)", worst, "<= 0.005", worst <= 0.005)
        return tab
    frame = mirror_frame(spec, _start(spec, es.start1), _start(spec, es.start2))
    m = mirror_sample(spec, frame, es.path_config, es.n_paths)
    # before meeting the primary lies on its own side of the bisecting
    # geodesic and the partner on the other, afterwards they coincide
    wit = np.array([np.mean(~(m.met & (m.sigma <= tj))) for tj in t])
    se = np.sqrt(wit * (1 - wit) / es.n_paths)
    if spec.base is Base.HYPERBOLIC:
        limit = np.full(t.size, A.horizontal_tv_limit_sl2(frame.r))
    elif spec.base is Base.EUCLIDEAN:
        limit = A.reflected_bm_tail(frame.r * math.cos(frame.theta0), t)
    else:
        limit = np.full(t.size, np.nan)
    tab = Table(["t", "witness", "stderr", "reference"],
                [list(row) for row in zip(t, wit, se, limit)],
                {"met_fraction": float(m.met.mean()), "escaped_fraction": float(m.escaped.mean()),
                 "half_separation": frame.r})
    if spec.base is Base.HYPERBOLIC:
        exact = float(A.hyperbolic_success_prob(frame.r))
        pending = float(np.mean(~m.met & ~m.escaped))
        gap = abs(float(m.met.mean()) - exact) + pending
        tab.summary.update(success_exact=exact, still_open=pending)
        tab.check("|success - exact| + still open", gap, "<= 0.02", gap <= 0.02)
    elif spec.base is Base.EUCLIDEAN:
        z = np.abs(wit - limit) / np.maximum(se, 1e-12)
        tab.check("max |witness - exact| / SE", z.max(), "<= 4", z.max() <= 4.0)
    return tab


def _reflection(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = np.asarray(es.t_grid)
    s = vertical_coupling_sample(spec, es.a, es.path_config, es.n_paths, probes=t)
    rows = []
    for j, tj in enumerate(t):
        r, _, z = s.primary(j)
        e = A.reflection_principle_check(spec, es.a, tj, s.times, ~s.coupled, z, r[:, 0])
        rows.append([tj, e.value, e.stderr, e.value / e.stderr if e.stderr > 0 else 0.0])
    tab = Table(["t", "discrepancy", "stderr", "z_score"], rows)
    worst = max(abs(row[3]) for row in rows)
    tab.check("max |discrepancy| / SE", worst, "<= 3", worst <= 3.0)
    return tab


def _clt(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = es.t_grid[-1]
    run = run_vertical(spec, es.path_config, es.n_paths, probes=[t])
    z = run.z[:, 0]
    res = A.clt_check_sl2(z, t)
    x = np.linspace(-3.0, 3.0, 61)
    xs = np.sort(z / math.sqrt(t))
    f = np.searchsorted(xs, x, side="right") / xs.size
    se = np.sqrt(f * (1 - f) / xs.size)
    tab = Table(["x", "empirical_cdf", "normal_cdf", "stderr"],
                [list(row) for row in zip(x, f, A.normal_cdf(x), se)],
                {"t": t, "ks": res.ks, "worst_gap": res.worst_gap})
    tol = _ks_tolerance(0.05, 50_000, es.n_paths)
    tab.check("KS(z_t/sqrt(t), N(0,1))", res.ks, f"<= {tol:.4g}", res.ks <= tol)
    tab.check("min over [0,2] of F - Phi + 3SE", res.worst_gap, ">= 0", res.domination_ok)
    return tab


def _gradient(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    t = np.asarray(es.t_grid)
    names = es.functions or sorted(A.TEST_FUNCTIONS)
    s = vertical_coupling_sample(spec, es.a, es.path_config, es.n_paths, probes=t)
    tab = Table(["t", "function", "estimate", "stderr", "bound"], [])
    worst = -np.inf
    for j, tj in enumerate(t):
        r, _, z = s.primary(j)
        _, _, zp = s.partner(j)
        for name in names:
            g = A.gradient_from_pairs(name, es.a, tj, r[:, 0], z, zp)
            tab.rows.append([tj, name, g.value, g.stderr, g.bound])
            worst = max(worst, g.value - g.bound - 5 * g.stderr)
            if name == "indicator-below-level" and _is_heisenberg(spec):
                target = float(A.heisenberg_tail_exact(es.a, tj)) / (2 * es.a)
                tab.check(f"indicator estimate at t={tj:g} vs tail/(2a)", g.value - target,
                          f"|.| <= 3SE = {3 * g.stderr:.4g}", abs(g.value - target) <= 3 * g.stderr)
    tab.check("max(estimate - ||f||/t - 5SE)", worst, "<= 0", worst <= 0.0)
    return tab


def su2_geometry_errors(seed: int = 0) -> Dict[str, float]:
    """Worst deviations of the SU(2) model identities (all should vanish)."""
    rng = np.random.default_rng(seed)
    plane = swap = 0.0
    r, th = np.meshgrid(np.linspace(0.0, math.pi, 20), np.linspace(0.0, 2 * math.pi, 20))
    for a in np.linspace(0.1, math.pi, 5):
        n, _ = su2_equidistant_normal(a)
        p = su2_cyl_to_r4(r.ravel(), th.ravel(), np.full(r.size, a))
        plane = max(plane, float(np.max(np.abs(p @ n))))
        # the reflection across S_a swaps the fiber points at heights 0 and 2a
        R = su2_swap_reflection(a)
        p0 = su2_cyl_to_r4(0.0, 0.0, 0.0)
        swap = max(swap, float(np.max(np.abs(R @ p0 - su2_cyl_to_r4(0.0, 0.0, 2 * a)))))
    orth = fiber = 0.0
    for b in rng.uniform(0.0, 2 * math.pi, 10):
        T = su2_isometry_Tb(b)
        orth = max(orth, float(np.max(np.abs(T @ T.T - np.eye(4)))),
                   float(np.max(np.abs(T @ T - np.eye(4)))))
        rr, tt = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        zs = rng.uniform(-2 * math.pi, 2 * math.pi, 8)
        img = su2_hopf(apply_Tb(b, su2_cyl_to_r4(np.full(8, rr), np.full(8, tt), zs)))
        fiber = max(fiber, float(np.max(np.abs(img - img[0]))))
    return {"plane": plane, "orthogonal": orth, "fiber": fiber, "swap": swap}


GEOMETRY_TOLERANCES = {"plane": 1e-12, "orthogonal": 1e-12, "fiber": 1e-10, "swap": 1e-12}


def _geometry(es: ExperimentSpec, spec: SpaceSpec) -> Table:
    errs = su2_geometry_errors(es.seed)
    tab = Table(["check", "worst_error", "tolerance", "passed"], [])
    for k, v in errs.items():
        tol = GEOMETRY_TOLERANCES[k]
        tab.rows.append([k, v, tol, v <= tol])
        tab.check(k, v, f"<= {tol:g}", v <= tol)
    return tab


HANDLERS = {
    Kind.VERTICAL_TAIL: _vertical_tail,
    Kind.EXP_FIT: lambda es, spec: _vertical_tail(es, spec, fit=True),
    Kind.TWO_STAGE_TAIL: _two_stage,
    Kind.DENSITY_HISTOGRAM: _density,
    Kind.TV_WITNESS: _tv_witness,
    Kind.REFLECTION_PRINCIPLE: _reflection,
    Kind.CLT_CHECK: _clt,
    Kind.GRADIENT_BOUND: _gradient,
    Kind.GEOMETRY_UNIT: _geometry,
}


def compute(es: ExperimentSpec) -> Table:
    """Run the experiment in memory (no files written)."""
    return HANDLERS[es.kind](es, es.space_spec)


def run_experiment(es: ExperimentSpec, out_dir: Optional[Path] = None, plot: bool = True) -> dict:
    """Run, write ``<stem>.csv`` (+ ``.svg``) and ``<stem>.json``; returns the manifest."""
    t0 = time.perf_counter()
    tab = compute(es)
    wall = time.perf_counter() - t0
    out = Path(out_dir) if out_dir is not None else Path(es.output.dir)
    csv_path = out / f"{es.stem}.csv"
    outputs = {"csv": {"path": csv_path.name, "sha256": emit_csv(csv_path, tab.columns, tab.rows)}}
    # gradient tables interleave functions and geometry tables are not series
    if plot and tab.rows and es.kind not in (Kind.GRADIENT_BOUND, Kind.GEOMETRY_UNIT):
        numeric = [c for c in tab.columns[1:] if "stderr" not in c and c != "count"]
        svg_path = out / f"{es.stem}.svg"
        x = [float(r[0]) for r in tab.rows]
        series = {c: [float(r[tab.columns.index(c)]) for r in tab.rows] for c in numeric}
        emit_svg_plot(svg_path, x, series, logy=es.kind in LOG_PLOT_KINDS, title=es.name,
                      xlabel=tab.columns[0], steps=[c for c in numeric if c in STEP_COLUMNS])
        outputs["plot"] = {"path": svg_path.name}
    manifest = {
        "name": es.name,
        "kind": es.kind.value,
        "anchor": es.anchor,
        "spec": es.model_dump(mode="json"),
        "code_version": __version__,
        "wall_time_s": round(wall, 3),
        "outputs": outputs,
        "columns": tab.columns,
        "n_rows": len(tab.rows),
        "summary": _clean(tab.summary),
        "assertions": tab.assertions,
        "passed": all(a["passed"] for a in tab.assertions),
    }
    emit_json_manifest(out / f"{es.stem}.json", manifest)
    return manifest
