"""Named experiment presets, one per checked statement.

``anchor`` states the claim a preset tests.  Sample sizes are moderate;
``preset(name, n_paths=...)`` overrides them (the smoke tests use that).
"""
from __future__ import annotations

import math
from typing import Dict, Optional

from .config import ExperimentSpec, validate_config

_PRESETS: Dict[str, dict] = {
    "hmax-exact-tail": dict(
        kind="VerticalTail", space={"name": "heisenberg"}, a=1.0,
        t_grid=[0.5, 1.0, 2.0, 5.0, 10.0], n_paths=50_000, dt=0.01, scheme="BesselClock",
        anchor="Heisenberg vertical coupling time: P(sigma_a > t) = (4/pi) arctan(tanh(pi a / 2t)), "
               "between 2a/t - (pi^2/3)(a/t)^3 and 2a/t"),
    "reflection-principle": dict(
        kind="ReflectionPrinciple", space={"name": "sl2-cover"}, a=1.0,
        t_grid=[1.0, 2.0, 5.0], n_paths=20_000, dt=0.01,
        anchor="reflection principle for the vertical passage: P(sigma_a > t) = 1 - 2 P(z_t >= a)"),
    "maximality-witness": dict(
        kind="TvWitness", space={"name": "su2"}, a=math.pi / 2,
        t_grid=[0.5, 1.0, 2.0, 5.0], n_paths=20_000, dt=0.01,
        anchor="the vertical reflection coupling is maximal: its tail equals the measure gap "
               "of the witness hemisphere"),
    "sech-density": dict(
        kind="DensityHistogram", space={"name": "heisenberg"}, t_grid=[1.0],
        n_paths=50_000, dt=1e-3,
        anchor="Levy area density at time t is (1/t) sech(pi z / t)"),
    "hbm-success": dict(
        kind="TvWitness", space={"name": "sl2-cover"},
        start1={"r": 1.0, "theta": 0.0}, start2={"r": 1.0, "theta": math.pi},
        t_grid=[1.0, 5.0, 20.0, 100.0, 400.0], n_paths=20_000, dt=0.01,
        anchor="hyperbolic mirror coupling at half-separation r succeeds with probability "
               "1 - (4/pi) arctan(tanh(r/2))"),
    "sl2u-clt": dict(
        kind="CltCheck", space={"name": "sl2-cover"}, t_grid=[50.0], n_paths=20_000,
        dt=0.02, scheme="BesselClock",
        anchor="on the SL(2) universal cover z_t / sqrt(t) tends to N(0,1) with F_t(x) >= Phi(x) for x >= 0"),
    "sl2-expfit": dict(
        kind="ExpFit", space={"name": "sl2"}, a=math.pi / 2,
        t_grid=[float(t) for t in range(1, 13)], fit_window=[2.0, 12.0], n_paths=20_000,
        dt=0.01, scheme="BesselClock",
        anchor="SL(2) vertical coupling time has an exponential tail C exp(-ct)"),
    "su2-expfit": dict(
        kind="ExpFit", space={"name": "su2"}, a=math.pi / 2,
        t_grid=[float(t) for t in range(1, 13)], fit_window=[2.0, 12.0], n_paths=20_000,
        dt=0.01, scheme="BesselClock",
        anchor="SU(2) vertical coupling time has an exponential tail C exp(-ct)"),
    "su2-geometry": dict(
        kind="GeometryUnit", space={"name": "su2"}, t_grid=[1.0], n_paths=100,
        anchor="SU(2): fiber points at height a lie on the great sphere equidistant from heights "
               "0 and 2a; T_b is an orthogonal involution mapping fibers to fibers"),
    "nonisotropic-bounds": dict(
        kind="VerticalTail", space={"name": "nonisotropic-heisenberg", "weights": [1.0, 2.0]},
        a=1.0, t_grid=[1.0, 2.0, 3.0, 5.0, 7.0, 10.0], n_paths=20_000, dt=0.01,
        anchor="weighted Heisenberg group: vertical coupling tail at most 2a / (alpha_n t)"),
    "two-stage-heisenberg": dict(
        kind="TwoStageTail", space={"name": "heisenberg"},
        start1={"r": 0.0, "theta": 0.0, "z": 0.0}, start2={"r": 1.0, "theta": 0.0, "z": 2.0},
        t_grid=[5.0, 10.0, 20.0, 30.0, 40.0, 50.0], n_paths=20_000, dt=0.01,
        anchor="two-stage Heisenberg coupling: P(tau > t) <= C max(h / sqrt(t), |v| / t)"),
    "gradient-vertical": dict(
        kind="GradientBound", space={"name": "heisenberg"}, a=0.25, t_grid=[1.0, 2.0, 5.0],
        n_paths=20_000, dt=0.01,
        anchor="vertical gradient bound |Z P_t f| <= ||f||_inf / t on the Heisenberg group"),
}


def list_presets() -> Dict[str, str]:
    """Preset name -> anchor."""
    return {k: v["anchor"] for k, v in _PRESETS.items()}


def preset(name: str, n_paths: Optional[int] = None, seed: int = 1,
           out_dir: str = "results") -> ExperimentSpec:
    try:
        raw = dict(_PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(_PRESETS)}") from None
    raw.update(name=name, seed=seed, output={"dir": out_dir})
    if n_paths is not None:
        raw["n_paths"] = n_paths
    return validate_config(raw, f"preset {name}")
