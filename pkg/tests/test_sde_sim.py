import math

import numpy as np
import pytest
from scipy import stats

from coupling_lab import _kernels as K
from coupling_lab.model_spaces import HEISENBERG, SL2_COVER, SU2, BasePoint, make_point
from coupling_lab.sde_sim import (ConfigError, PathConfig, Scheme, configure_threads,
                                  first_passage_vertical, rng_stream, run_vertical,
                                  simulate_bessel_clock, simulate_path, step_base, time_grid)

U = np.uint64

# Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expect", KAT)
def test_philox_known_answers(ctr, key, expect):
    out = K.philox4x32(*(U(c) for c in ctr), *(U(k) for k in key))
    assert tuple(int(v) for v in out) == expect


def test_stream_reproducible_and_distinct():
    a = rng_stream(7, 3, 1).normal(1000)
    b = rng_stream(7, 3, 1).normal(1000)
    c = rng_stream(7, 4, 1).normal(1000)
    d = rng_stream(8, 3, 1).normal(1000)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)


def test_stream_continues():
    s = rng_stream(1, 0, 5)
    first, second = s.uniform(10), s.uniform(10)
    whole = rng_stream(1, 0, 5).uniform(20)
    assert np.array_equal(np.concatenate([first, second]), whole)


def test_stream_distributions():
    u = rng_stream(11, 0, 0).uniform(100_000)
    assert u.min() > 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    g = rng_stream(11, 0, 1).normal(100_000)
    assert stats.kstest(g, "norm").pvalue > 1e-3


def test_path_config_validation():
    with pytest.raises(ConfigError):
        PathConfig(dt=0.0)
    with pytest.raises(ConfigError):
        PathConfig(dt=0.1, horizon=0.01)
    with pytest.raises(ConfigError):
        PathConfig(seed=-1)
    cfg = PathConfig(dt=1e-3)
    assert cfg.pole_guard == pytest.approx(4 * math.sqrt(1e-3))
    assert cfg.replace(seed=5).seed == 5


def test_threads_env(monkeypatch):
    monkeypatch.setenv("COUPLING_LAB_THREADS", "1")
    assert configure_threads() == 1
    monkeypatch.setenv("COUPLING_LAB_THREADS", "lots")
    with pytest.raises(ConfigError):
        configure_threads()


def test_time_grid():
    g = time_grid(1.0, 0.3)
    assert g[0] == 0.0 and g[-1] == 1.0 and len(g) == 5


@pytest.mark.parametrize("scheme", list(Scheme))
def test_batch_split_invariance(scheme):
    cfg = PathConfig(dt=0.01, horizon=2.0, seed=9, scheme=scheme)
    a = run_vertical(SL2_COVER, cfg, 300, levels=0.5, probes=[1.0, 2.0])
    b = run_vertical(SL2_COVER, cfg, 300, levels=0.5, probes=[1.0, 2.0], batch_size=7)
    for f in ("hit", "sigma", "z", "r", "theta", "clock"):
        assert np.array_equal(getattr(a, f), getattr(b, f)), f
    # a sub-range of paths reproduces the same rows
    c = run_vertical(SL2_COVER, cfg, 50, levels=0.5, probes=[1.0, 2.0], path_offset=100)
    assert np.array_equal(c.z, a.z[100:150])


def test_step_base_plane_is_euclidean():
    p = BasePoint(0, 1.0, 0.0)
    q = step_base(HEISENBERG, p, 0.1, 0.2, 0.01, scheme=Scheme.EMBEDDED_GEODESIC)
    assert np.allclose(q.embedded, [1.1, 0.2])
    with pytest.raises(ConfigError):
        step_base(HEISENBERG, p, 0.1, 0.2, 0.0)


@pytest.mark.parametrize("kappa", [-1, 1])
def test_geodesic_step_preserves_distance(kappa):
    # a step of length l from the origin lands at distance l
    rn, dth, area = K.geo_step(kappa, 0.0, 0.3, 0.4)
    assert rn == pytest.approx(0.5) and area == 0.0


def test_simulate_path_shapes_and_start():
    cfg = PathConfig(dt=0.01, horizon=0.5, seed=3)
    tr = simulate_path(SU2, make_point(SU2, 0.5, 1.0, 0.2), cfg)
    assert len(tr) == 51 and tr.r.shape == (1, 51)
    assert tr.r[0, 0] == pytest.approx(0.5) and tr.z[0] == pytest.approx(0.2)
    assert np.all(tr.z > -2 * math.pi) and np.all(tr.z <= 2 * math.pi)
    assert np.all(np.diff(tr.clock) >= 0)


def test_heisenberg_moments():
    # E r_t^2 = 2t and Var z_t = t^2 / 4 (sech law scale) for the Heisenberg lift
    cfg = PathConfig(dt=0.01, horizon=1.0, seed=21)
    b = run_vertical(HEISENBERG, cfg, 20_000, probes=[1.0])
    r2 = b.r[:, 0, 0] ** 2
    z = b.z[:, 0]
    assert abs(r2.mean() - 2.0) < 4 * r2.std() / math.sqrt(r2.size)
    assert abs(z.var() - 0.25) < 0.02


def test_bessel_clock_matches_rate_integral():
    grid, r, clock = simulate_bessel_clock(HEISENBERG, PathConfig(dt=0.01, horizon=1.0, seed=2), 5)
    # trapezoid on the stored radii is close to the simulated clock
    trap = np.cumsum(0.125 * (r[:, 0, 1:] ** 2 + r[:, 0, :-1] ** 2) * np.diff(grid), axis=1)
    assert np.allclose(clock[:, 1:], trap, rtol=0.05, atol=1e-3)


def test_first_passage_on_trajectory():
    cfg = PathConfig(dt=0.01, horizon=5.0, seed=4)
    tr = simulate_path(HEISENBERG, None, cfg)
    rec = first_passage_vertical(HEISENBERG, tr, 0.5, cfg)
    if rec.hit:
        assert 0 <= rec.sub_step_fraction <= 1
        assert tr.times[rec.crossing_index] <= rec.time <= tr.times[rec.crossing_index + 1]
    start_above = first_passage_vertical(HEISENBERG, tr, -1.0, cfg)
    assert start_above.hit and start_above.time == 0.0
