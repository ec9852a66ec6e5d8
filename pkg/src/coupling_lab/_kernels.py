"""Compiled per-path kernels.

Every path owns its random numbers: a Philox4x32-10 block is addressed by
(seed, path index, channel, step index), so the output of a kernel does not
depend on how paths are split across calls or threads.

Base curvature is passed as ``kappa`` in {0, -1, +1} (plane, hyperbolic
plane, sphere).  Base points are stored in polar form (r, theta) with theta
unwrapped; each step is taken in the rotated frame where the current point
sits at theta = 0, which keeps the hyperboloid computations free of the
cancellation that plagues raw embedded coordinates at large r.
"""
import math

import numpy as np
from numba import njit, prange

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)

SCHEME_GEODESIC = 0
SCHEME_POLAR = 1
SCHEME_BESSEL = 2

CH_BRIDGE = 0
CH_CLOCK = 1
CH_AXIS = 2
CH_BASE = 3
CH_BRIDGE_AREA = 32

TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all arguments are uint64 holding 32 bits."""
    for rnd in range(10):
        if rnd > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _u53(w0, w1):
    # 53-bit uniform on the open interval (0, 1)
    return (float(w0 >> _S5) * 67108864.0 + float(w1 >> _S6) + 0.5) / 9007199254740992.0


@njit(cache=True, inline="always")
def uniform_pair(k0, k1, path, channel, index):
    pth = np.uint64(path)
    w0, w1, w2, w3 = philox4x32(np.uint64(index) & _MASK, np.uint64(channel) & _MASK,
                                pth & _MASK, pth >> _S32, k0, k1)
    return _u53(w0, w1), _u53(w2, w3)


@njit(cache=True, inline="always")
def normal_pair(k0, k1, path, channel, index):
    u1, u2 = uniform_pair(k0, k1, path, channel, index)
    rad = math.sqrt(-2.0 * math.log(u1))
    ang = TWO_PI * u2
    return rad * math.cos(ang), rad * math.sin(ang)


@njit(cache=True)
def fill_block(k0, k1, path, channel, start, count, gaussian, out):
    """Fill ``out`` with ``count`` draws starting at pair index ``start``."""
    n = 0
    idx = start
    while n < count:
        if gaussian:
            a, b = normal_pair(k0, k1, path, channel, idx)
        else:
            a, b = uniform_pair(k0, k1, path, channel, idx)
        out[n] = a
        if n + 1 < count:
            out[n + 1] = b
        n += 2
        idx += 1


@njit(cache=True, inline="always")
def area_rate(kappa, r):
    if kappa == 0:
        return 0.25 * r * r
    if kappa < 0:
        t = math.tanh(0.5 * r)
        return t * t
    t = math.tan(0.5 * r)
    return t * t


@njit(cache=True, inline="always")
def geo_step(kappa, r, l1, l2):
    """Exponential-map step from (r, 0) along l1*e_r + l2*e_theta.

    Returns the new radius, the angle increment, and the signed area of the
    geodesic triangle (origin, old point, new point).
    """
    ll = math.sqrt(l1 * l1 + l2 * l2)
    if ll == 0.0:
        return r, 0.0, 0.0
    if kappa == 0:
        qx = r + l1
        return math.hypot(qx, l2), math.atan2(l2, qx), 0.5 * r * l2
    if kappa > 0:
        cl = math.cos(ll)
        s = math.sin(ll) / ll
        cr = math.cos(r)
        sr = math.sin(r)
        q0 = cl * cr - s * l1 * sr
        q1 = cl * sr + s * l1 * cr
        q2 = s * l2
        rn = math.atan2(math.hypot(q1, q2), q0)
        area = 2.0 * math.atan2(sr * q2, 1.0 + cr + q0 + cl)
        return rn, math.atan2(q2, q1), area
    cl = math.cosh(ll)
    s = math.sinh(ll) / ll
    cr = math.cosh(r)
    sr = math.sinh(r)
    q0 = cl * cr + s * l1 * sr
    q1 = cl * sr + s * l1 * cr
    q2 = s * l2
    rn = math.asinh(math.hypot(q1, q2))
    area = 2.0 * math.atan2(sr * q2, 1.0 + cr + q0 + cl)
    return rn, math.atan2(q2, q1), area


@njit(cache=True, inline="always")
def clock_increment(kappa, r, rn, l1, l2, h):
    """Clock increment over one step of length h.

    For the plane this is the conditional mean of the integral of r^2/4 given
    the endpoints of the Brownian bridge; curved bases use Simpson's rule on
    the geodesic chord.
    """
    if kappa == 0:
        return h * (r * r + r * (r + l1) + rn * rn) / 12.0 + h * h / 12.0
    rm, _, _ = geo_step(kappa, r, 0.5 * l1, 0.5 * l2)
    return h * (area_rate(kappa, r) + 4.0 * area_rate(kappa, rm) + area_rate(kappa, rn)) / 6.0


@njit(cache=True, inline="always")
def polar_em(kappa, r, sq, x1, x2, rg):
    """Euler-Maruyama step of the polar SDEs; geodesic step inside the pole guard."""
    if r < rg or (kappa > 0 and r > math.pi - rg):
        return geo_step(kappa, r, sq * x1, sq * x2)
    if kappa == 0:
        g = r
        drift = 0.5 / r
        c = 0.5 * r
    elif kappa < 0:
        g = math.sinh(r)
        drift = 0.5 / math.tanh(r)
        c = math.tanh(0.5 * r)
    else:
        g = math.sin(r)
        drift = 0.5 / math.tan(r)
        c = math.tan(0.5 * r)
    h = sq * sq
    rn = r + sq * x1 + drift * h
    dth = sq * x2 / g
    if rn < 0.0:
        rn = -rn
        dth += math.pi
    if kappa > 0 and rn > math.pi:
        rn = TWO_PI - rn
        dth += math.pi
    return rn, dth, c * sq * x2


@njit(cache=True, inline="always")
def crossing(z, zn, ds, a, circle, bridge, u):
    """Return the sub-step fraction of a first passage, or -1.0 if none.

    Line fibers watch the level a; circle fibers watch the exit of the
    unwrapped coordinate from (a - 2*pi, a).
    """
    up = a
    if zn >= up:
        if zn == z:
            return 1.0
        return (up - z) / (zn - z)
    if circle:
        low = a - TWO_PI
        if zn <= low:
            if zn == z:
                return 1.0
            return (z - low) / (z - zn)
    if bridge and ds > 0.0:
        du = up - z
        dn = up - zn
        p = math.exp(-2.0 * du * dn / ds)
        frac = du / (du + dn)
        if circle:
            el = z - (a - TWO_PI)
            en = zn - (a - TWO_PI)
            pl = math.exp(-2.0 * el * en / ds)
            if u < pl:
                return el / (el + en)
            u -= pl
        if u < p:
            return frac
    return -1.0


@njit(cache=True, parallel=True)
def vertical_kernel(kappa, circle, weights, scheme, bridge, rg, h,
                    r0, th0, z0, levels, horizons, probes,
                    path0, k0, k1, ch0,
                    out_hit, out_sigma, out_axis, out_pr, out_pth, out_pz, out_ps):
    """Simulate lifts from a common start and record first passages.

    levels[p] is the level a for path p (inf disables detection);
    horizons[p] its truncation time.  Paths keep running after the passage
    until the last probe time so that states at probe times are available.
    """
    n = levels.shape[0]
    nf = weights.shape[0]
    npb = probes.shape[0]
    for p in prange(n):
        gp = path0 + p
        a = levels[p]
        horizon = horizons[p]
        r = r0.copy()
        th = th0.copy()
        rn = np.empty(nf)
        thn = np.empty(nf)
        z = z0
        s_clock = 0.0
        t = 0.0
        k = 0
        hit = False
        sigma = horizon
        ip = 0
        out_hit[p] = False
        for i in range(nf):
            out_axis[p, i] = np.nan
        while True:
            while ip < npb and probes[ip] <= t + 1e-12:
                for i in range(nf):
                    out_pr[p, i, ip] = r[i]
                    out_pth[p, i, ip] = th[i]
                out_pz[p, ip] = z
                out_ps[p, ip] = s_clock
                ip += 1
            if t >= horizon - 1e-12:
                break
            if hit and ip >= npb:
                break
            target = min(t + h, horizon)
            if ip < npb and probes[ip] < target:
                target = probes[ip]
            hs = target - t
            sq = math.sqrt(hs)
            dz = 0.0
            ds = 0.0
            for i in range(nf):
                x1, x2 = normal_pair(k0, k1, gp, ch0 + CH_BASE + i, k)
                if scheme == SCHEME_POLAR:
                    rr, dth, area = polar_em(kappa, r[i], sq, x1, x2, rg)
                    ci = hs * area_rate(kappa, 0.5 * (r[i] + rr))
                else:
                    rr, dth, area = geo_step(kappa, r[i], sq * x1, sq * x2)
                    ci = clock_increment(kappa, r[i], rr, sq * x1, sq * x2, hs)
                    if scheme == SCHEME_GEODESIC:
                        # area between the chord and the path: a Levy area of a
                        # Brownian bridge, variance hs^2 / 12 to leading order
                        g, _ = normal_pair(k0, k1, gp, ch0 + CH_BRIDGE_AREA + i, k)
                        area += hs * g / math.sqrt(12.0)
                w = weights[i]
                rn[i] = rr
                thn[i] = th[i] + dth
                dz += w * area
                ds += w * w * ci
            if scheme == SCHEME_BESSEL:
                g, _ = normal_pair(k0, k1, gp, ch0 + CH_CLOCK, k)
                dz = math.sqrt(ds) * g
            zn = z + dz
            if not hit and a < np.inf:
                u = 0.0
                if bridge:
                    u, _ = uniform_pair(k0, k1, gp, ch0 + CH_BRIDGE, k)
                frac = crossing(z, zn, ds, a, circle, bridge, u)
                if frac >= 0.0:
                    hit = True
                    sigma = t + frac * hs
                    out_hit[p] = True
                    for i in range(nf):
                        ri = r[i] + frac * (rn[i] - r[i])
                        if ri < 1e-9:
                            ua, _ = uniform_pair(k0, k1, gp, ch0 + CH_AXIS, i)
                            out_axis[p, i] = TWO_PI * ua
                        else:
                            out_axis[p, i] = th[i] + frac * (thn[i] - th[i])
            for i in range(nf):
                r[i] = rn[i]
                th[i] = thn[i]
            z = zn
            s_clock += ds
            if ip < npb and target == probes[ip]:
                t = probes[ip]
            else:
                t = target
            k += 1
        out_sigma[p] = sigma
        while ip < npb:
            for i in range(nf):
                out_pr[p, i, ip] = np.nan
                out_pth[p, i, ip] = np.nan
            out_pz[p, ip] = np.nan
            out_ps[p, ip] = np.nan
            ip += 1


@njit(cache=True, inline="always")
def signed_axis_distance(kappa, r, th):
    # signed distance to the geodesic through the origin at angle pi/2
    c = math.cos(th)
    if kappa == 0:
        return r * c
    if kappa < 0:
        return math.asinh(math.sinh(r) * c)
    v = math.sin(r) * c
    if v > 1.0:
        v = 1.0
    elif v < -1.0:
        v = -1.0
    return math.asin(v)


@njit(cache=True, parallel=True)
def mirror_kernel(kappa, h, r0, th0, horizons, escape, probes,
                  path0, k0, k1, ch0,
                  out_met, out_sigma, out_area, out_escaped, out_pr, out_pth):
    """Mirror coupling of a base path started at (r0, th0) with its reflection
    across the geodesic at angle pi/2; stops at the meeting time.

    out_area holds the area swept by the primary path up to the meeting
    (or up to truncation).
    """
    n = horizons.shape[0]
    npb = probes.shape[0]
    for p in prange(n):
        gp = path0 + p
        horizon = horizons[p]
        r = r0
        th = th0
        zz = 0.0
        t = 0.0
        k = 0
        rho = signed_axis_distance(kappa, r, th)
        met = rho <= 0.0
        sigma = 0.0 if met else horizon
        esc = False
        ip = 0
        while True:
            while ip < npb and probes[ip] <= t + 1e-12:
                out_pr[p, ip] = r
                out_pth[p, ip] = th
                ip += 1
            if met or t >= horizon - 1e-12:
                break
            if escape > 0.0 and rho > escape:
                esc = True
                break
            target = min(t + h, horizon)
            if ip < npb and probes[ip] < target:
                target = probes[ip]
            hs = target - t
            sq = math.sqrt(hs)
            x1, x2 = normal_pair(k0, k1, gp, ch0 + CH_BASE, k)
            rn, dth, area = geo_step(kappa, r, sq * x1, sq * x2)
            thn = th + dth
            rhon = signed_axis_distance(kappa, rn, thn)
            frac = -1.0
            if rhon <= 0.0:
                frac = rho / (rho - rhon)
            else:
                u, _ = uniform_pair(k0, k1, gp, ch0 + CH_BRIDGE, k)
                if u < math.exp(-2.0 * rho * rhon / hs):
                    frac = rho / (rho + rhon)
            if frac >= 0.0:
                met = True
                sigma = t + frac * hs
                zz += frac * area
            else:
                zz += area
            r = rn
            th = thn
            rho = rhon
            if ip < npb and target == probes[ip]:
                t = probes[ip]
            else:
                t = target
            k += 1
        out_met[p] = met
        out_sigma[p] = sigma
        out_area[p] = zz
        out_escaped[p] = esc
        while ip < npb:
            out_pr[p, ip] = np.nan
            out_pth[p, ip] = np.nan
            ip += 1


@njit(cache=True, parallel=True)
def sync_mirror_kernel(weights, h, x0, y0, yt0, dz0, horizons, path0, k0, k1, ch0,
                       out_met, out_t1, out_area_diff):
    """Product-plane coupling: x synchronous, y mirrored until each factor's
    y-coordinates meet.  Tracks z - z_tilde through the chord areas and
    returns it at the time the last factor meets.
    """
    n = horizons.shape[0]
    nf = weights.shape[0]
    for p in prange(n):
        gp = path0 + p
        horizon = horizons[p]
        x = x0.copy()
        y = y0.copy()
        yt = yt0.copy()
        met = np.zeros(nf, dtype=np.bool_)
        diff = dz0
        t = 0.0
        k = 0
        nmet = 0
        for i in range(nf):
            if y[i] == yt[i]:
                met[i] = True
                nmet += 1
        t1 = 0.0
        while nmet < nf and t < horizon - 1e-12:
            target = min(t + h, horizon)
            hs = target - t
            sq = math.sqrt(hs)
            last_frac = 0.0
            for i in range(nf):
                dx, dy = normal_pair(k0, k1, gp, ch0 + CH_BASE + i, k)
                dx *= sq
                dy *= sq
                xn = x[i] + dx
                yn = y[i] + dy
                if met[i]:
                    ytn = yt[i] + dy
                else:
                    ytn = yt[i] - dy
                    d = yt[i] - y[i]
                    dn = ytn - yn
                    frac = -1.0
                    if d * dn <= 0.0:
                        frac = d / (d - dn) if d != dn else 1.0
                    else:
                        u, _ = uniform_pair(k0, k1, gp, ch0 + 64 + i, k)
                        if u < math.exp(-2.0 * d * dn / (4.0 * hs)):
                            frac = abs(d) / (abs(d) + abs(dn))
                    if frac >= 0.0:
                        met[i] = True
                        nmet += 1
                        ytn = yn
                        if frac > last_frac:
                            last_frac = frac
                w = weights[i]
                diff += 0.5 * w * ((x[i] * yn - xn * y[i]) - (x[i] * ytn - xn * yt[i]))
                x[i] = xn
                y[i] = yn
                yt[i] = ytn
            if nmet == nf:
                t1 = t + last_frac * hs
            t = target
            k += 1
        out_met[p] = nmet == nf
        out_t1[p] = t1 if nmet == nf else horizon
        out_area_diff[p] = diff
