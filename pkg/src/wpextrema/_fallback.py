"""Pure numpy implementation of the path kernels.

Mirrors ``_kernels.pyx`` function for function and draw for draw, vectorised
across paths instead of looping over them.  Integer outputs agree exactly
with the compiled kernels; floating outputs agree to rounding (numpy and libm
may differ in the last ulp of ``log``/``erfc``).
"""

from __future__ import annotations

import numpy as np

from ._rng import TWO_M53, keys_from_hash, norm_cdf_v, norm_ppf_v, raw_v, uniform_v

LAST_STEP_SPLITS = 32
_CHUNK = 4096


def _chunks(n: int, size: int = _CHUNK):
    for lo in range(0, n, size):
        yield lo, min(n, lo + size)


def _bridge_sup(w0, w1, r0, r1, dt, u):
    e = -0.5 * dt * np.log(u)
    if r1 == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (w0 + e / (-w1)) / r0
        return np.where(w1 >= 0.0, np.inf, val)
    s = r0 * w1 + r1 * w0
    d = r0 * w1 - r1 * w0
    return (s + np.sqrt(d * d + 4.0 * r0 * r1 * e)) / (2.0 * r0 * r1)


def _bridge_inf(w0, w1, r0, r1, dt, u):
    e = -0.5 * dt * np.log(u)
    if r1 == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (w0 - e / w1) / r0
        return np.where(w1 <= 0.0, -np.inf, val)
    s = r0 * w1 + r1 * w0
    d = r0 * w1 - r1 * w0
    return (s - np.sqrt(d * d + 4.0 * r0 * r1 * e)) / (2.0 * r0 * r1)


def bridge_extrema(p0s, n_steps, seed_hash, start, level, continuous):
    p0s = np.ascontiguousarray(p0s, dtype=np.float64)
    n_paths = p0s.shape[0]
    pmax = np.empty(n_paths)
    pmin = np.empty(n_paths)
    y = np.empty(n_paths, dtype=np.int8)
    tau = np.empty(n_paths, dtype=np.int64)
    ptau = np.empty(n_paths)
    check = level == level
    dt = 1.0 / n_steps
    sd = np.sqrt(dt)
    rr = np.sqrt(1.0 - np.arange(n_steps + 1) / n_steps)
    rr[n_steps] = 0.0
    for lo, hi in _chunks(n_paths):
        keys = keys_from_hash(seed_hash, start + lo, hi - lo)
        p0 = p0s[lo:hi]
        c = -norm_ppf_v(p0)
        m = hi - lo
        w = np.zeros(m)
        wbuf = np.empty((m, n_steps + 1)) if continuous else None
        if continuous:
            wbuf[:, 0] = 0.0
        zmax = np.full(m, -np.inf)
        zmin = np.full(m, np.inf)
        t_hit = np.full(m, -1, dtype=np.int64)
        p_hit = np.zeros(m)
        if check:
            pre = p0 >= level
            t_hit[pre] = 0
            p_hit[pre] = p0[pre]
        for k in range(1, n_steps):
            w = w + sd * norm_ppf_v(uniform_v(keys, 3 * (k - 1)))
            if continuous:
                wbuf[:, k] = w
            z = (w - c) * (1.0 / rr[k])
            np.maximum(zmax, z, out=zmax)
            np.minimum(zmin, z, out=zmin)
            if check:
                open_ = t_hit < 0
                if open_.any():
                    p = norm_cdf_v(z)
                    hit = open_ & (p >= level)
                    t_hit[hit] = k
                    p_hit[hit] = p[hit]
        w = w + sd * norm_ppf_v(uniform_v(keys, 3 * (n_steps - 1)))
        won = w >= c
        if check and level <= 1.0:
            late = (t_hit < 0) & won
            t_hit[late] = n_steps
            p_hit[late] = 1.0
        if continuous:
            wbuf[:, n_steps] = w
            side = np.where(won, 2, 1).astype(np.uint64)
            for k in range(1, n_steps):
                u = uniform_v(keys, np.uint64(3 * (k - 1)) + side)
                w0 = wbuf[:, k - 1] - c
                w1 = wbuf[:, k] - c
                lo_z = _bridge_inf(w0, w1, rr[k - 1], rr[k], dt, u)
                hi_z = _bridge_sup(w0, w1, rr[k - 1], rr[k], dt, u)
                zmin = np.where(won, np.minimum(zmin, lo_z), zmin)
                zmax = np.where(won, zmax, np.maximum(zmax, hi_z))
            ta = 1.0 - dt
            wa = wbuf[:, n_steps - 1]
            base = 3 * n_steps
            for j in range(LAST_STEP_SPLITS + 1):
                if j < LAST_STEP_SPLITS:
                    tb = 1.0 - dt * 0.5 ** (j + 1)
                    mean = wa + (tb - ta) / (1.0 - ta) * (w - wa)
                    var = (tb - ta) * (1.0 - tb) / (1.0 - ta)
                    wb = mean + np.sqrt(var) * norm_ppf_v(uniform_v(keys, base + 3 * j))
                    rb = float(np.sqrt(1.0 - tb))
                else:
                    tb = 1.0
                    wb = w
                    rb = 0.0
                ra = float(np.sqrt(1.0 - ta))
                u = uniform_v(keys, np.uint64(base + 3 * j) + side)
                lo_z = _bridge_inf(wa - c, wb - c, ra, rb, tb - ta, u)
                hi_z = _bridge_sup(wa - c, wb - c, ra, rb, tb - ta, u)
                zmin = np.where(won, np.minimum(zmin, lo_z), zmin)
                zmax = np.where(won, zmax, np.maximum(zmax, hi_z))
                ta = tb
                wa = wb
        y[lo:hi] = won
        pmax[lo:hi] = np.where(won, 1.0, np.maximum(norm_cdf_v(zmax), p0))
        pmin[lo:hi] = np.where(won, np.minimum(norm_cdf_v(zmin), p0), 0.0)
        tau[lo:hi] = t_hit
        ptau[lo:hi] = p_hit
    return pmax, pmin, y, tau, ptau


def bridge_paths(p0s, n_steps, seed_hash, start):
    p0s = np.ascontiguousarray(p0s, dtype=np.float64)
    n_paths = p0s.shape[0]
    out = np.empty((n_paths, n_steps + 1))
    y = np.empty(n_paths, dtype=np.int8)
    sd = np.sqrt(1.0 / n_steps)
    inv_r = 1.0 / np.sqrt(1.0 - np.arange(n_steps) / n_steps)
    for lo, hi in _chunks(n_paths):
        keys = keys_from_hash(seed_hash, start + lo, hi - lo)
        c = -norm_ppf_v(p0s[lo:hi])
        w = np.zeros(hi - lo)
        out[lo:hi, 0] = p0s[lo:hi]
        for k in range(1, n_steps):
            w = w + sd * norm_ppf_v(uniform_v(keys, 3 * (k - 1)))
            out[lo:hi, k] = norm_cdf_v((w - c) * inv_r[k])
        w = w + sd * norm_ppf_v(uniform_v(keys, 3 * (n_steps - 1)))
        won = w >= c
        y[lo:hi] = won
        out[lo:hi, n_steps] = np.where(won, 1.0, 0.0)
    return out, y


def _up(keys, step):
    return (raw_v(keys, step) >> np.uint64(63)).astype(bool)


def grid_walk(m0s, n_cells, max_steps, seed_hash, start, level_m):
    m0s = np.ascontiguousarray(m0s, dtype=np.int64)
    n_paths = m0s.shape[0]
    keys = keys_from_hash(seed_hash, start, n_paths)
    m = m0s.copy()
    mx = m.copy()
    mn = m.copy()
    steps = np.zeros(n_paths, dtype=np.int64)
    tau = np.where(m >= level_m, 0, -1).astype(np.int64)
    m_tau = np.where(m >= level_m, m, 0).astype(np.int64)
    active = np.flatnonzero((m > 0) & (m < n_cells))
    step = 0
    while active.size and step < max_steps:
        up = _up(keys[active], step)
        mm = m[active] + np.where(up, 1, -1)
        step += 1
        m[active] = mm
        steps[active] = step
        mx[active] = np.maximum(mx[active], mm)
        mn[active] = np.minimum(mn[active], mm)
        hit = (tau[active] < 0) & (mm >= level_m)
        tau[active[hit]] = step
        m_tau[active[hit]] = mm[hit]
        active = active[(mm > 0) & (mm < n_cells)]
    absorbed = ((m == 0) | (m == n_cells)).astype(np.int8)
    y = (m == n_cells).astype(np.int8)
    return mx, mn, y, absorbed, steps, tau, m_tau


def grid_paths(m0, n_cells, horizon, seed_hash, start, n_paths):
    keys = keys_from_hash(seed_hash, start, n_paths)
    out = np.empty((n_paths, horizon + 1), dtype=np.int64)
    m = np.full(n_paths, m0, dtype=np.int64)
    out[:, 0] = m
    for k in range(1, horizon + 1):
        inside = (m > 0) & (m < n_cells)
        m = np.where(inside, m + np.where(_up(keys, k - 1), 1, -1), m)
        out[:, k] = m
    return out


def _pair_table(n: int) -> np.ndarray:
    """``table[a, r]`` = lexicographic rank pair ``r`` among ``a`` alive players."""
    size = max(1, n * (n - 1) // 2)
    table = np.zeros((n + 1, size, 2), dtype=np.int64)
    for a in range(2, n + 1):
        r = 0
        for i in range(a):
            for j in range(i + 1, a):
                table[a, r] = (i, j)
                r += 1
    return table


def nplayer_walk(m0, n_cells, max_steps, seed_hash, start, n_paths):
    m0 = np.ascontiguousarray(m0, dtype=np.int64)
    n = m0.shape[0]
    table = _pair_table(n)
    keys = keys_from_hash(seed_hash, start, n_paths)
    m = np.tile(m0, (n_paths, 1))
    lo = m.copy()
    steps = np.zeros(n_paths, dtype=np.int64)
    winner = np.full(n_paths, -1, dtype=np.int64)
    at_top = m0 == n_cells
    if at_top.any():
        winner[:] = int(np.flatnonzero(at_top)[-1])
    active = np.flatnonzero(winner < 0)
    step = 0
    rows_all = np.arange(n_paths)
    while active.size and step < max_steps:
        u = raw_v(keys[active], step)
        step += 1
        ma = m[active]
        alive = ma > 0
        a = alive.sum(axis=1)
        # stable order of alive players by index, as kept by the compiled loop
        order = np.argsort(~alive, axis=1, kind="stable")
        npairs = a * (a - 1) // 2
        r = ((u >> np.uint64(11)).astype(np.float64) * TWO_M53 * npairs).astype(np.int64)
        ranks = table[a, r]
        rows = np.arange(active.size)
        pi = order[rows, ranks[:, 0]]
        pj = order[rows, ranks[:, 1]]
        d = np.where((u & np.uint64(1)).astype(bool), 1, -1)
        ma[rows, pi] += d
        ma[rows, pj] -= d
        m[active] = ma
        idx = active
        lo[idx, pi] = np.minimum(lo[idx, pi], ma[rows, pi])
        lo[idx, pj] = np.minimum(lo[idx, pj], ma[rows, pj])
        steps[idx] = step
        won_i = ma[rows, pi] == n_cells
        won_j = ~won_i & (ma[rows, pj] == n_cells)
        winner[idx[won_i]] = pi[won_i]
        winner[idx[won_j]] = pj[won_j]
        active = active[winner[active] < 0]
    wmin = np.where(winner >= 0, lo[rows_all, np.maximum(winner, 0)], -1)
    absorbed = (winner >= 0).astype(np.int8)
    return winner, wmin.astype(np.int64), steps, absorbed
