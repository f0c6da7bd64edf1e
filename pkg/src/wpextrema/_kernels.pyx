# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernels.

Same signatures and stream layout as ``_fallback``; see ``_rng`` for the
random-number recipe.  All loops run without the GIL so callers may split
path ranges across threads.
"""

import numpy as np

from libc.math cimport sqrt, log, erfc, INFINITY
from libc.stdint cimport uint64_t, int64_t, int8_t

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t wpx_mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline uint64_t wpx_key(uint64_t seed_hash, uint64_t i) {
        return wpx_mix(seed_hash + (i + 1) * 0x9E3779B97F4A7C15ULL);
    }
    static inline uint64_t wpx_raw(uint64_t key, uint64_t ctr) {
        return wpx_mix(key + (ctr + 1) * 0x9E3779B97F4A7C15ULL);
    }
    static inline double wpx_unif(uint64_t key, uint64_t ctr) {
        return ((double)(wpx_raw(key, ctr) >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }
    """
    uint64_t wpx_mix(uint64_t z) nogil
    uint64_t wpx_key(uint64_t seed_hash, uint64_t i) nogil
    uint64_t wpx_raw(uint64_t key, uint64_t ctr) nogil
    double wpx_unif(uint64_t key, uint64_t ctr) nogil

cdef int LAST_STEP_SPLITS = 32
cdef double SQRT_HALF = 0.70710678118654752440


cdef inline double _horner8(const double* c, double r) noexcept nogil:
    cdef double acc = c[7]
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * r + c[i]
    return acc


cdef double[8] _A = [3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
                     1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
                     3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] _B = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
                     2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
                     5.2264952788528545610e3]
cdef double[8] _C = [1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                     3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                     2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] _D = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
                     1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
                     1.05075007164441684324e-9]
cdef double[8] _E = [6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                     2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                     2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] _F = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
                     7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                     2.04426310338993978564e-15]


cdef inline double _ppnd(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if -0.425 <= q <= 0.425:
        r = 0.180625 - q * q
        return q * _horner8(_A, r) / _horner8(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r -= 1.6
        val = _horner8(_C, r) / _horner8(_D, r)
    else:
        r -= 5.0
        val = _horner8(_E, r) / _horner8(_F, r)
    return -val if q < 0.0 else val


cdef inline double _phi(double z) noexcept nogil:
    return 0.5 * erfc(-z * SQRT_HALF)


cdef inline double _bridge_sup(double w0, double w1, double r0, double r1,
                               double dt, double u) noexcept nogil:
    # Largest a with (a r0 - w0)(a r1 - w1) = -dt log(u) / 2, r0 > r1 >= 0.
    cdef double e = -0.5 * dt * log(u)
    cdef double s, d
    if r1 == 0.0:
        if w1 >= 0.0:
            return INFINITY
        return (w0 + e / (-w1)) / r0
    s = r0 * w1 + r1 * w0
    d = r0 * w1 - r1 * w0
    return (s + sqrt(d * d + 4.0 * r0 * r1 * e)) / (2.0 * r0 * r1)


cdef inline double _bridge_inf(double w0, double w1, double r0, double r1,
                               double dt, double u) noexcept nogil:
    cdef double e = -0.5 * dt * log(u)
    cdef double s, d
    if r1 == 0.0:
        if w1 <= 0.0:
            return -INFINITY
        return (w0 - e / w1) / r0
    s = r0 * w1 + r1 * w0
    d = r0 * w1 - r1 * w0
    return (s - sqrt(d * d + 4.0 * r0 * r1 * e)) / (2.0 * r0 * r1)


def bridge_extrema(double[::1] p0s, int64_t n_steps, uint64_t seed_hash,
                   int64_t start, double level, bint continuous):
    """Per-path extrema of the Gaussian-bridge win-probability path.

    Returns ``(pmax, pmin, y, tau, p_tau)``.  With ``continuous`` the extrema
    include the within-step bridge supremum/infimum; ``tau`` and ``p_tau``
    always refer to the sampled grid (``tau = -1`` when ``level`` is never
    reached or is NaN).
    """
    cdef Py_ssize_t n_paths = p0s.shape[0]
    pmax_a = np.empty(n_paths)
    pmin_a = np.empty(n_paths)
    y_a = np.empty(n_paths, dtype=np.int8)
    tau_a = np.empty(n_paths, dtype=np.int64)
    ptau_a = np.empty(n_paths)
    inv_r_a = np.empty(n_steps)
    r_a = np.empty(n_steps + 1)
    w_a = np.empty(n_steps + 1)
    cdef double[::1] pmax = pmax_a, pmin = pmin_a, ptau = ptau_a
    cdef int8_t[::1] yv = y_a
    cdef int64_t[::1] tau = tau_a
    cdef double[::1] inv_r = inv_r_a, rr = r_a, wbuf = w_a
    cdef Py_ssize_t i
    cdef int64_t k, j, t_hit
    cdef uint64_t key, base, side
    cdef double p0, c, w, p, z, zmax, zmin, sd, dt, p_hit, z_gate
    cdef double ta, tb, wa, wb, ra, rb, mean, var
    cdef bint check = level == level
    cdef bint won

    dt = 1.0 / <double>n_steps
    sd = sqrt(dt)
    for k in range(n_steps):
        rr[k] = sqrt(1.0 - <double>k / <double>n_steps)
        inv_r[k] = 1.0 / rr[k]
    rr[n_steps] = 0.0
    # p >= level is decided exactly; the gate only skips hopeless erfc calls
    z_gate = _ppnd(level) - 1e-6 if (check and 0.0 < level < 1.0) else -INFINITY

    with nogil:
        for i in range(n_paths):
            key = wpx_key(seed_hash, <uint64_t>(start + i))
            p0 = p0s[i]
            c = -_ppnd(p0)
            w = 0.0
            wbuf[0] = 0.0
            zmax = -INFINITY
            zmin = INFINITY
            t_hit = -1
            p_hit = 0.0
            if check and p0 >= level:
                t_hit = 0
                p_hit = p0
            for k in range(1, n_steps):
                w = w + sd * _ppnd(wpx_unif(key, 3 * (k - 1)))
                wbuf[k] = w
                z = (w - c) * inv_r[k]
                if z > zmax:
                    zmax = z
                if z < zmin:
                    zmin = z
                if t_hit < 0 and z >= z_gate and check:
                    p = _phi(z)
                    if p >= level:
                        t_hit = k
                        p_hit = p
            w = w + sd * _ppnd(wpx_unif(key, 3 * (n_steps - 1)))
            wbuf[n_steps] = w
            won = w >= c
            if check and t_hit < 0 and won and level <= 1.0:
                t_hit = n_steps
                p_hit = 1.0
            if continuous:
                # only the extreme that is not pinned by the outcome matters
                side = 2 if won else 1
                for k in range(1, n_steps):
                    if won:
                        z = _bridge_inf(wbuf[k - 1] - c, wbuf[k] - c, rr[k - 1], rr[k], dt,
                                        wpx_unif(key, 3 * (k - 1) + side))
                        if z < zmin:
                            zmin = z
                    else:
                        z = _bridge_sup(wbuf[k - 1] - c, wbuf[k] - c, rr[k - 1], rr[k], dt,
                                        wpx_unif(key, 3 * (k - 1) + side))
                        if z > zmax:
                            zmax = z
                # last step [t_{N-1}, 1], refined geometrically towards t = 1
                ta = 1.0 - dt
                wa = wbuf[n_steps - 1]
                base = 3 * <uint64_t>n_steps
                for j in range(LAST_STEP_SPLITS + 1):
                    if j < LAST_STEP_SPLITS:
                        tb = 1.0 - dt * 0.5 ** (j + 1)
                        mean = wa + (tb - ta) / (1.0 - ta) * (w - wa)
                        var = (tb - ta) * (1.0 - tb) / (1.0 - ta)
                        wb = mean + sqrt(var) * _ppnd(wpx_unif(key, base + 3 * j))
                        rb = sqrt(1.0 - tb)
                    else:
                        tb = 1.0
                        wb = w
                        rb = 0.0
                    ra = sqrt(1.0 - ta)
                    if won:
                        z = _bridge_inf(wa - c, wb - c, ra, rb, tb - ta,
                                        wpx_unif(key, base + 3 * j + side))
                        if z < zmin:
                            zmin = z
                    else:
                        z = _bridge_sup(wa - c, wb - c, ra, rb, tb - ta,
                                        wpx_unif(key, base + 3 * j + side))
                        if z > zmax:
                            zmax = z
                    ta = tb
                    wa = wb
            if won:
                yv[i] = 1
                pmax[i] = 1.0
                p = _phi(zmin)
                pmin[i] = p if p < p0 else p0
            else:
                yv[i] = 0
                p = _phi(zmax)
                pmax[i] = p if p > p0 else p0
                pmin[i] = 0.0
            tau[i] = t_hit
            ptau[i] = p_hit
    return pmax_a, pmin_a, y_a, tau_a, ptau_a


def bridge_paths(double[::1] p0s, int64_t n_steps, uint64_t seed_hash, int64_t start):
    """Full sampled paths, shape ``(n_paths, n_steps + 1)``, and outcomes."""
    cdef Py_ssize_t n_paths = p0s.shape[0]
    out_a = np.empty((n_paths, n_steps + 1))
    y_a = np.empty(n_paths, dtype=np.int8)
    inv_r_a = np.empty(n_steps)
    cdef double[:, ::1] out = out_a
    cdef int8_t[::1] yv = y_a
    cdef double[::1] inv_r = inv_r_a
    cdef Py_ssize_t i
    cdef int64_t k
    cdef uint64_t key
    cdef double c, w, sd = sqrt(1.0 / <double>n_steps)
    for k in range(n_steps):
        inv_r[k] = 1.0 / sqrt(1.0 - <double>k / <double>n_steps)
    with nogil:
        for i in range(n_paths):
            key = wpx_key(seed_hash, <uint64_t>(start + i))
            c = -_ppnd(p0s[i])
            w = 0.0
            out[i, 0] = p0s[i]
            for k in range(1, n_steps):
                w = w + sd * _ppnd(wpx_unif(key, 3 * (k - 1)))
                out[i, k] = _phi((w - c) * inv_r[k])
            w = w + sd * _ppnd(wpx_unif(key, 3 * (n_steps - 1)))
            if w >= c:
                yv[i] = 1
                out[i, n_steps] = 1.0
            else:
                yv[i] = 0
                out[i, n_steps] = 0.0
    return out_a, y_a


def grid_walk(int64_t[::1] m0s, int64_t n_cells, int64_t max_steps,
              uint64_t seed_hash, int64_t start, int64_t level_m):
    """Symmetric +-1 walk on {0..K} absorbed at both ends, one per path.

    Returns ``(max_m, min_m, y, absorbed, steps, tau, m_tau)`` in lattice
    units; ``tau`` is the first step with ``m >= level_m`` (-1 if never;
    pass ``level_m > n_cells`` to skip).
    """
    cdef Py_ssize_t n_paths = m0s.shape[0]
    mx_a = np.empty(n_paths, dtype=np.int64)
    mn_a = np.empty(n_paths, dtype=np.int64)
    y_a = np.empty(n_paths, dtype=np.int8)
    ab_a = np.empty(n_paths, dtype=np.int8)
    st_a = np.empty(n_paths, dtype=np.int64)
    tau_a = np.empty(n_paths, dtype=np.int64)
    mt_a = np.empty(n_paths, dtype=np.int64)
    cdef int64_t[::1] mxv = mx_a, mnv = mn_a, stv = st_a, tauv = tau_a, mtv = mt_a
    cdef int8_t[::1] yv = y_a, abv = ab_a
    cdef Py_ssize_t i
    cdef int64_t m, mx, mn, step, t_hit, m_hit
    cdef uint64_t key
    with nogil:
        for i in range(n_paths):
            key = wpx_key(seed_hash, <uint64_t>(start + i))
            m = m0s[i]
            mx = m
            mn = m
            step = 0
            t_hit = -1
            m_hit = 0
            if m >= level_m:
                t_hit = 0
                m_hit = m
            while 0 < m < n_cells and step < max_steps:
                if wpx_raw(key, <uint64_t>step) >> 63:
                    m += 1
                else:
                    m -= 1
                step += 1
                if m > mx:
                    mx = m
                if m < mn:
                    mn = m
                if t_hit < 0 and m >= level_m:
                    t_hit = step
                    m_hit = m
            mxv[i] = mx
            mnv[i] = mn
            stv[i] = step
            tauv[i] = t_hit
            mtv[i] = m_hit
            abv[i] = 1 if (m == 0 or m == n_cells) else 0
            yv[i] = 1 if m == n_cells else 0
    return mx_a, mn_a, y_a, ab_a, st_a, tau_a, mt_a


def grid_paths(int64_t m0, int64_t n_cells, int64_t horizon, uint64_t seed_hash,
               int64_t start, int64_t n_paths):
    """Lattice states for ``horizon`` steps, absorbed states held constant."""
    out_a = np.empty((n_paths, horizon + 1), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_a
    cdef Py_ssize_t i
    cdef int64_t k, m
    cdef uint64_t key
    with nogil:
        for i in range(n_paths):
            key = wpx_key(seed_hash, <uint64_t>(start + i))
            m = m0
            out[i, 0] = m
            for k in range(1, horizon + 1):
                if 0 < m < n_cells:
                    if wpx_raw(key, <uint64_t>(k - 1)) >> 63:
                        m += 1
                    else:
                        m -= 1
                out[i, k] = m
    return out_a


def nplayer_walk(int64_t[::1] m0, int64_t n_cells, int64_t max_steps,
                 uint64_t seed_hash, int64_t start, int64_t n_paths):
    """Pair-transfer walk for n players; one lattice unit moves per step.

    Returns ``(winner, winner_min, steps, absorbed)``; ``winner = -1`` when
    ``max_steps`` ran out first.
    """
    cdef Py_ssize_t n = m0.shape[0]
    win_a = np.empty(n_paths, dtype=np.int64)
    wmin_a = np.empty(n_paths, dtype=np.int64)
    st_a = np.empty(n_paths, dtype=np.int64)
    ab_a = np.empty(n_paths, dtype=np.int8)
    m_a = np.empty(n, dtype=np.int64)
    lo_a = np.empty(n, dtype=np.int64)
    alive_a = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] winv = win_a, wminv = wmin_a, stv = st_a
    cdef int8_t[::1] abv = ab_a
    cdef int64_t[::1] m = m_a, lo = lo_a, alive = alive_a
    cdef Py_ssize_t i, q
    cdef int64_t a, npairs, r, ri, rj, pi, pj, step, winner
    cdef uint64_t key, u
    cdef int64_t d
    with nogil:
        for i in range(n_paths):
            key = wpx_key(seed_hash, <uint64_t>(start + i))
            a = 0
            winner = -1
            for q in range(n):
                m[q] = m0[q]
                lo[q] = m0[q]
                if m0[q] > 0:
                    alive[a] = q
                    a += 1
                if m0[q] == n_cells:
                    winner = q
            step = 0
            while winner < 0 and step < max_steps:
                u = wpx_raw(key, <uint64_t>step)
                step += 1
                npairs = a * (a - 1) // 2
                r = <int64_t>((<double>(u >> 11) * (1.0 / 9007199254740992.0)) * <double>npairs)
                ri = 0
                while r >= a - 1 - ri:
                    r -= a - 1 - ri
                    ri += 1
                rj = ri + 1 + r
                pi = alive[ri]
                pj = alive[rj]
                d = 1 if (u & 1) else -1
                m[pi] += d
                m[pj] -= d
                if m[pi] < lo[pi]:
                    lo[pi] = m[pi]
                if m[pj] < lo[pj]:
                    lo[pj] = m[pj]
                if m[pi] == n_cells:
                    winner = pi
                elif m[pj] == n_cells:
                    winner = pj
                if m[pi] == 0 or m[pj] == 0:
                    r = 0
                    for q in range(a):
                        if m[alive[q]] > 0:
                            alive[r] = alive[q]
                            r += 1
                    a = r
            winv[i] = winner
            wminv[i] = lo[winner] if winner >= 0 else -1
            stv[i] = step
            abv[i] = 1 if winner >= 0 else 0
    return win_a, wmin_a, st_a, ab_a
