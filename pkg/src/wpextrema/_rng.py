"""Counter-based random streams and the normal distribution helpers.

Each simulated path gets its own 64-bit key, and draw number ``c`` on that
path is a pure function of ``(key, c)``:

    seed_hash    = mix(master_seed mod 2**64)
    key(i)       = mix(seed_hash + (i + 1) * GAMMA)
    raw(key, c)  = mix(key + (c + 1) * GAMMA)
    uniform      = ((raw >> 11) + 0.5) * 2**-53        # open interval (0, 1)

``mix`` is the SplitMix64 finaliser, so both levels are SplitMix64 streams.
Because nothing depends on the order in which paths are generated, chunked,
threaded and serial runs produce identical samples.  The compiled kernels use
the same recipe.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def seed_hash(master_seed: int) -> int:
    return mix64(int(master_seed) & MASK64)


def path_key(master_seed: int, index: int) -> int:
    return mix64(seed_hash(master_seed) + (index + 1) * GAMMA)


def raw(key: int, counter: int) -> int:
    return mix64(key + (counter + 1) * GAMMA)


def uniform(key: int, counter: int) -> float:
    return ((raw(key, counter) >> 11) + 0.5) * TWO_M53


# --- vectorised counterparts (uint64 arithmetic wraps modulo 2**64) ---------

_G = np.uint64(GAMMA)
_U1 = np.uint64(_M1)
_U2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64_v(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U1
    z = (z ^ (z >> _S27)) * _U2
    return z ^ (z >> _S31)


def path_keys(master_seed: int, start: int, count: int) -> np.ndarray:
    return keys_from_hash(seed_hash(master_seed), start, count)


def keys_from_hash(seed_hash_value: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_v(np.uint64(seed_hash_value) + idx * _G)


def raw_v(keys: np.ndarray, counter) -> np.ndarray:
    ctr = np.asarray(counter, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        return mix64_v(keys + ctr * _G)


def uniform_v(keys: np.ndarray, counter) -> np.ndarray:
    return ((raw_v(keys, counter) >> _S11).astype(np.float64) + 0.5) * TWO_M53


# --- standard normal ---------------------------------------------------------
# Inverse cdf: Wichura's AS 241 (PPND16), relative accuracy about 1e-16.

_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _horner(coefs, r):
    acc = coefs[7]
    for c in coefs[6::-1]:
        acc = acc * r + c
    return acc


def norm_ppf(p: float) -> float:
    """Standard normal quantile for p in (0, 1)."""
    if not (0.0 < p < 1.0):
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability out of range: {p!r}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(_A, r) / _horner(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _horner(_C, r) / _horner(_D, r)
    else:
        r -= 5.0
        val = _horner(_E, r) / _horner(_F, r)
    return -val if q < 0.0 else val


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z * math.sqrt(0.5))


def norm_ppf_v(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.where(near, _horner(_C, r - 1.6) / _horner(_D, r - 1.6),
                       _horner(_E, r - 5.0) / _horner(_F, r - 5.0))
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def norm_cdf_v(z: np.ndarray) -> np.ndarray:
    from scipy.special import erfc

    return 0.5 * erfc(-np.asarray(z, dtype=np.float64) * math.sqrt(0.5))
