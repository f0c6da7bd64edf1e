"""Empirical CDFs, Kolmogorov-Smirnov machinery, binned KL and multiple testing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .laws import DomainError, Law

KOLMOGOROV_TERM_TOL = 1e-12
KL_MASS_FLOOR = 1e-12
KL_BINS = 20

CdfLike = Union[Law, Callable]


@dataclass(frozen=True)
class PathSample:
    """Scalar path-functional values, stored sorted."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        if arr.size == 0:
            raise DomainError("a sample needs at least one value")
        if np.isnan(arr).any():
            raise DomainError("sample contains NaN")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, PathSample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    d_n: float
    p_value: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.d_n <= 1.0):
            raise DomainError(f"d_n out of [0, 1]: {self.d_n}")
        if not (0.0 <= self.p_value <= 1.0):
            raise DomainError(f"p_value out of [0, 1]: {self.p_value}")


def _as_sample(sample) -> PathSample:
    return sample if isinstance(sample, PathSample) else PathSample(sample)


def _evaluators(f0: CdfLike):
    """(F, F(x-)) pair; a plain callable is taken to be continuous."""
    if isinstance(f0, Law):
        return f0.cdf, f0.cdf_left
    if callable(f0):
        return f0, f0
    raise TypeError("f0 must be a Law or a callable cdf")


def _call(F, x: np.ndarray) -> np.ndarray:
    return np.asarray(F(x), dtype=np.float64) * np.ones_like(x)


def ecdf_eval(sample, x):
    """Fraction of sample values <= x (scalar or array x)."""
    s = _as_sample(sample)
    xa = np.asarray(x, dtype=np.float64)
    out = np.searchsorted(s.values, xa, side="right") / s.n
    return float(out) if xa.ndim == 0 else out


def ks_statistic(sample, f0: CdfLike) -> float:
    """Exact sup-distance between the sample ECDF and ``f0``.

    At the i-th order statistic both one-sided gaps are checked:
    ``|i/n - F(x_i)|`` and ``|(i-1)/n - F(x_i-)|``.  The left limit only
    differs from ``F`` at an atom (the unconditional max at 1).  Tied values
    use the counts of the whole tie block, so a block sitting on an atom is
    not charged for ECDF levels it never takes.
    """
    s = _as_sample(sample)
    F, F_left = _evaluators(f0)
    x = s.values
    le = np.searchsorted(x, x, side="right").astype(np.float64)
    lt = np.searchsorted(x, x, side="left").astype(np.float64)
    upper = np.abs(le / s.n - _call(F, x))
    lower = np.abs(lt / s.n - _call(F_left, x))
    return float(max(upper.max(), lower.max()))


def sup_distance(sample, f0: CdfLike, lo: float = 0.0, hi: float = 1.0) -> float:
    """Sup of ``|ECDF - F|`` over the closed interval ``[lo, hi]``."""
    if not lo <= hi:
        raise DomainError("need lo <= hi")
    s = _as_sample(sample)
    F, F_left = _evaluators(f0)
    x = s.values
    inner = x[(x > lo) & (x <= hi)]
    ends = np.array([lo, hi])
    gaps = [np.abs(ecdf_eval(s, ends) - _call(F, ends))]
    if inner.size:
        below = np.searchsorted(x, inner, side="left") / s.n
        gaps.append(np.abs(ecdf_eval(s, inner) - _call(F, inner)))
        gaps.append(np.abs(below - _call(F_left, inner)))
    return float(max(g.max() for g in gaps))


def lattice_distance(sample, f0: CdfLike, points: Sequence[float], side: str = "right") -> float:
    """Max gap between the sample and ``f0`` over the given evaluation points.

    ``side="right"`` compares the fraction of values <= x with F(x); ``"left"``
    compares the fraction of values < x with F(x-).  Walk-based samples match
    a continuous law exactly on lattice points for one of the two sides.
    """
    s = _as_sample(sample)
    F, F_left = _evaluators(f0)
    pts = np.asarray(points, dtype=np.float64)
    if side == "right":
        emp, theo = ecdf_eval(s, pts), _call(F, pts)
    elif side == "left":
        emp, theo = np.searchsorted(s.values, pts, side="left") / s.n, _call(F_left, pts)
    else:
        raise DomainError(f"side must be 'right' or 'left', got {side!r}")
    return float(np.abs(emp - theo).max())


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, ``P(K > lam)``.

    Uses ``2 * sum (-1)^(k-1) exp(-2 k^2 lam^2)`` for lam >= 1 and the
    equivalent theta-function form ``1 - sqrt(2 pi)/lam * sum_{k odd}
    exp(-k^2 pi^2 / (8 lam^2))`` below that, where the alternating series
    converges too slowly to truncate at a fixed term size.
    """
    lam = float(lam)
    if math.isnan(lam) or lam < 0.0:
        raise DomainError(f"lambda must be >= 0, got {lam!r}")
    if lam < 0.05:
        # 1 - Q(lam) < 1e-200 here, and the dual series would underflow
        return 1.0
    total = 0.0
    k = 1
    if lam >= 1.0:
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < KOLMOGOROV_TERM_TOL:
                break
            k += 1
        q = 2.0 * total
    else:
        while True:
            term = math.exp(-(k * k) * math.pi ** 2 / (8.0 * lam * lam))
            total += term
            if term < KOLMOGOROV_TERM_TOL:
                break
            k += 2
        q = 1.0 - math.sqrt(2.0 * math.pi) / lam * total
    return min(1.0, max(0.0, q))


def ks_pvalue(n: int, d_n: float) -> float:
    """Asymptotic p-value ``Q(sqrt(n) * d_n)``."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not (0.0 <= d_n <= 1.0):
        raise DomainError(f"d_n must lie in [0, 1], got {d_n!r}")
    return kolmogorov_sf(math.sqrt(n) * d_n)


def ks_test(sample, f0: CdfLike) -> TestResult:
    s = _as_sample(sample)
    d = ks_statistic(s, f0)
    return TestResult(d_n=d, p_value=ks_pvalue(s.n, d), n=s.n)


def kl_divergence_binned(sample, f0: CdfLike, n_bins: int = KL_BINS) -> float:
    """Plug-in KL(empirical || theoretical) over equal-width cells of [0, 1].

    Cells are ``[a, b)`` except the last, which is closed.  Theoretical cell
    masses are floored at ``KL_MASS_FLOOR``; empty empirical cells contribute
    nothing.
    """
    if int(n_bins) != n_bins or n_bins < 2:
        raise DomainError("n_bins must be an integer >= 2")
    s = _as_sample(sample)
    _, F_left = _evaluators(f0)
    edges = np.linspace(0.0, 1.0, int(n_bins) + 1)
    counts, _ = np.histogram(s.values, bins=edges)
    q = counts / s.n
    cum = _call(F_left, edges)
    cum[0] = 0.0
    cum[-1] = 1.0
    m = np.maximum(np.diff(cum), KL_MASS_FLOOR)
    pos = q > 0
    return float(max(0.0, np.sum(q[pos] * np.log(q[pos] / m[pos]))))


def _check_pvalues(p_values: Iterable[float], alpha: float) -> np.ndarray:
    p = np.asarray(list(p_values), dtype=np.float64)
    if p.size == 0:
        raise DomainError("need at least one p-value")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise DomainError("p-values must lie in [0, 1]")
    return p


def bonferroni_reject(p_values: Iterable[float], alpha: float = 0.05) -> list[bool]:
    p = _check_pvalues(p_values, alpha)
    return [bool(v) for v in p < alpha / p.size]


def bh_fdr_reject(p_values: Iterable[float], alpha: float = 0.05) -> list[bool]:
    """Benjamini-Hochberg step-up procedure."""
    p = _check_pvalues(p_values, alpha)
    m = p.size
    ordered = np.sort(p)
    ok = ordered <= alpha * np.arange(1, m + 1) / m
    if not ok.any():
        return [False] * m
    cutoff = ordered[np.flatnonzero(ok)[-1]]
    return [bool(v) for v in p <= cutoff]
