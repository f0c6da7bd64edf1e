"""Closed-form laws for extrema of binary win-probability martingales.

Four laws are covered:

``max``            running maximum of a probability path started at ``p0``
``max-cond-loss``  the same maximum, restricted to paths that end in a loss
``loser-max``      peak probability reached by whichever side eventually loses
``winner-min``     lowest probability held by the eventual winner of an
                   n-way contest

Every evaluator is plain arithmetic on piecewise forms ``a - b/x`` or
``a + b*x/(1-x)``; quantiles invert each piece analytically.  Scalars in give
floats out, array-likes give ndarrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

__all__ = [
    "DomainError",
    "Prior",
    "PriorVector",
    "LawKind",
    "Law",
    "max_cdf_unconditional",
    "max_cdf_conditional_loss",
    "finance_loss_cdf",
    "discrete_tail_bound",
    "loser_max_cdf",
    "winner_min_cdf",
    "quantile",
]

PRIOR_SUM_TOL = 1e-9


class DomainError(ValueError):
    """An argument lies outside the domain of a law or operation."""


@dataclass(frozen=True)
class Prior:
    """Starting win probability, strictly inside (0, 1)."""

    p0: float

    def __post_init__(self):
        p0 = float(self.p0)
        if not (0.0 < p0 < 1.0):
            raise DomainError(f"p0 must lie in the open interval (0, 1), got {self.p0!r}")
        object.__setattr__(self, "p0", p0)


@dataclass(frozen=True)
class PriorVector:
    """Starting win probabilities of n >= 2 players.

    Entries must each lie in (0, 1) and sum to one within ``PRIOR_SUM_TOL``;
    they are then divided by their sum.
    """

    priors: tuple[float, ...]

    def __post_init__(self):
        vals = [float(p) for p in self.priors]
        if len(vals) < 2:
            raise DomainError("a prior vector needs at least two players")
        for p in vals:
            if not (0.0 < p < 1.0):
                raise DomainError(f"every prior must lie in (0, 1), got {p!r}")
        total = math.fsum(vals)
        if abs(total - 1.0) > PRIOR_SUM_TOL:
            raise DomainError(f"priors must sum to 1 (got {total!r})")
        object.__setattr__(self, "priors", tuple(p / total for p in vals))

    @property
    def n(self) -> int:
        return len(self.priors)

    @classmethod
    def symmetric(cls, n: int) -> "PriorVector":
        return cls(tuple([1.0 / n] * n))


def _p0(p0) -> float:
    return p0.p0 if isinstance(p0, Prior) else Prior(p0).p0


def _priors(priors) -> tuple[float, ...]:
    if isinstance(priors, PriorVector):
        return priors.priors
    return PriorVector(tuple(priors)).priors


def _probability_arg(x, name="x"):
    """Validate a probability argument; returns (array, was_scalar)."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


# --- piecewise building blocks (no validation, array in / array out) -------


def _max_cdf(p0, x, left=False):
    lower = x <= p0 if left else x < p0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = 1.0 - p0 / x
    out = np.where(lower, 0.0, mid)
    top = (x < 1.0) if left else (x >= 1.0)
    if left:
        return np.clip(np.where(top, out, 1.0 - p0), 0.0, 1.0)
    return np.clip(np.where(top, 1.0, out), 0.0, 1.0)


def _cond_loss_cdf(p0, x, left=False):
    odds = p0 / (1.0 - p0)
    lower = x <= p0 if left else x < p0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = 1.0 - odds * ((1.0 - x) / x)
    out = np.where(lower, 0.0, mid)
    return np.clip(np.where(x >= 1.0, 1.0, out), 0.0, 1.0)


def _loser_cdf(fav, x, left=False):
    dog = 1.0 - fav
    if left:
        below, upper = x <= dog, x > fav
    else:
        below, upper = x < dog, x >= fav
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        low_piece = 1.0 - dog / x
        high_piece = 2.0 - 1.0 / x
    out = np.where(upper, high_piece, low_piece)
    out = np.where(below, 0.0, out)
    return np.clip(np.where(x >= 1.0, 1.0, out), 0.0, 1.0)


def _winner_cdf(priors, x):
    pr = np.asarray(priors)
    xs = x[..., None]
    reached = xs >= pr
    s_ge = np.sum(np.where(reached, pr, 0.0), axis=-1)
    s_lt = np.sum(np.where(reached, 0.0, 1.0 - pr), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = s_ge + (x / (1.0 - x)) * s_lt
    return np.clip(np.where(x >= pr.max(), 1.0, val), 0.0, 1.0)


# --- public evaluators -------------------------------------------------------


def max_cdf_unconditional(p0, x):
    """P(M <= x) for the running maximum of a continuous martingale from p0.

    Zero below ``p0``, ``1 - p0/x`` on ``[p0, 1)`` and one at ``x = 1``; the
    jump at 1 is the atom P(M = 1) = p0.
    """
    p = _p0(p0)
    arr, scalar = _probability_arg(x)
    return _out(_max_cdf(p, arr), scalar)


def max_cdf_conditional_loss(p0, x):
    """P(M <= x | loss): running maximum restricted to paths ending at 0."""
    p = _p0(p0)
    arr, scalar = _probability_arg(x)
    return _out(_cond_loss_cdf(p, arr), scalar)


# Peak model-implied probability of a losing trade follows the same law.
finance_loss_cdf = max_cdf_conditional_loss


def discrete_tail_bound(p0, x, conditional_on_loss: bool = False) -> float:
    """Sharp upper bound on P(M_N >= x) for a discrete-time path.

    ``p0/x`` unconditionally and ``(p0/(1-p0)) * ((1-x)/x)`` given a loss.
    Equality needs every first passage to land exactly on ``x`` before the
    final step; otherwise an empirical tail should sit at or below the bound.
    """
    p = _p0(p0)
    x = float(x)
    if not (p <= x < 1.0):
        raise DomainError(f"x must lie in [p0, 1) = [{p}, 1), got {x!r}")
    if conditional_on_loss:
        return (p / (1.0 - p)) * ((1.0 - x) / x)
    return p / x


def loser_max_cdf(p0, x):
    """P(M_loser <= x) for a two-sided game.

    ``p0`` is the favourite's starting probability; values below 1/2 are
    relabelled to ``1 - p0`` first (see ``Law.loser_max`` for the flag).
    """
    fav = _p0(p0)
    if fav < 0.5:
        fav = 1.0 - fav
    arr, scalar = _probability_arg(x)
    return _out(_loser_cdf(fav, arr), scalar)


def winner_min_cdf(priors, x):
    """P(M_winner <= x) for an n-player contest with the given priors."""
    pr = _priors(priors)
    arr, scalar = _probability_arg(x)
    return _out(_winner_cdf(pr, arr), scalar)


# --- Law objects -------------------------------------------------------------


class LawKind(str, enum.Enum):
    MAX_UNCONDITIONAL = "max"
    MAX_CONDITIONAL_LOSS = "max-cond-loss"
    LOSER_MAX = "loser-max"
    WINNER_MIN = "winner-min"


@dataclass(frozen=True)
class Law:
    """A named law with cdf, left-limit cdf, survival and quantile.

    Build one with the classmethods rather than the constructor.  ``swapped``
    records that a loser-max law was given the underdog's prior and relabelled.
    """

    kind: LawKind
    params: Union[Prior, PriorVector]
    swapped: bool = False
    _breaks: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def max_unconditional(cls, p0) -> "Law":
        return cls(LawKind.MAX_UNCONDITIONAL, Prior(_p0(p0)))

    @classmethod
    def max_conditional_loss(cls, p0) -> "Law":
        return cls(LawKind.MAX_CONDITIONAL_LOSS, Prior(_p0(p0)))

    @classmethod
    def loser_max(cls, p0) -> "Law":
        p = _p0(p0)
        if p < 0.5:
            return cls(LawKind.LOSER_MAX, Prior(1.0 - p), swapped=True)
        return cls(LawKind.LOSER_MAX, Prior(p))

    @classmethod
    def winner_min(cls, priors) -> "Law":
        pv = priors if isinstance(priors, PriorVector) else PriorVector(tuple(priors))
        return cls(LawKind.WINNER_MIN, pv, _breaks=_winner_pieces(pv.priors))

    @classmethod
    def from_kind(cls, kind, params) -> "Law":
        kind = LawKind(kind)
        if kind is LawKind.WINNER_MIN:
            return cls.winner_min(params)
        return {
            LawKind.MAX_UNCONDITIONAL: cls.max_unconditional,
            LawKind.MAX_CONDITIONAL_LOSS: cls.max_conditional_loss,
            LawKind.LOSER_MAX: cls.loser_max,
        }[kind](params)

    @property
    def p0(self) -> float:
        if isinstance(self.params, PriorVector):
            raise AttributeError("winner-min laws carry a prior vector, not p0")
        return self.params.p0

    @property
    def support(self) -> tuple[float, float]:
        """Smallest interval carrying all the mass."""
        if self.kind is LawKind.WINNER_MIN:
            return 0.0, max(self.params.priors)
        if self.kind is LawKind.LOSER_MAX:
            return 1.0 - self.p0, 1.0
        return self.p0, 1.0

    @property
    def atom_at_one(self) -> float:
        return self.p0 if self.kind is LawKind.MAX_UNCONDITIONAL else 0.0

    def _eval(self, arr, left=False):
        k = self.kind
        if k is LawKind.MAX_UNCONDITIONAL:
            return _max_cdf(self.p0, arr, left)
        if k is LawKind.MAX_CONDITIONAL_LOSS:
            return _cond_loss_cdf(self.p0, arr, left)
        if k is LawKind.LOSER_MAX:
            return _loser_cdf(self.p0, arr, left)
        # winner-min is continuous on [0, 1]
        return _winner_cdf(self.params.priors, arr)

    def cdf(self, x):
        arr, scalar = _probability_arg(x)
        return _out(self._eval(arr), scalar)

    def cdf_left(self, x):
        """Left limit F(x-) = P(X < x)."""
        arr, scalar = _probability_arg(x)
        return _out(self._eval(arr, left=True), scalar)

    def survival(self, x):
        """P(X >= x)."""
        arr, scalar = _probability_arg(x)
        return _out(1.0 - self._eval(arr, left=True), scalar)

    def quantile(self, u):
        """Generalised inverse inf{x : F(x) >= u}; ``u = 0`` maps to the support's lower end."""
        arr, scalar = _probability_arg(u, "u")
        return _out(self._quantile(arr), scalar)

    def _quantile(self, u):
        k = self.kind
        lo, _ = self.support
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if k is LawKind.MAX_UNCONDITIONAL:
                p = self.p0
                x = np.where(u > 1.0 - p, 1.0, p / (1.0 - u))
            elif k is LawKind.MAX_CONDITIONAL_LOSS:
                odds = self.p0 / (1.0 - self.p0)
                x = odds / (odds + (1.0 - u))
            elif k is LawKind.LOSER_MAX:
                fav = self.p0
                dog = 1.0 - fav
                kink = 1.0 - dog / fav
                x = np.where(u <= kink, dog / (1.0 - u), 1.0 / (2.0 - u))
            else:
                x = _winner_quantile(self._breaks or _winner_pieces(self.params.priors), u)
        x = np.where(u <= 0.0, lo, x)
        return np.clip(x, 0.0, 1.0)


def _winner_pieces(priors):
    """Break points b_j with F(b_j) and piece coefficients (A_j, B_j).

    On [b_j, b_{j+1}) the cdf is A_j + B_j * x/(1-x).
    """
    pr = np.asarray(priors)
    starts = [0.0] + sorted(set(float(p) for p in pr))[:-1]
    pieces = []
    for b in starts:
        a_coef = float(np.sum(pr[pr <= b])) if b > 0 else 0.0
        b_coef = float(np.sum(1.0 - pr[pr > b]))
        f_b = a_coef + b_coef * b / (1.0 - b)
        pieces.append((b, f_b, a_coef, b_coef))
    return tuple(pieces)


def _winner_quantile(pieces, u):
    starts_f = np.array([p[1] for p in pieces])
    idx = np.searchsorted(starts_f, u, side="right") - 1
    idx = np.clip(idx, 0, len(pieces) - 1)
    a_coef = np.array([p[2] for p in pieces])[idx]
    b_coef = np.array([p[3] for p in pieces])[idx]
    r = (u - a_coef) / b_coef
    return r / (1.0 + r)


def quantile(law: Law, u):
    """Generalised inverse of ``law``'s cdf (see ``Law.quantile``)."""
    return law.quantile(u)


def parse_probability(text: str) -> float:
    """Parse ``'0.25'`` or an exact fraction such as ``'1/6'``."""
    return float(Fraction(text.strip()))


def parse_priors(text: Union[str, Sequence]) -> PriorVector:
    if isinstance(text, str):
        parts = [parse_probability(t) for t in text.split(",") if t.strip()]
    else:
        parts = [float(t) for t in text]
    return PriorVector(tuple(parts))
