"""Path functionals: reduce a probability path to the extremum a law describes.

A two-team series is always stored from team A's point of view; the
n-player series keeps one probability vector per time step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .laws import DomainError

NPLAYER_SUM_TOL = 1e-6


class Outcome(str, enum.Enum):
    A_WINS = "A"
    B_WINS = "B"

    @classmethod
    def parse(cls, value) -> "Outcome":
        if isinstance(value, Outcome):
            return value
        text = str(value).strip()
        aliases = {"A": cls.A_WINS, "A_WINS": cls.A_WINS, "1": cls.A_WINS,
                   "B": cls.B_WINS, "B_WINS": cls.B_WINS, "0": cls.B_WINS}
        try:
            return aliases[text.upper()]
        except KeyError:
            raise DomainError(f"unknown outcome {value!r}") from None

    def flipped(self) -> "Outcome":
        return Outcome.B_WINS if self is Outcome.A_WINS else Outcome.A_WINS


def _as_series(series, min_len: int = 1) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError("series must be one-dimensional")
    if arr.size < min_len:
        raise DomainError(f"series needs at least {min_len} element(s)")
    if np.isnan(arr).any() or (arr < 0.0).any() or (arr > 1.0).any():
        raise DomainError("series values must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class WinProbSeries:
    """Team A's win probability over one game, plus the realised outcome."""

    id: str
    series: np.ndarray
    outcome: Outcome

    def __post_init__(self):
        object.__setattr__(self, "series", _as_series(self.series, min_len=2))
        object.__setattr__(self, "outcome", Outcome.parse(self.outcome))

    @property
    def p0(self) -> float:
        return float(self.series[0])

    def __eq__(self, other):
        if not isinstance(other, WinProbSeries):
            return NotImplemented
        return (self.id == other.id and self.outcome is other.outcome
                and np.array_equal(self.series, other.series))

    __hash__ = None


@dataclass(frozen=True)
class NPlayerSeries:
    """Win-probability vectors for n players, one row per time step."""

    id: str
    series: np.ndarray
    winner_index: int
    _n: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        arr = np.asarray(self.series, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
            raise DomainError("series must be a (steps, n >= 2) array")
        if np.isnan(arr).any() or (arr < 0.0).any() or (arr > 1.0).any():
            raise DomainError("probabilities must lie in [0, 1]")
        if np.abs(arr.sum(axis=1) - 1.0).max() > NPLAYER_SUM_TOL:
            raise DomainError(f"each vector must sum to 1 within {NPLAYER_SUM_TOL}")
        w = int(self.winner_index)
        if not 0 <= w < arr.shape[1]:
            raise DomainError(f"winner_index {w} out of range")
        object.__setattr__(self, "series", arr)
        object.__setattr__(self, "winner_index", w)
        object.__setattr__(self, "_n", arr.shape[1])

    @property
    def n(self) -> int:
        return self._n


def path_max(series: Sequence[float]) -> float:
    """Largest value along the path (the first element counts)."""
    return float(_as_series(series).max())


def first_passage(series: Sequence[float], x: float) -> Optional[int]:
    """Smallest index k with ``series[k] >= x``; ``None`` if the level is never reached."""
    arr = _as_series(series)
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise DomainError(f"level must lie in [0, 1], got {x!r}")
    hits = np.flatnonzero(arr >= x)
    return int(hits[0]) if hits.size else None


def loser_peak(game: WinProbSeries) -> float:
    """Peak win probability of the team that lost, first element included."""
    if game.outcome is Outcome.B_WINS:
        return float(game.series.max())
    return float(1.0 - game.series.min())


def winner_min(event: NPlayerSeries) -> float:
    """Lowest probability the eventual winner was ever given."""
    return float(event.series[:, event.winner_index].min())
