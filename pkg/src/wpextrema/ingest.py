"""Game records, file formats, orientation, p0 binning and per-bin diagnostics.

Two on-disk formats are read and written:

* JSONL, one game per line::

    {"game_id": "g1", "league": "NFL", "season": 2019, "winner": "A",
     "series": [0.52, 0.61, ..., 1.0]}

* long-form CSV: ``games.csv`` (game_id,league,season,winner) plus
  ``series.csv`` (game_id,step,wp_a) with steps 0, 1, 2, ... per game.

``series`` is always team A's win probability.  Parse problems are collected
per line instead of aborting the whole file.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .laws import DomainError, Law, loser_max_cdf
from .paths import Outcome, WinProbSeries, loser_peak
from .stats import (
    KL_BINS,
    PathSample,
    ecdf_eval,
    kl_divergence_binned,
    ks_pvalue,
    ks_statistic,
)

PathLike = Union[str, Path]

DEFAULT_CENTERS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DIAGNOSTIC_HEADER = ("p0", "n", "kl", "ks_d", "p_value", "reject")


class IngestError(Exception):
    """A file could not be read at all (as opposed to a bad record)."""


class Winner(str, enum.Enum):
    A = "A"
    B = "B"
    TIE = "tie"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value) -> "Winner":
        if isinstance(value, Winner):
            return value
        if value is None or (isinstance(value, str) and value.strip() == ""):
            return cls.UNKNOWN
        text = str(value).strip()
        for w in cls:
            if text.lower() == w.value.lower():
                return w
        raise DomainError(f"winner must be one of A, B, tie, unknown; got {value!r}")


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    series: np.ndarray
    winner: Winner
    league: str = ""
    season: int = 0

    def __post_init__(self):
        arr = np.asarray(self.series, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError("series needs at least 2 values")
        if np.isnan(arr).any() or (arr < 0.0).any() or (arr > 1.0).any():
            raise DomainError("series values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "series", arr)
        object.__setattr__(self, "winner", Winner.parse(self.winner))
        object.__setattr__(self, "game_id", str(self.game_id))
        object.__setattr__(self, "league", str(self.league))
        object.__setattr__(self, "season", int(self.season))

    @property
    def p0(self) -> float:
        return float(self.series[0])

    def to_series(self) -> WinProbSeries:
        if self.winner not in (Winner.A, Winner.B):
            raise DomainError(f"game {self.game_id} has no decisive winner")
        return WinProbSeries(self.game_id, self.series, Outcome(self.winner.value))

    def to_json(self) -> dict:
        return {"game_id": self.game_id, "league": self.league, "season": self.season,
                "winner": self.winner.value, "series": [float(v) for v in self.series]}

    def __eq__(self, other):
        if not isinstance(other, GameRecord):
            return NotImplemented
        return (self.game_id, self.league, self.season, self.winner) == (
            other.game_id, other.league, other.season, other.winner
        ) and np.array_equal(self.series, other.series)

    __hash__ = None


@dataclass(frozen=True)
class ParseIssue:
    source: str
    line: int
    message: str

    def __str__(self):
        return f"{self.source}:{self.line}: {self.message}"


@dataclass
class ParseResult:
    records: list
    errors: list = field(default_factory=list)


# --- parsing -----------------------------------------------------------------


def _series_values(raw) -> list:
    if not isinstance(raw, list):
        raise DomainError("series must be a list of numbers")
    vals = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise DomainError(f"series entry {v!r} is not a number")
        v = float(v)
        if math.isnan(v) or not (0.0 <= v <= 1.0):
            raise DomainError(f"series value {v!r} out of range [0, 1]")
        vals.append(v)
    return vals


def _season(raw) -> int:
    if raw is None or raw == "":
        return 0
    if isinstance(raw, bool):
        raise DomainError("season must be an integer")
    try:
        val = int(raw)
    except (TypeError, ValueError):
        raise DomainError(f"season must be an integer, got {raw!r}") from None
    if isinstance(raw, float) and raw != val:
        raise DomainError(f"season must be an integer, got {raw!r}")
    return val


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc


def parse_jsonl(path: PathLike) -> ParseResult:
    path = Path(path)
    result = ParseResult(records=[])
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise DomainError("each line must be a JSON object")
            if "game_id" not in obj:
                raise DomainError("missing game_id")
            if "series" not in obj or obj["series"] is None:
                raise DomainError("missing series")
            rec = GameRecord(
                game_id=str(obj["game_id"]),
                league=str(obj.get("league") or ""),
                season=_season(obj.get("season")),
                winner=Winner.parse(obj.get("winner")),
                series=_series_values(obj["series"]),
            )
        except (json.JSONDecodeError, DomainError) as exc:
            result.errors.append(ParseIssue(str(path), lineno, str(exc)))
            continue
        result.records.append(rec)
    return result


def _csv_rows(path: Path, header: Sequence[str]):
    text = _read_text(path)
    reader = csv.reader(text.splitlines())
    first = next(reader, None)
    if first is None or [h.strip() for h in first] != list(header):
        raise IngestError(f"{path}: expected header {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if row:
            yield lineno, row


def parse_long_csv(games_path: PathLike, series_path: PathLike) -> ParseResult:
    games_path, series_path = Path(games_path), Path(series_path)
    result = ParseResult(records=[])
    meta = {}
    for lineno, row in _csv_rows(games_path, ("game_id", "league", "season", "winner")):
        try:
            if len(row) != 4:
                raise DomainError(f"expected 4 fields, got {len(row)}")
            gid = row[0]
            if gid in meta:
                raise DomainError(f"duplicate game_id {gid!r}")
            meta[gid] = (lineno, row[1], _season(row[2]), Winner.parse(row[3]))
        except DomainError as exc:
            result.errors.append(ParseIssue(str(games_path), lineno, str(exc)))

    steps: dict = {}
    for lineno, row in _csv_rows(series_path, ("game_id", "step", "wp_a")):
        try:
            if len(row) != 3:
                raise DomainError(f"expected 3 fields, got {len(row)}")
            gid = row[0]
            if gid not in meta:
                raise DomainError(f"series row for unknown game_id {gid!r}")
            step = int(row[1])
            val = float(row[2])
            if math.isnan(val) or not (0.0 <= val <= 1.0):
                raise DomainError(f"wp_a {row[2]!r} out of range [0, 1]")
            steps.setdefault(gid, []).append((step, val))
        except (ValueError, DomainError) as exc:
            result.errors.append(ParseIssue(str(series_path), lineno, str(exc)))

    for gid, (lineno, league, season, winner) in meta.items():
        try:
            pts = sorted(steps.get(gid, []))
            if not pts:
                raise DomainError(f"missing series for game_id {gid!r}")
            if [s for s, _ in pts] != list(range(len(pts))):
                raise DomainError(f"steps for game_id {gid!r} are not contiguous from 0")
            rec = GameRecord(gid, [v for _, v in pts], winner, league, season)
        except DomainError as exc:
            result.errors.append(ParseIssue(str(games_path), lineno, str(exc)))
            continue
        result.records.append(rec)
    return result


def parse_games(source: PathLike, series_source: Optional[PathLike] = None) -> ParseResult:
    """Read JSONL, or the games/series CSV pair when ``series_source`` is given.

    A ``.csv`` source without ``series_source`` looks for ``series.csv`` in the
    same directory.
    """
    source = Path(source)
    if series_source is not None:
        return parse_long_csv(source, series_source)
    if source.suffix.lower() == ".csv":
        return parse_long_csv(source, source.with_name("series.csv"))
    return parse_jsonl(source)


# --- writing -----------------------------------------------------------------


def write_jsonl(records: Iterable[GameRecord], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")))
            fh.write("\n")


def write_long_csv(records: Iterable[GameRecord], games_path: PathLike,
                   series_path: PathLike) -> None:
    with open(games_path, "w", encoding="utf-8", newline="") as g, \
            open(series_path, "w", encoding="utf-8", newline="") as s:
        gw = csv.writer(g, lineterminator="\n")
        sw = csv.writer(s, lineterminator="\n")
        gw.writerow(["game_id", "league", "season", "winner"])
        sw.writerow(["game_id", "step", "wp_a"])
        for rec in records:
            gw.writerow([rec.game_id, rec.league, rec.season, rec.winner.value])
            for k, v in enumerate(rec.series):
                sw.writerow([rec.game_id, k, repr(float(v))])


# --- orientation and filtering ----------------------------------------------


@dataclass(frozen=True)
class FilterPolicy:
    seasons: Optional[frozenset] = None
    leagues: Optional[frozenset] = None


@dataclass
class FilterCounts:
    input: int = 0
    ties: int = 0
    unknown: int = 0
    season_excluded: int = 0
    league_excluded: int = 0
    reoriented: int = 0
    retained: int = 0

    @property
    def dropped(self) -> int:
        return self.ties + self.unknown + self.season_excluded + self.league_excluded


def orient(rec: GameRecord) -> GameRecord:
    """Store the favourite's probability; a 0.5 start keeps its labels."""
    if rec.series[0] >= 0.5:
        return rec
    flip = {Winner.A: Winner.B, Winner.B: Winner.A}.get(rec.winner, rec.winner)
    return GameRecord(rec.game_id, 1.0 - rec.series, flip, rec.league, rec.season)


def orient_and_filter(games: Iterable[GameRecord], policy: Optional[FilterPolicy] = None):
    """Drop undecided games, apply season/league filters, orient to the favourite.

    Returns ``(records, counts)``.
    """
    policy = policy or FilterPolicy()
    counts = FilterCounts()
    kept = []
    for rec in games:
        counts.input += 1
        if rec.winner is Winner.TIE:
            counts.ties += 1
            continue
        if rec.winner is Winner.UNKNOWN:
            counts.unknown += 1
            continue
        if policy.seasons is not None and rec.season not in policy.seasons:
            counts.season_excluded += 1
            continue
        if policy.leagues is not None and rec.league not in policy.leagues:
            counts.league_excluded += 1
            continue
        oriented = orient(rec)
        if oriented is not rec:
            counts.reoriented += 1
        kept.append(oriented)
    counts.retained = len(kept)
    return kept, counts


# --- binning -----------------------------------------------------------------


def _dec(x) -> Decimal:
    # the shortest repr, so 0.525 is compared as the decimal 0.525
    return Decimal(repr(float(x)))


@dataclass(frozen=True)
class BinConfig:
    centers: tuple = DEFAULT_CENTERS
    width: float = 0.05
    min_count: int = 100

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        if not centers:
            raise DomainError("need at least one bin center")
        if self.width <= 0:
            raise DomainError("bin width must be positive")
        if self.min_count < 1:
            raise DomainError("min_count must be >= 1")
        dec = [_dec(c) for c in centers]
        for a, b in zip(dec, dec[1:]):
            if not b > a:
                raise DomainError("bin centers must be strictly increasing")
            if b - a < _dec(self.width):
                raise DomainError("bins overlap: center spacing is below the width")
        object.__setattr__(self, "centers", centers)

    def intervals(self):
        half = _dec(self.width) / 2
        return [(c, _dec(c) - half, _dec(c) + half) for c in self.centers]

    def locate(self, p0: float) -> Optional[float]:
        """Center of the right-open bin holding ``p0``, or None."""
        d = _dec(p0)
        for c, lo, hi in self.intervals():
            if lo <= d < hi:
                return c
        return None


@dataclass
class Binning:
    samples: dict
    p0s: dict
    counts: dict
    omitted: dict
    out_of_range: int
    config: BinConfig

    @property
    def centers(self) -> list:
        return sorted(self.samples)


def bin_games(games: Iterable[GameRecord], config: Optional[BinConfig] = None) -> Binning:
    """Group oriented games by p0 and reduce each to its loser peak."""
    config = config or BinConfig()
    peaks: dict = {c: [] for c in config.centers}
    starts: dict = {c: [] for c in config.centers}
    outside = 0
    for rec in games:
        center = config.locate(rec.p0)
        if center is None:
            outside += 1
            continue
        peaks[center].append(loser_peak(rec.to_series()))
        starts[center].append(rec.p0)
    counts = {c: len(v) for c, v in peaks.items()}
    samples, p0s, omitted = {}, {}, {}
    for c in config.centers:
        if counts[c] >= config.min_count:
            samples[c] = PathSample(peaks[c], label=f"{c:.2f}")
            p0s[c] = np.asarray(starts[c])
        else:
            omitted[c] = counts[c]
    return Binning(samples, p0s, counts, omitted, outside, config)


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class BinDiagnostics:
    p0_center: float
    n: int
    kl: float
    ks_d: float
    p_value: float
    reject: bool

    def row(self) -> list:
        return [repr(float(self.p0_center)), str(self.n), repr(float(self.kl)),
                repr(float(self.ks_d)), repr(float(self.p_value)), "1" if self.reject else "0"]


def mixture_loser_cdf(p0s: Sequence[float]):
    """Average of the loser-max laws at the given starting probabilities."""
    vals, weights = np.unique(np.asarray(p0s, dtype=np.float64), return_counts=True)
    weights = weights / weights.sum()

    def cdf(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for p, w in zip(vals, weights):
            out = out + w * loser_max_cdf(p, x)
        return out

    return cdf


def reference_law(binning: Binning, center: float, mode: str = "center"):
    if mode == "center":
        return Law.loser_max(center)
    if mode == "mixture":
        return mixture_loser_cdf(binning.p0s[center])
    raise DomainError(f"unknown reference mode {mode!r}; use 'center' or 'mixture'")


def diagnostic_table(binning: Binning, alpha: float = 0.05, m: Optional[int] = None,
                     mode: str = "center", kl_bins: int = KL_BINS) -> list:
    """One row per retained bin: n, binned KL, K-S distance, p-value, Bonferroni flag."""
    centers = binning.centers
    if not centers:
        return []
    stats = []
    for c in centers:
        sample = binning.samples[c]
        f0 = reference_law(binning, c, mode)
        stats.append((c, sample.n, ks_statistic(sample, f0),
                      kl_divergence_binned(sample, f0, kl_bins)))
    return diagnostics_from_statistics(stats, alpha, m)


def diagnostics_from_statistics(stats: Sequence[Sequence], alpha: float = 0.05,
                                m: Optional[int] = None) -> list:
    """Rows from precomputed ``(center, n, d_n[, kl])`` tuples.

    Adds the asymptotic p-value and the Bonferroni flag ``p < alpha/m``
    (``m`` defaults to the number of rows).  KL is NaN when not supplied.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    m = len(stats) if m is None else int(m)
    if m < 1:
        raise DomainError("m must be >= 1")
    rows = []
    for entry in sorted(stats, key=lambda e: e[0]):
        c, n, d = entry[0], int(entry[1]), float(entry[2])
        kl = float(entry[3]) if len(entry) > 3 else math.nan
        p = ks_pvalue(n, d)
        rows.append(BinDiagnostics(float(c), n, kl, d, p, p < alpha / m))
    return rows


def write_diagnostics_csv(rows: Sequence[BinDiagnostics], path: PathLike,
                          delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(DIAGNOSTIC_HEADER)
        for r in rows:
            w.writerow(r.row())


def overlay_data(binning: Binning, mode: str = "center") -> list:
    """Rows ``(p0, x, ecdf, theory)`` at each distinct loser peak of each bin."""
    rows = []
    for c in binning.centers:
        sample = binning.samples[c]
        f0 = reference_law(binning, c, mode)
        x = np.unique(sample.values)
        theory = f0.cdf(x) if isinstance(f0, Law) else f0(x)
        for xi, ei, ti in zip(x, ecdf_eval(sample, x), theory):
            rows.append((c, float(xi), float(ei), float(ti)))
    return rows


def qq_data(binning: Binning, mode: str = "center") -> list:
    """Rows ``(p0, theoretical_quantile, empirical_quantile)`` at positions (i - 0.5)/n."""
    rows = []
    for c in binning.centers:
        sample = binning.samples[c]
        if mode == "center":
            law = Law.loser_max(c)
            u = (np.arange(1, sample.n + 1) - 0.5) / sample.n
            theo = law.quantile(u)
        else:
            theo = _mixture_quantile(binning.p0s[c], sample.n)
        for t, e in zip(theo, sample.values):
            rows.append((c, float(t), float(e)))
    return rows


def _mixture_quantile(p0s, n: int) -> np.ndarray:
    # the mixture cdf is continuous and increasing on its support; bisect it
    cdf = mixture_loser_cdf(p0s)
    u = (np.arange(1, n + 1) - 0.5) / n
    lo = np.zeros(n)
    hi = np.ones(n)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


def write_rows(rows: Iterable[Sequence], header: Sequence[str], path: PathLike,
               delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
