"""Exact martingale path generators used as a Monte Carlo oracle.

Three generators:

``bridge``   p_k = Phi((W_{k/N} - c) / sqrt(1 - k/N)) with c = -Phi^{-1}(p0) and
             p_N = 1{W_1 >= c}; an exact sampling of E[Y | F_t] for Brownian W.
``grid``     symmetric +-h walk on {0, h, ..., 1}, absorbed at both ends.
``nplayer``  n coordinates on the same lattice; each step moves h from one
             uniformly chosen alive player to another (or back), players at 0
             drop out, and the run stops when someone reaches 1.

Draws come from counter-based streams keyed by (master_seed, path index), so a
sample is a pure function of the configuration whatever the chunking or the
number of worker threads.  The bridge can also report extrema of the
continuous path between grid times (``monitor="continuous"``): each step adds
an exact Brownian-bridge supremum/infimum drawn from the same stream, with the
final step split geometrically towards t = 1.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _rng
from ._backend import kernels
from .ingest import GameRecord, Winner
from .laws import DomainError, Law, PriorVector
from .paths import NPlayerSeries, Outcome, WinProbSeries
from .stats import PathSample, lattice_distance, sup_distance

DEFAULT_CHUNK = 8192


class SimulationError(RuntimeError):
    """No usable paths, or a walk failed to absorb within its step budget."""


class Generator(str, enum.Enum):
    GAUSSIAN_BRIDGE = "bridge"
    GRID_WALK = "grid"
    NPLAYER_GRID_WALK = "nplayer"


class Functional(str, enum.Enum):
    MAX = "max"
    LOSER_PEAK = "loser-peak"
    WINNER_MIN = "winner-min"
    MAX_GIVEN_LOSS = "max-given-loss"


class Monitor(str, enum.Enum):
    GRID = "grid"
    CONTINUOUS = "continuous"


def grid_cells(h) -> int:
    """K such that h = 1/K exactly."""
    frac = h if isinstance(h, Fraction) else Fraction(str(h)) if isinstance(h, str) \
        else Fraction(h).limit_denominator(10 ** 9)
    if frac <= 0 or frac.numerator != 1:
        raise DomainError(f"grid step must be 1/K for an integer K, got {h!r}")
    return frac.denominator


def lattice_index(p: float, cells: int) -> int:
    m = round(p * cells)
    if abs(m / cells - p) > 1e-9:
        raise DomainError(f"{p!r} is not a multiple of 1/{cells}")
    return int(m)


def lattice_level(x: float, cells: int) -> int:
    """Smallest m with m/cells >= x, compared exactly as the path values are."""
    m = max(0, math.ceil(x * cells))
    while m > 0 and (m - 1) / cells >= x:
        m -= 1
    while m / cells < x:
        m += 1
    return m


@dataclass(frozen=True)
class SimConfig:
    generator: Generator
    p0: Optional[float] = None
    priors: Optional[tuple] = None
    steps: int = 2000
    grid_step: Optional[Fraction] = None
    n_paths: int = 100_000
    master_seed: int = 0
    max_steps: Optional[int] = None
    monitor: Monitor = Monitor.GRID

    def __post_init__(self):
        gen = Generator(self.generator)
        object.__setattr__(self, "generator", gen)
        object.__setattr__(self, "monitor", Monitor(self.monitor))
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise DomainError("n_paths must be a positive integer")
        object.__setattr__(self, "master_seed", int(self.master_seed) & _rng.MASK64)
        if gen is Generator.NPLAYER_GRID_WALK:
            if self.priors is None:
                raise DomainError("the n-player generator needs priors")
            pv = self.priors if isinstance(self.priors, PriorVector) else PriorVector(self.priors)
            object.__setattr__(self, "priors", tuple(pv.priors))
        else:
            if self.p0 is None:
                raise DomainError(f"the {gen.value} generator needs p0")
            p0 = float(self.p0)
            if not 0.0 < p0 < 1.0:
                raise DomainError(f"p0 must lie in (0, 1), got {self.p0!r}")
            object.__setattr__(self, "p0", p0)
        if gen is Generator.GAUSSIAN_BRIDGE:
            if int(self.steps) != self.steps or self.steps < 2:
                raise DomainError("the bridge needs steps >= 2")
        else:
            if self.grid_step is None:
                raise DomainError(f"the {gen.value} generator needs grid_step")
            k = grid_cells(self.grid_step)
            object.__setattr__(self, "grid_step", Fraction(1, k))
            for p in (self.priors or (self.p0,)):
                lattice_index(p, k)
            if self.max_steps is not None and self.max_steps < 1:
                raise DomainError("max_steps must be positive")

    @property
    def cells(self) -> int:
        return self.grid_step.denominator

    @property
    def step_budget(self) -> int:
        """Walk step cap: 100 K^2 p0 (1 - p0), about 100x the mean absorption time.

        The n-player walk uses 100 K^2, the bound for a two-player contest.
        """
        if self.max_steps is not None:
            return int(self.max_steps)
        k = self.cells
        if self.generator is Generator.GRID_WALK:
            return max(1, math.ceil(100 * k * k * self.p0 * (1.0 - self.p0)))
        return 100 * k * k

    def as_dict(self) -> dict:
        d = {"generator": self.generator.value, "n_paths": self.n_paths,
             "master_seed": self.master_seed}
        if self.generator is Generator.NPLAYER_GRID_WALK:
            d["priors"] = list(self.priors)
        else:
            d["p0"] = self.p0
        if self.generator is Generator.GAUSSIAN_BRIDGE:
            d["steps"] = self.steps
            d["monitor"] = self.monitor.value
        else:
            d["grid_step"] = str(self.grid_step)
            d["max_steps"] = self.step_budget
        return d


# --- single paths ------------------------------------------------------------


def gaussian_bridge_path(p0: float, steps: int, seed: int, index: int = 0) -> WinProbSeries:
    cfg = SimConfig(Generator.GAUSSIAN_BRIDGE, p0=p0, steps=steps, n_paths=1, master_seed=seed)
    out, y = kernels.bridge_paths(np.array([cfg.p0]), cfg.steps,
                                  _rng.seed_hash(cfg.master_seed), index)
    outcome = Outcome.A_WINS if y[0] else Outcome.B_WINS
    return WinProbSeries(f"bridge-{seed}-{index}", out[0], outcome)


def grid_walk_path(p0: float, h, seed: int, max_steps: Optional[int] = None,
                   index: int = 0) -> WinProbSeries:
    cfg = SimConfig(Generator.GRID_WALK, p0=p0, grid_step=h, n_paths=1, master_seed=seed,
                    max_steps=max_steps)
    k = cfg.cells
    sh = _rng.seed_hash(cfg.master_seed)
    m0 = lattice_index(cfg.p0, k)
    res = kernels.grid_walk(np.array([m0], dtype=np.int64), k, cfg.step_budget, sh, index, k + 1)
    if not res[3][0]:
        raise SimulationError(f"walk not absorbed within {cfg.step_budget} steps")
    m = kernels.grid_paths(m0, k, int(res[4][0]), sh, index, 1)[0]
    outcome = Outcome.A_WINS if res[2][0] else Outcome.B_WINS
    return WinProbSeries(f"grid-{seed}-{index}", m / k, outcome)


def n_player_grid_walk(priors, h, seed: int, max_steps: Optional[int] = None,
                       index: int = 0) -> NPlayerSeries:
    """One pair-transfer contest, returned as the full sequence of probability vectors."""
    cfg = SimConfig(Generator.NPLAYER_GRID_WALK, priors=priors, grid_step=h, n_paths=1,
                    master_seed=seed, max_steps=max_steps)
    k = cfg.cells
    m = [lattice_index(p, k) for p in cfg.priors]
    key = _rng.path_key(cfg.master_seed, index)
    rows = [list(m)]
    alive = [q for q, v in enumerate(m) if v > 0]
    winner = next((q for q, v in enumerate(m) if v == k), -1)
    step = 0
    while winner < 0 and step < cfg.step_budget:
        u = _rng.raw(key, step)
        step += 1
        a = len(alive)
        r = int(((u >> 11) * _rng.TWO_M53) * (a * (a - 1) // 2))
        ri = 0
        while r >= a - 1 - ri:
            r -= a - 1 - ri
            ri += 1
        pi, pj = alive[ri], alive[ri + 1 + r]
        d = 1 if u & 1 else -1
        m[pi] += d
        m[pj] -= d
        rows.append(list(m))
        if m[pi] == k:
            winner = pi
        elif m[pj] == k:
            winner = pj
        alive = [q for q in alive if m[q] > 0]
    if winner < 0:
        raise SimulationError(f"contest not decided within {cfg.step_budget} steps")
    return NPlayerSeries(f"nplayer-{seed}-{index}", np.asarray(rows, dtype=np.float64) / k, winner)


# --- Monte Carlo -------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloSample:
    sample: PathSample
    generated: int
    retained: int
    unabsorbed: int
    functional: Functional
    config: SimConfig

    @property
    def values(self) -> np.ndarray:
        return self.sample.values


def _ranges(n: int, chunk: int):
    return [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]


def _map_chunks(fn, n: int, workers: int, chunk: int):
    parts = _ranges(n, chunk)
    if workers <= 1 or len(parts) == 1:
        return [fn(lo, hi) for lo, hi in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), parts))


def _bridge_outputs(p0s: np.ndarray, steps: int, seed: int, level: float, continuous: bool,
                    workers: int = 1, chunk: int = DEFAULT_CHUNK, start: int = 0):
    sh = _rng.seed_hash(seed)

    def run(lo, hi):
        return kernels.bridge_extrema(np.ascontiguousarray(p0s[lo:hi]), steps, sh,
                                      start + lo, level, continuous)

    parts = _map_chunks(run, len(p0s), workers, chunk)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(5))


def _grid_outputs(cfg: SimConfig, level_m: int, workers: int, chunk: int):
    k = cfg.cells
    sh = _rng.seed_hash(cfg.master_seed)
    m0 = lattice_index(cfg.p0, k)

    def run(lo, hi):
        return kernels.grid_walk(np.full(hi - lo, m0, dtype=np.int64), k, cfg.step_budget,
                                 sh, lo, level_m)

    parts = _map_chunks(run, cfg.n_paths, workers, chunk)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(7))


def _nplayer_outputs(cfg: SimConfig, workers: int, chunk: int):
    k = cfg.cells
    sh = _rng.seed_hash(cfg.master_seed)
    m0 = np.array([lattice_index(p, k) for p in cfg.priors], dtype=np.int64)

    def run(lo, hi):
        return kernels.nplayer_walk(m0, k, cfg.step_budget, sh, lo, hi - lo)

    parts = _map_chunks(run, cfg.n_paths, workers, chunk)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def _two_sided(functional: Functional, hi, lo, y):
    """Functional values from per-path max, min and outcome of p (team A)."""
    if functional is Functional.MAX:
        return hi
    if functional is Functional.MAX_GIVEN_LOSS:
        return hi[y == 0]
    if functional is Functional.LOSER_PEAK:
        return np.where(y == 1, 1.0 - lo, hi)
    if functional is Functional.WINNER_MIN:
        return np.where(y == 1, lo, 1.0 - hi)
    raise DomainError(f"unsupported functional {functional!r}")


def monte_carlo_samples(config: SimConfig, functionals: Sequence, workers: int = 1,
                        chunk: int = DEFAULT_CHUNK) -> dict:
    """Several functionals of one simulation, keyed by :class:`Functional`.

    Each path is generated once; the samples are exactly those that
    :func:`monte_carlo_sample` would return one functional at a time.
    """
    functionals = [Functional(f) for f in functionals]
    unabsorbed = 0
    if config.generator is Generator.GAUSSIAN_BRIDGE:
        p0s = np.full(config.n_paths, config.p0)
        hi, lo, y, _, _ = _bridge_outputs(p0s, config.steps, config.master_seed, math.nan,
                                          config.monitor is Monitor.CONTINUOUS, workers, chunk)
        values = {f: _two_sided(f, hi, lo, y) for f in functionals}
    elif config.generator is Generator.GRID_WALK:
        k = config.cells
        mx, mn, y, ab, *_ = _grid_outputs(config, k + 1, workers, chunk)
        ok = ab == 1
        unabsorbed = int((~ok).sum())
        values = {f: _two_sided(f, mx[ok] / k, mn[ok] / k, y[ok]) for f in functionals}
    else:
        if any(f is not Functional.WINNER_MIN for f in functionals):
            raise DomainError("the n-player generator supports the winner-min functional only")
        winner, wmin, _, ab = _nplayer_outputs(config, workers, chunk)
        ok = ab == 1
        unabsorbed = int((~ok).sum())
        values = {f: wmin[ok] / config.cells for f in functionals}
    out = {}
    for f, v in values.items():
        if v.size == 0:
            raise SimulationError(f"no paths retained for {f.value}")
        label = f"{config.generator.value}:{f.value}"
        out[f] = MonteCarloSample(PathSample(v, label=label), config.n_paths, int(v.size),
                                  unabsorbed, f, config)
    return out


def monte_carlo_sample(config: SimConfig, functional, workers: int = 1,
                       chunk: int = DEFAULT_CHUNK) -> MonteCarloSample:
    """Simulate ``config.n_paths`` paths and reduce each to ``functional``.

    Walks that fail to absorb within the step budget are discarded and
    counted in ``unabsorbed``; ``MaxGivenLoss`` keeps losing paths only.
    """
    functional = Functional(functional)
    return monte_carlo_samples(config, [functional], workers, chunk)[functional]


def reference_law(config: SimConfig, functional) -> Law:
    """Continuous-time law that ``functional`` follows under ``config``."""
    functional = Functional(functional)
    if config.generator is Generator.NPLAYER_GRID_WALK:
        return Law.winner_min(config.priors)
    if functional is Functional.MAX:
        return Law.max_unconditional(config.p0)
    if functional is Functional.MAX_GIVEN_LOSS:
        return Law.max_conditional_loss(config.p0)
    if functional is Functional.LOSER_PEAK:
        return Law.loser_max(config.p0)
    return Law.winner_min((config.p0, 1.0 - config.p0))


def oracle_distance(result: MonteCarloSample) -> float:
    """Distance between a simulated sample and its closed-form law.

    Bridge samples use the sup over [0, 1], or over [p0, 1 - 1/N] for the
    unconditional maximum whose atom at 1 a finite grid cannot reach.  Walk
    samples are compared on the lattice points below 1, where the laws hold
    exactly: as P(V < x) for maxima and as P(V <= x) for winner minima.
    """
    cfg = result.config
    law = reference_law(cfg, result.functional)
    if cfg.generator is Generator.GAUSSIAN_BRIDGE:
        if result.functional is Functional.MAX:
            return sup_distance(result.sample, law, cfg.p0, 1.0 - 1.0 / cfg.steps)
        return sup_distance(result.sample, law)
    points = np.arange(cfg.cells) / cfg.cells
    side = "right" if result.functional is Functional.WINNER_MIN else "left"
    return lattice_distance(result.sample, law, points, side=side)


# --- optional-stopping decomposition ----------------------------------------


@dataclass(frozen=True)
class StoppingDecomposition:
    """Monte Carlo estimate of p0 = main + last step + overshoot at level x.

    ``term_main`` = x P(tau <= N_end) = x P(M >= x); ``term_laststep`` =
    (1 - x) P(tau = N_end); ``term_overshoot`` = E[(p_tau - x) 1{tau < N_end}].
    Per path the three pieces add up to p at min(tau, N_end), so ``total`` is
    an average of bounded martingale values and ``std_error`` its standard error.
    """

    level: float
    p0: float
    n_paths: int
    term_main: float
    term_laststep: float
    term_overshoot: float
    total: float
    std_error: float
    se_main: float
    se_laststep: float
    se_overshoot: float
    unabsorbed: int = 0

    @property
    def corrections(self) -> float:
        return self.term_laststep + self.term_overshoot

    @property
    def tail_probability(self) -> float:
        return self.term_main / self.level

    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.total == self.p0 else math.inf
        return (self.total - self.p0) / self.std_error


def _mean_se(v: np.ndarray):
    n = v.size
    if n < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))


def stopping_identity_report(config: SimConfig, x: float, workers: int = 1,
                             chunk: int = DEFAULT_CHUNK) -> StoppingDecomposition:
    """Split the optional-stopping identity at level x into its three terms.

    For the bridge the horizon is N and passages are checked on the sampled
    grid; for the walk the horizon is the absorption time.
    """
    x = float(x)
    if config.generator is Generator.NPLAYER_GRID_WALK:
        raise DomainError("the decomposition is defined for two-sided generators")
    if not (config.p0 < x < 1.0):
        raise DomainError(f"level must lie in (p0, 1) = ({config.p0}, 1), got {x!r}")
    unabsorbed = 0
    if config.generator is Generator.GAUSSIAN_BRIDGE:
        p0s = np.full(config.n_paths, config.p0)
        _, _, y, tau, p_tau = _bridge_outputs(p0s, config.steps, config.master_seed, x,
                                              False, workers, chunk)
        hit = tau >= 0
        last = tau == config.steps
    else:
        k = config.cells
        _, _, y, ab, steps, tau, m_tau = _grid_outputs(config, lattice_level(x, k), workers, chunk)
        ok = ab == 1
        unabsorbed = int((~ok).sum())
        y, steps, tau, m_tau = y[ok], steps[ok], tau[ok], m_tau[ok]
        hit = tau >= 0
        last = hit & (tau == steps)
        p_tau = m_tau / k
    early = hit & ~last
    main = np.where(hit, x, 0.0)
    lastv = np.where(last, 1.0 - x, 0.0)
    over = np.where(early, p_tau - x, 0.0)
    n = main.size
    if n == 0:
        raise SimulationError("no paths retained")
    m_mean, m_se = _mean_se(main)
    l_mean, l_se = _mean_se(lastv)
    o_mean, o_se = _mean_se(over)
    t_mean, t_se = _mean_se(main + lastv + over)
    return StoppingDecomposition(x, config.p0, n, m_mean, l_mean, o_mean, m_mean + l_mean + o_mean,
                                 t_se, m_se, l_se, o_se, unabsorbed)


# --- export and synthetic corpora -------------------------------------------


def write_sample_csv(sample, path, header: str = "value", delimiter: str = ",") -> None:
    """One value per line, shortest round-trip repr, under a one-word header."""
    values = sample.values if hasattr(sample, "values") else np.asarray(sample)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([header])
        for v in values:
            w.writerow([repr(float(v))])


def shrink_series(series: np.ndarray, factor: float) -> np.ndarray:
    """Pull every probability towards 1/2: p -> 1/2 + factor (p - 1/2)."""
    return 0.5 + factor * (np.asarray(series, dtype=np.float64) - 0.5)


def synthetic_corpus(centers: Sequence[float], games_per_bin: int, steps: int, seed: int,
                     width: float = 0.05, shrink: Optional[float] = None,
                     league: str = "SIM", season: int = 0) -> list:
    """Calibrated bridge games with p0 spread uniformly over each bin.

    Team A is the favourite or the underdog with equal chance, so the corpus
    exercises orientation.  ``shrink`` applies :func:`shrink_series` to every
    path, which mimics a forecaster whose probabilities are too timid.
    """
    if games_per_bin < 1:
        raise DomainError("games_per_bin must be positive")
    rng = np.random.default_rng([int(seed) & _rng.MASK64, 0x5EED])
    fav = np.concatenate([rng.uniform(c - width / 2, c + width / 2, games_per_bin)
                          for c in centers])
    fav = np.clip(fav, 1e-9, 1 - 1e-9)
    a_is_fav = rng.random(fav.size) < 0.5
    p0s = np.where(a_is_fav, fav, 1.0 - fav)
    out, y = kernels.bridge_paths(p0s, int(steps), _rng.seed_hash(seed), 0)
    games = []
    for i in range(p0s.size):
        series = out[i] if shrink is None else shrink_series(out[i], shrink)
        games.append(GameRecord(f"sim-{seed}-{i}", series, Winner.A if y[i] else Winner.B,
                                league, season))
    return games
