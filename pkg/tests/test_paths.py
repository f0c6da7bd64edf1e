import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpextrema.laws import DomainError, Law
from wpextrema.paths import (
    NPlayerSeries,
    Outcome,
    WinProbSeries,
    first_passage,
    loser_peak,
    path_max,
    winner_min,
)
from wpextrema.simulate import grid_walk_path, n_player_grid_walk
from wpextrema.stats import PathSample, lattice_distance

series_st = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=2, max_size=60)


class TestSeriesTypes:
    def test_win_prob_series(self):
        g = WinProbSeries("g", [0.6, 0.7, 1.0], "A")
        assert g.p0 == 0.6 and g.outcome is Outcome.A_WINS

    @pytest.mark.parametrize("bad", [[0.5], [0.5, 1.2], [0.5, -0.1], [0.5, float("nan")]])
    def test_rejects_bad_series(self, bad):
        with pytest.raises(DomainError):
            WinProbSeries("g", bad, "B")

    def test_rejects_unknown_outcome(self):
        with pytest.raises(DomainError):
            WinProbSeries("g", [0.5, 0.5], "draw")

    def test_nplayer_validation(self):
        NPlayerSeries("e", [[0.5, 0.5], [0.4, 0.6 + 5e-7]], 1)
        with pytest.raises(DomainError):
            NPlayerSeries("e", [[0.5, 0.5], [0.4, 0.7]], 1)
        with pytest.raises(DomainError):
            NPlayerSeries("e", [[0.5, 0.5]], 2)


class TestPathMax:
    def test_examples(self):
        assert path_max([0.5, 0.7, 0.2, 0.0]) == 0.7
        assert path_max([0.3]) == 0.3
        with pytest.raises(DomainError):
            path_max([])

    @settings(max_examples=300)
    @given(s=series_st)
    def test_brute_force_scan(self, s):
        best = s[0]
        for v in s:
            if v > best:
                best = v
        assert path_max(s) == best
        assert path_max(s) >= s[0] and path_max(s) >= s[-1]


class TestFirstPassage:
    def test_examples(self):
        assert first_passage([0.5, 0.6, 0.8], 0.75) == 2
        assert first_passage([0.5, 0.4], 0.9) is None
        assert first_passage([0.5, 0.2], 0.5) == 0

    def test_level_validation(self):
        with pytest.raises(DomainError):
            first_passage([0.5, 0.6], 1.5)

    @settings(max_examples=300)
    @given(s=series_st, x=st.floats(0.0, 1.0))
    def test_definition(self, s, x):
        k = first_passage(s, x)
        if k is None:
            assert all(v < x for v in s)
        else:
            assert s[k] >= x and all(v < x for v in s[:k])


class TestLoserPeak:
    def test_examples(self):
        assert loser_peak(WinProbSeries("g", [0.5, 0.8, 0.1, 0.0], "B")) == 0.8
        assert loser_peak(WinProbSeries("g", [0.5, 0.2, 0.9, 1.0], "A")) == pytest.approx(0.8, abs=1e-15)

    @settings(max_examples=300)
    @given(s=series_st, won=st.booleans())
    def test_bounds(self, s, won):
        g = WinProbSeries("g", s, "A" if won else "B")
        lp = loser_peak(g)
        assert lp >= min(s[0], 1 - s[0]) - 1e-15
        loser_track = [1 - v for v in s] if won else s
        if max(loser_track) < 1.0:
            assert lp < 1.0

    def test_simulated_games_follow_loser_law(self):
        # 10^5 walk games on a 1/20 lattice: the law holds exactly at lattice
        # levels, as P(peak < x) = F(x)
        peaks = [loser_peak(grid_walk_path(0.5, "1/20", seed=11, index=i)) for i in range(100_000)]
        law = Law.loser_max(0.5)
        pts = np.arange(20) / 20
        assert lattice_distance(PathSample(peaks), law, pts, side="left") < 0.01


class TestWinnerMin:
    def test_examples(self):
        ev = NPlayerSeries("e", [(1 / 3, 1 / 3, 1 / 3), (0.1, 0.4, 0.5), (0, 0, 1)], 2)
        assert winner_min(ev) == pytest.approx(1 / 3)
        ev = NPlayerSeries("e", [(0.5, 0.5), (0.5, 0.5), (0.0, 1.0)], 1)
        assert winner_min(ev) == 0.5

    def test_never_exceeds_prior(self):
        for i in range(50):
            ev = n_player_grid_walk((0.2, 0.3, 0.5), "1/10", seed=4, index=i)
            assert winner_min(ev) <= ev.series[0, ev.winner_index]

    def test_simulated_symmetric_events(self):
        mins = [winner_min(n_player_grid_walk((1 / 3,) * 3, "1/15", seed=8, index=i))
                for i in range(30_000)]
        frac = np.mean(np.asarray(mins) <= 0.2 + 1e-12)
        assert frac == pytest.approx(0.5, abs=0.01)
