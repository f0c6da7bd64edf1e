import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import ndtr

from conftest import bridge_samples
from wpextrema import _rng
from wpextrema.laws import DomainError
from wpextrema.paths import Outcome, path_max
from wpextrema.simulate import (
    Functional,
    SimConfig,
    SimulationError,
    gaussian_bridge_path,
    grid_walk_path,
    lattice_level,
    monte_carlo_sample,
    monte_carlo_samples,
    n_player_grid_walk,
    oracle_distance,
    stopping_identity_report,
    synthetic_corpus,
    write_sample_csv,
)
from wpextrema.stats import ecdf_eval


def chain_hit_probability(m0: int, target: int) -> float:
    """P(symmetric walk from m0 reaches target before 0), by solving the chain."""
    n = target + 1
    a = np.zeros((n, n))
    b = np.zeros(n)
    a[0, 0] = 1.0
    a[target, target] = 1.0
    b[target] = 1.0
    for m in range(1, target):
        a[m, m] = 1.0
        a[m, m - 1] = a[m, m + 1] = -0.5
    return float(np.linalg.solve(a, b)[m0])


class TestConfig:
    def test_bridge_needs_p0_and_steps(self):
        with pytest.raises(DomainError):
            SimConfig("bridge", steps=10)
        with pytest.raises(DomainError):
            SimConfig("bridge", p0=0.5, steps=1)

    def test_grid_alignment(self):
        cfg = SimConfig("grid", p0=0.3, grid_step="1/10")
        assert cfg.cells == 10 and cfg.grid_step == Fraction(1, 10)
        with pytest.raises(DomainError):
            SimConfig("grid", p0=0.35, grid_step="1/10")
        with pytest.raises(DomainError):
            SimConfig("grid", p0=0.5, grid_step="2/7")

    def test_default_step_budget(self):
        cfg = SimConfig("grid", p0=0.5, grid_step=Fraction(1, 10))
        assert cfg.step_budget == 100 * 100 * 0.25

    def test_nplayer_priors_on_grid(self):
        with pytest.raises(DomainError):
            SimConfig("nplayer", priors=(0.25, 0.75), grid_step="1/10")

    def test_lattice_level(self):
        assert lattice_level(0.8, 10) == 8
        assert lattice_level(0.85, 10) == 9
        assert lattice_level(0.7, 10) == 7


class TestSinglePaths:
    def test_bridge_path_is_the_stated_transform(self):
        p0, n, seed = 0.3, 40, 99
        g = gaussian_bridge_path(p0, n, seed, index=2)
        key = _rng.path_key(seed, 2)
        c = -_rng.norm_ppf(p0)
        w, expect = 0.0, [p0]
        for k in range(1, n + 1):
            w += math.sqrt(1 / n) * _rng.norm_ppf(_rng.uniform(key, 3 * (k - 1)))
            expect.append(float(ndtr((w - c) / math.sqrt(1 - k / n))) if k < n else float(w >= c))
        np.testing.assert_allclose(g.series, expect, rtol=0, atol=1e-14)
        assert g.outcome is (Outcome.A_WINS if expect[-1] == 1.0 else Outcome.B_WINS)

    def test_grid_path(self):
        g = grid_walk_path(0.4, "1/10", seed=3, index=5)
        steps = np.diff(np.round(g.series * 10))
        assert set(np.unique(steps)) <= {-1.0, 1.0}
        assert g.series[0] == 0.4 and g.series[-1] in (0.0, 1.0)
        assert np.all((g.series[1:-1] > 0) & (g.series[1:-1] < 1))

    def test_grid_path_unabsorbed(self):
        with pytest.raises(SimulationError):
            grid_walk_path(0.5, "1/100", seed=1, max_steps=3)

    def test_nplayer_moves(self):
        ev = n_player_grid_walk((0.2, 0.3, 0.5), "1/10", seed=2, index=7)
        m = np.round(ev.series * 10).astype(int)
        assert np.all(m.sum(axis=1) == 10)
        d = np.diff(m, axis=0)
        assert np.all(np.abs(d).sum(axis=1) == 2)
        for q in range(3):
            zero = np.flatnonzero(m[:, q] == 0)
            if zero.size:
                assert np.all(m[zero[0]:, q] == 0)
        assert m[-1, ev.winner_index] == 10

    def test_nplayer_replay_matches_kernel(self):
        cfg = SimConfig("nplayer", priors=(0.2, 0.3, 0.5), grid_step="1/10", n_paths=300, master_seed=6)
        mc = monte_carlo_sample(cfg, "winner-min")
        mins = []
        for i in range(300):
            ev = n_player_grid_walk((0.2, 0.3, 0.5), "1/10", seed=6, index=i)
            mins.append(ev.series[:, ev.winner_index].min())
        np.testing.assert_allclose(mc.values, np.sort(mins), atol=1e-15)


class TestMartingaleProperty:
    def test_bridge_increments(self):
        from wpextrema._backend import kernels

        out, _ = kernels.bridge_paths(np.full(100_000, 0.4), 50, _rng.seed_hash(5), 0)
        for k in (0, 1, 10, 25, 48, 49):
            inc = out[:, k + 1] - out[:, k]
            assert abs(inc.mean()) < 4 * inc.std() / math.sqrt(inc.size)

    def test_grid_increments(self):
        from wpextrema._backend import kernels

        out = kernels.grid_paths(3, 10, 80, _rng.seed_hash(5), 0, 100_000) / 10
        for k in (0, 5, 40, 79):
            inc = out[:, k + 1] - out[:, k]
            assert abs(inc.mean()) < 4 * inc.std() / math.sqrt(inc.size)


class TestBridgeOracle:
    def test_terminal_mean(self):
        y = 1.0 - ecdf_eval(bridge_samples(0.5, 2000, 200_000, 42)[Functional.MAX].sample, 1.0 - 1e-12)
        assert y == pytest.approx(0.5, abs=0.004)

    def test_tail_at_point_eight(self):
        s = bridge_samples(0.5, 2000, 200_000, 42)[Functional.MAX].sample
        assert 1.0 - ecdf_eval(s, np.nextafter(0.8, 0)) == pytest.approx(0.625, abs=0.01)

    @pytest.mark.parametrize("p0", [0.5, 0.75])
    def test_continuous_monitoring_meets_all_laws(self, p0):
        # same paths as the discrete run, with the bridge's exact extremum between grid points
        for f, r in bridge_samples(p0, 2000, 200_000, 42, "continuous").items():
            assert oracle_distance(r) < 0.01, f

    def test_discrete_bias_shrinks_like_root_n(self):
        coarse = oracle_distance(monte_carlo_sample(
            SimConfig("bridge", p0=0.5, steps=50, n_paths=50_000, master_seed=1), "loser-peak"))
        fine = oracle_distance(monte_carlo_sample(
            SimConfig("bridge", p0=0.5, steps=500, n_paths=50_000, master_seed=1), "loser-peak"))
        assert fine < coarse
        assert coarse / fine == pytest.approx(math.sqrt(10), rel=0.35)

    def test_convergence_in_steps(self):
        d = [oracle_distance(bridge_samples(0.5, n, 200_000, 42)[Functional.MAX]) for n in (50, 500, 5000)]
        assert d[0] > d[1] > d[2]
        assert d[2] < 0.01

    def test_discrete_bound_direction(self):
        s = bridge_samples(0.5, 50, 200_000, 42)[Functional.MAX].sample
        for x in (0.55, 0.7, 0.8, 0.95):
            tail = 1.0 - ecdf_eval(s, np.nextafter(x, 0))
            se = math.sqrt(tail * (1 - tail) / s.n)
            assert tail <= 0.5 / x + 4 * se


@pytest.fixture(scope="module")
def walk():
    cfg = SimConfig("grid", p0=0.5, grid_step="1/10", n_paths=100_000, master_seed=77)
    return monte_carlo_samples(cfg, [Functional.MAX])[Functional.MAX]


class TestGridOracle:
    def test_terminal(self, walk):
        assert 1.0 - ecdf_eval(walk.sample, 0.99) == pytest.approx(0.5, abs=0.005)

    def test_on_grid_tail(self, walk):
        tail = 1.0 - ecdf_eval(walk.sample, np.nextafter(0.8, 0))
        exact = chain_hit_probability(5, 8)
        assert exact == pytest.approx(0.625, abs=1e-12)
        se = math.sqrt(exact * (1 - exact) / walk.sample.n)
        assert tail == pytest.approx(exact, abs=min(0.005, 4 * se))

    def test_off_grid_tail_is_strictly_below_bound(self, walk):
        tail = 1.0 - ecdf_eval(walk.sample, np.nextafter(0.85, 0))
        exact = chain_hit_probability(5, 9)
        assert exact == pytest.approx(0.5 / 0.9, abs=1e-12)
        assert tail == pytest.approx(exact, abs=0.005)
        assert tail < 0.5 / 0.85

    def test_bound_direction_everywhere(self, walk):
        for x in np.linspace(0.51, 0.99, 25):
            tail = 1.0 - ecdf_eval(walk.sample, np.nextafter(x, 0))
            se = math.sqrt(max(tail * (1 - tail), 1e-12) / walk.sample.n)
            assert tail <= 0.5 / x + 4 * se

    def test_two_state_walk(self):
        r = monte_carlo_sample(SimConfig("grid", p0=0.5, grid_step="1/2", n_paths=1000), "max")
        assert set(np.unique(r.values)) <= {0.5, 1.0}

    def test_unabsorbed_are_counted(self):
        cfg = SimConfig("grid", p0=0.5, grid_step="1/50", n_paths=2000, max_steps=100)
        r = monte_carlo_sample(cfg, "max")
        assert r.unabsorbed > 0 and r.retained + r.unabsorbed == r.generated


class TestNPlayer:
    def test_winner_frequencies(self):
        from wpextrema._backend import kernels

        winner, *_ = kernels.nplayer_walk(np.array([10, 10, 10], dtype=np.int64), 30, 90_000,
                                          _rng.seed_hash(3), 0, 100_000)
        freq = np.bincount(winner, minlength=3) / winner.size
        np.testing.assert_allclose(freq, 1 / 3, atol=0.005)

    def test_asymmetric_value(self):
        cfg = SimConfig("nplayer", priors=(Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)),
                        grid_step="1/60", n_paths=100_000, master_seed=4)
        r = monte_carlo_sample(cfg, "winner-min")
        assert ecdf_eval(r.sample, 0.1 + 1e-12) == pytest.approx(2 / 9, abs=0.01)

    def test_rejects_two_sided_functionals(self):
        cfg = SimConfig("nplayer", priors=(0.5, 0.5), grid_step="1/2", n_paths=10)
        with pytest.raises(DomainError):
            monte_carlo_sample(cfg, "max")


class TestMonteCarloContract:
    CFG = SimConfig("bridge", p0=0.6, steps=100, n_paths=5000, master_seed=12)

    def test_deterministic(self):
        a = monte_carlo_sample(self.CFG, "loser-peak")
        b = monte_carlo_sample(self.CFG, "loser-peak")
        assert a.sample == b.sample

    def test_independent_of_workers_and_chunks(self):
        a = monte_carlo_sample(self.CFG, "max", workers=1)
        b = monte_carlo_sample(self.CFG, "max", workers=3, chunk=777)
        np.testing.assert_array_equal(a.values, b.values)

    def test_joint_matches_single(self):
        joint = monte_carlo_samples(self.CFG, list(Functional))
        for f in Functional:
            np.testing.assert_array_equal(joint[f].values, monte_carlo_sample(self.CFG, f).values)

    def test_given_loss_keeps_losses_only(self):
        r = monte_carlo_sample(self.CFG, "max-given-loss")
        assert r.retained < r.generated and np.all(r.values < 1.0)

    def test_matches_path_functionals(self):
        cfg = SimConfig("bridge", p0=0.6, steps=30, n_paths=200, master_seed=3)
        mx = monte_carlo_sample(cfg, "max").values
        brute = np.sort([path_max(gaussian_bridge_path(0.6, 30, 3, i).series) for i in range(200)])
        np.testing.assert_allclose(mx, brute, atol=1e-15)

    def test_sample_csv(self, tmp_path):
        r = monte_carlo_sample(self.CFG, "max")
        write_sample_csv(r.sample, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "value" and len(lines) == r.retained + 1
        assert np.array_equal(np.array(lines[1:], dtype=float), r.values)


class TestStoppingIdentity:
    def test_grid_overshoot_vanishes(self):
        cfg = SimConfig("grid", p0=0.5, grid_step="1/10", n_paths=100_000, master_seed=21)
        d = stopping_identity_report(cfg, 0.8)
        assert d.term_overshoot == 0.0 and d.term_laststep == 0.0
        assert abs(d.total - 0.5) < 3 * d.std_error
        assert d.total == pytest.approx(d.term_main + d.term_laststep + d.term_overshoot)

    def test_grid_off_lattice_level_has_overshoot(self):
        cfg = SimConfig("grid", p0=0.5, grid_step="1/10", n_paths=50_000, master_seed=21)
        d = stopping_identity_report(cfg, 0.85)
        assert d.term_overshoot > 0
        assert abs(d.total - 0.5) < 4 * d.std_error

    def test_coarse_bridge(self):
        cfg = SimConfig("bridge", p0=0.5, steps=50, n_paths=200_000, master_seed=8)
        d = stopping_identity_report(cfg, 0.8)
        assert d.term_overshoot > 0 and d.term_laststep > 0
        assert abs(d.total - 0.5) < 3 * d.std_error
        assert min(d.term_main, d.term_laststep, d.term_overshoot) >= 0

    def test_main_term_is_tail_probability(self):
        cfg = SimConfig("bridge", p0=0.4, steps=40, n_paths=20_000, master_seed=8)
        d = stopping_identity_report(cfg, 0.7)
        mx = monte_carlo_sample(cfg, "max").sample
        assert d.tail_probability == pytest.approx(1.0 - ecdf_eval(mx, np.nextafter(0.7, 0)), abs=1e-12)

    def test_level_domain(self):
        cfg = SimConfig("bridge", p0=0.5, steps=10, n_paths=10)
        for x in (0.5, 0.3, 1.0):
            with pytest.raises(DomainError):
                stopping_identity_report(cfg, x)


class TestSyntheticCorpus:
    def test_shapes_and_orientation_mix(self):
        games = synthetic_corpus([0.5, 0.7], 50, 20, seed=1)
        assert len(games) == 100
        starts = np.array([g.p0 for g in games])
        assert (starts < 0.5).any() and (starts > 0.5).any()
        fav = np.maximum(starts, 1 - starts)
        assert np.all(np.abs(fav[50:] - 0.7) <= 0.025 + 1e-12)

    def test_shrink(self):
        base = synthetic_corpus([0.6], 5, 20, seed=1)
        shrunk = synthetic_corpus([0.6], 5, 20, seed=1, shrink=0.8)
        for a, b in zip(base, shrunk):
            np.testing.assert_allclose(b.series, 0.5 + 0.8 * (a.series - 0.5))
            assert a.winner == b.winner
