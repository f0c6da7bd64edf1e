import functools

from wpextrema.simulate import Functional, SimConfig, monte_carlo_samples

TWO_SIDED = (Functional.MAX, Functional.MAX_GIVEN_LOSS, Functional.LOSER_PEAK)


@functools.lru_cache(maxsize=None)
def bridge_samples(p0, steps, n_paths, seed, monitor="grid"):
    """All two-sided functionals of one bridge run, shared across test modules."""
    cfg = SimConfig("bridge", p0=p0, steps=steps, n_paths=n_paths, master_seed=seed, monitor=monitor)
    return monte_carlo_samples(cfg, TWO_SIDED)
