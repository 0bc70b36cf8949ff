import math

import numpy as np
import pytest

from colourdiv.model import ModelParams, ensemble_from_mean
from colourdiv.population import (DEFAULT_COLOUR_BIAS, draw_members, draw_sweep, equilibrate,
                                  init_population, load_checkpoint, member_table,
                                  save_checkpoint, sweep, sweep_layered)

ZERO = ModelParams(4, 0.0)


def small(mc=3.5, T=0.0, N=400, seed=1, **kw):
    return init_population(N, ensemble_from_mean(mc), ModelParams(4, T), seed=seed, **kw)


def test_init_shapes_and_gauge():
    pop = small(mode="random")
    assert pop.F.shape == (400, 4, 4)
    assert np.all(pop.F[:, 0, 0] == 0.0)
    assert set(np.unique(pop.conn)) == {3, 4}
    assert np.sum(pop.conn == 4) == 200


def test_zero_init_tables_are_nominal_colours():
    pop = small()
    for i in range(5):
        assert np.array_equal(pop.F[i], member_table(4, int(pop.colours[i])))
    assert np.array_equal(member_table(4, 2, 1.0)[:, 2], np.zeros(4) - 1.0)
    assert DEFAULT_COLOUR_BIAS == 100.0


def test_random_init_noise_bounded():
    a = small(mode="random", epsilon=1e-6)
    b = small()
    assert 0 < np.max(np.abs(a.F - b.F)) < 2e-6


def test_init_errors():
    with pytest.raises(ValueError):
        small(mode="warm")
    with pytest.raises(ValueError):
        small(mode="random", epsilon=0.0)
    with pytest.raises(ValueError):
        small(N=0)
    with pytest.raises(ValueError):
        small(entropy_mode="exact")


@pytest.mark.parametrize("T", [0.0, 0.8])
def test_determinism(T):
    a, b = small(T=T, mode="random"), small(T=T, mode="random")
    equilibrate(a, 5)
    equilibrate(b, 5)
    assert np.array_equal(a.F, b.F) and np.array_equal(a.E, b.E)
    c = small(T=T, mode="random", seed=2)
    equilibrate(c, 5)
    assert not np.array_equal(a.F, c.F)


def test_single_member():
    pop = small(N=1, mc=3.0, T=0.5)
    equilibrate(pop, 3)
    assert np.all(np.isfinite(pop.F)) and pop.epoch == 3


def test_excess_frequency_of_descendants():
    ens = ensemble_from_mean(3.5)
    pop = init_population(2000, ens, ZERO, seed=0)
    d = draw_members(pop.conn, ens, np.random.default_rng(1), (50_000,))
    frac = np.mean(pop.conn[d] == 4)
    p = 4 / 7
    assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / d.size)


def test_sweep_draw_shapes():
    pop = small()
    order, desc, perm = draw_sweep(pop, np.random.default_rng(0))
    assert sorted(order) == list(range(pop.N))
    assert desc.shape == (pop.N, 3)
    assert np.all(np.sort(perm, axis=1) == np.arange(4))
    pop.symmetrise = False
    assert np.all(draw_sweep(pop, np.random.default_rng(0))[2] == np.arange(4))


@pytest.mark.parametrize("T", [0.0, 0.7])
def test_symmetric_state_is_preserved(T):
    pop = small(T=T, colour_bias=0.0)
    equilibrate(pop, 10)
    off = ~np.eye(4, dtype=bool)
    assert np.ptp(pop.F[:, off], axis=1).max() < 1e-12
    assert np.ptp(np.diagonal(pop.F, axis1=1, axis2=2), axis=1).max() < 1e-12


def test_propagated_entropy_fixed_point_at_four():
    pop = small(mc=4.0, N=300, colour_bias=0.0, entropy_mode="propagated")
    equilibrate(pop, 40)
    z = np.exp(pop.S[:, 0, 0] - pop.S[:, 0, 1])
    assert np.allclose(z, math.sqrt(2) - 1, atol=1e-10)


def test_counting_mode_keeps_entropy_tables_zero():
    pop = small()
    equilibrate(pop, 3)
    assert np.all(pop.S == 0.0)


def test_layered_sweep_on_symmetric_state():
    pop = small(colour_bias=0.0, T=0.7)
    pop, rep = sweep_layered(pop)
    assert rep.mean_moments.sum() == pytest.approx(1.0)
    assert rep.dominance == pytest.approx(0.25)


def test_layered_and_sequential_differ():
    a, b = small(mode="random"), small(mode="random")
    sweep(a, layered=True)
    sweep(b, layered=False)
    assert not np.array_equal(a.F, b.F)


def test_checkpoint_round_trip(tmp_path):
    pop = small(T=0.6, mode="random", seed=np.random.SeedSequence(9))
    equilibrate(pop, 3)
    path = tmp_path / "pop.npz"
    save_checkpoint(pop, path)
    back = load_checkpoint(path)
    assert back.epoch == pop.epoch and back.params == pop.params
    equilibrate(pop, 2)
    equilibrate(back, 2)
    assert np.array_equal(pop.F, back.F) and np.array_equal(pop.E, back.E)


def test_set_mean_connectivity_relabels_few():
    pop = small(mc=3.5, N=1000)
    before = pop.conn.copy()
    pop.set_mean_connectivity(3.6)
    assert np.sum(pop.conn == 4) == 600
    assert np.sum(before != pop.conn) == 100
