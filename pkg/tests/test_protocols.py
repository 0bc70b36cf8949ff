import numpy as np
import pytest

from colourdiv.analysis import branch_merge, discontinuity, first_crossing
from colourdiv.model import ModelParams, ensemble_from_mean
from colourdiv.population import draw_sweep, init_population
from colourdiv.protocols import (ControlError, ControlTarget, damage, evolve_damage_pair,
                                 run_annealed, run_controlled)


def pop_at(mc=3.5, T=0.0, N=300, seed=1, **kw):
    return init_population(N, ensemble_from_mean(mc), ModelParams(4, T), seed=seed, **kw)


def test_control_target_validation():
    assert ControlTarget("fixed_qea", 0.3).control_variable == "temperature"
    assert ControlTarget("fixed_fincom", 0.1).control_variable == "mean_connectivity"
    with pytest.raises(ValueError):
        ControlTarget("fixed_energy", 0.1)
    with pytest.raises(ValueError):
        ControlTarget("fixed_qea", 1.5)
    with pytest.raises(ValueError):
        ControlTarget("fixed_qea", 0.5, gain=0.0)


def test_control_moves_in_the_right_direction():
    # paramagnet measures q = 0 < target, so T must come down
    pop = pop_at(mc=3.0, T=1.0, colour_bias=0.0)
    _, traj = run_controlled(pop, ControlTarget("fixed_qea", 0.5, gain=0.05, window=5), 5, 200)
    assert np.all(np.diff(traj.control) < 0)


def test_pinned_control_aborts():
    pop = pop_at(mc=3.9, colour_bias=0.0)
    # f_incom is zero in the symmetric state, so <c> runs into its lower bound
    with pytest.raises(ControlError):
        run_controlled(pop, ControlTarget("fixed_fincom", 0.9, gain=1.0, window=3), 20, 200)


def test_annealed_schedule_must_be_monotone():
    with pytest.raises(ValueError):
        run_annealed(pop_at(), [3.5, 3.6, 3.55])
    out = run_annealed(pop_at(), [3.5, 3.6], equilibration=1, measurement=2, measure_every=1,
                       samples=100)
    assert [x for x, _ in out] == [3.5, 3.6]
    assert out[-1][1][-1].mean_c == 3.6


def test_damage_hits_next_sweep_descendants():
    pop = pop_at()
    twin, hit = damage(pop, 7, rng=np.random.default_rng(4))
    _, desc, _ = draw_sweep(pop, np.random.default_rng(4))
    assert set(hit) == set(desc[7, :pop.conn[7] - 1])
    assert np.all(twin.colours[hit] == 3 - pop.colours[hit])
    untouched = np.setdiff1d(np.arange(pop.N), hit)
    assert np.array_equal(twin.F[untouched], pop.F[untouched])


def test_unperturbed_pair_stays_identical():
    d = evolve_damage_pair(pop_at(), seed=3, sweeps=5, samples=200, perturb=False)
    assert np.all(d == 0.0) and len(d) == 6


def test_crossing_helpers():
    assert first_crossing([0, 1, 2], [1.0, 0.5, -0.5]) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        first_crossing([0, 1], [1.0, 2.0])
    assert discontinuity([3.5, 3.6, 3.7], [0.1, 0.08, 0.0]) == pytest.approx(3.65)
    q, T = branch_merge([0.1, 0.3, 0.5], [0.5, 0.6, 0.5])
    assert q == pytest.approx(0.3) and T == pytest.approx(0.6)
