import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from colourdiv.model import (ModelParams, colour_counts, colour_vectors, ensemble_from_mean,
                             min_phi, neighbourhood_table, optimal_count_pattern, phi,
                             phi_lambda, phi_table, sample_connectivities)


def test_phi_examples():
    assert phi(0, [1, 2, 3], 4) == 4
    assert phi(0, [0, 1, 2, 3], 4) == 7
    assert phi(0, [0, 0, 0], 4) == 16
    assert phi(0, [0, 1, 2], 4) == 6


def test_phi_lambda_examples():
    assert phi_lambda(0, [1, 2, 3], 4, 0.0) == 4
    # one centre match, no neighbour pairs
    assert phi_lambda(0, [0, 1, 2], 4, 0.0) == 6
    # no centre match, one neighbour pair
    assert phi_lambda(0, [1, 1, 2], 4, 0.5) == 5


def test_phi_lambda_one_is_phi():
    for c in (3, 4):
        for conf in itertools.product(range(4), repeat=c + 1):
            assert phi_lambda(conf[0], conf[1:], 4, 1.0) == phi(conf[0], conf[1:], 4)


def test_phi_rejects_bad_colour():
    with pytest.raises(ValueError):
        phi(0, [4, 1, 2], 4)
    with pytest.raises(ValueError):
        phi_lambda(0, [1, 2, 3], 4, 1.5)


def test_optimal_patterns():
    assert optimal_count_pattern(3, 7) == (3, 2, 2)
    assert optimal_count_pattern(4, 4) == (1, 1, 1, 1)
    assert optimal_count_pattern(4, 5) == (2, 1, 1, 1)
    assert min_phi(4, 3) == 4
    assert min_phi(4, 4) == 7
    assert min_phi(4, 2) == 3


def test_min_phi_matches_enumeration():
    for c in (2, 3, 4):
        _, cost = neighbourhood_table(4, c)
        assert cost.min() == min_phi(4, c)


def test_phi_table_layout():
    t = phi_table(4, 3)
    assert t.shape == (4, 4, 16)
    dig = colour_vectors(4, 2)
    for a, b, k in [(0, 0, 0), (1, 2, 5), (3, 3, 15)]:
        assert t[a, b, k] == phi(b, [a, *dig[k]], 4)


def test_ensemble_probabilities():
    ens = ensemble_from_mean(3.65, 4)
    assert ens.floor_c == 3
    assert ens.node_probs == pytest.approx((0.35, 0.65))
    assert ens.excess_probs[1] == pytest.approx(4 * 0.65 / 3.65)
    assert ens.excess_probs[1] == pytest.approx(0.71233, abs=1e-5)
    assert sum(ens.excess_probs) == pytest.approx(1.0)
    assert ensemble_from_mean(4.0, 4).max_connectivity == 4


def test_ensemble_bounds():
    with pytest.raises(ValueError):
        ensemble_from_mean(1.5)
    with pytest.raises(ValueError):
        ensemble_from_mean(4.5, 4)


def test_excess_sampling_frequency():
    ens = ensemble_from_mean(3.5, 4)
    n = 200_000
    draws = sample_connectivities(ens, "link", np.random.default_rng(3), n)
    p = 4 / 7
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(np.mean(draws == 4) - p) < 3 * sigma


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(Q=1)
    with pytest.raises(ValueError):
        ModelParams(lam=-0.1)
    with pytest.raises(ValueError):
        ModelParams(temperature=-1.0)
    with pytest.raises(ValueError):
        ModelParams(4, 0.0).beta
    assert ModelParams(4, 0.01).zero_temperature
    with pytest.warns(RuntimeWarning):
        ModelParams(4, 0.01).check_kernel_mode()


colour = st.integers(0, 3)


@settings(max_examples=200, deadline=None)
@given(colour, st.lists(colour, min_size=1, max_size=5), st.permutations(range(4)),
       st.floats(0.0, 1.0))
def test_cost_invariant_under_relabelling(centre, nbrs, perm, lam):
    p = list(perm)
    relab = [p[q] for q in nbrs]
    assert phi(p[centre], relab, 4) == phi(centre, nbrs, 4)
    assert phi_lambda(p[centre], relab, 4, lam) == pytest.approx(phi_lambda(centre, nbrs, 4, lam))


@settings(max_examples=100, deadline=None)
@given(colour, st.lists(colour, min_size=2, max_size=5), st.randoms(use_true_random=False))
def test_cost_invariant_under_neighbour_order(centre, nbrs, rnd):
    shuffled = list(nbrs)
    rnd.shuffle(shuffled)
    assert phi(centre, shuffled, 4) == phi(centre, nbrs, 4)
    assert colour_counts(centre, shuffled, 4).sum() == len(nbrs) + 1
