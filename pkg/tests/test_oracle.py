import numpy as np
import pytest

from colourdiv.model import ensemble_from_mean, phi
from colourdiv.oracle import (GraphInstance, InstanceError, anneal_instance, brute_force_ground_state,
                              complete_graph, degeneracy_order, evaluate, generate_instance,
                              geometric_schedule, read_instance, write_instance)


def direct_energy(graph, colours, Q):
    adj = graph.adjacency
    return sum(phi(int(colours[i]), [int(colours[j]) for j in adj[i]], Q)
               for i in range(graph.N))


def test_complete_graphs():
    k5 = brute_force_ground_state(complete_graph(5), 4)
    assert k5.exact and k5.min_energy == 35
    # one colour doubled: choose it (4) and its pair (10), colour the rest (3!)
    assert k5.count == 4 * 10 * 6
    assert brute_force_ground_state(complete_graph(4), 4).min_energy == 16


def test_generated_instance_is_simple():
    g = generate_instance(20, ensemble_from_mean(3.5), seed=4)
    assert len(np.unique(g.edges, axis=0)) == len(g.edges)
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    assert set(np.unique(g.degrees)) <= {3, 4}
    assert g.mean_connectivity == pytest.approx(g.degrees.mean())


def test_four_nodes_of_degree_three_is_k4():
    g = generate_instance(4, ensemble_from_mean(3.0), seed=0)
    assert len(g.edges) == 6


def test_evaluate_matches_direct_sum():
    g = generate_instance(14, ensemble_from_mean(3.5), seed=1)
    rng = np.random.default_rng(0)
    for _ in range(10):
        c = rng.integers(4, size=g.N)
        a = evaluate(g, c, 4)
        assert a.energy == direct_energy(g, c, 4)
        assert 0 <= a.f_unsat <= a.f_incom <= 1


def test_anneal_not_below_exact():
    for seed in range(3):
        g = generate_instance(12, ensemble_from_mean(3.0), seed=seed)
        gs = brute_force_ground_state(g, 4)
        an = anneal_instance(g, 4, seed=seed)
        assert an.energy >= gs.min_energy
        assert an.energy == direct_energy(g, an.colours, 4)


def test_branch_and_bound_agrees_with_exhaustion():
    for seed in range(3):
        g = generate_instance(11, ensemble_from_mean(3.5), seed=seed)
        ex = brute_force_ground_state(g, 4)
        bb = brute_force_ground_state(g, 4, exhaustive_limit=0)
        assert ex.exact and bb.exact
        assert bb.min_energy == ex.min_energy
        assert bb.witness.energy == bb.min_energy


def test_lower_bound_is_density_bound():
    for seed in range(5):
        g = generate_instance(16, ensemble_from_mean(3.5), seed=seed)
        assert g.lower_bound(4) == 3 * 2 * len(g.edges) - 5 * g.N
        assert brute_force_ground_state(g, 4).min_energy >= g.lower_bound(4)


def test_instance_file_round_trip(tmp_path):
    g = generate_instance(10, ensemble_from_mean(3.0), seed=2)
    colours = np.arange(10) % 4
    p = tmp_path / "g.txt"
    write_instance(p, g, 4, colours)
    text = p.read_text().splitlines()
    assert text[0] == f"10 {len(g.edges)} 4"
    assert min(int(x) for x in text[1].split()) >= 1
    back, Q, c = read_instance(p)
    assert Q == 4 and np.array_equal(back.edges, g.edges) and np.array_equal(c, colours)
    p.write_text("3 5 4\n1 2\n")
    with pytest.raises(ValueError):
        read_instance(p)


def test_schedule_and_order():
    s = geometric_schedule(2.0, 0.01, 0.98)
    assert s[0] == 2.0 and s[-1] >= 0.01 and np.all(np.diff(s) < 0)
    g = generate_instance(12, ensemble_from_mean(3.0), seed=5)
    assert sorted(degeneracy_order(g)) == list(range(12))


def test_odd_regular_refused():
    with pytest.raises(InstanceError):
        generate_instance(11, ensemble_from_mean(3.0), seed=0)


def test_empty_graph_refused():
    with pytest.raises(ValueError):
        brute_force_ground_state(GraphInstance(0, np.zeros((0, 2), dtype=np.int64)))
