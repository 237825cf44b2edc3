from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorwalk.configs import ExplicitConfig, TreeToOriginConfig, UniformConfig
from rotorwalk.cover import (
    COVER_CSV_COLUMNS,
    SolverError,
    battery,
    compute_K,
    cover_csv,
    cover_times,
    evaluate,
    hitting_times,
    k_term,
    one_step_residual,
    thick_cycle_K,
    thick_cycle_stats,
)
from rotorwalk.engine import run_excursions
from rotorwalk.graphs import (
    FiniteGraph,
    GraphError,
    complete_graph,
    cycle_graph,
    diameter,
    directed_cycle,
    path_graph,
    random_eulerian_digraph,
    random_undirected_graph,
    star_graph,
    thick_cycle,
)

from oracles import absorption_hitting, diameter_bfs, exact_hitting, k_value, naive_cover

# one undirected edge u - v, i.e. the directed pair u -> v, v -> u
TWO = path_graph(2)


def random_graph(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 16))
    if seed % 2:
        return random_eulerian_digraph(n, int(rng.integers(0, 4)), rng)
    return random_undirected_graph(n, int(rng.integers(0, n)), rng)


def test_double_edge_cover():
    rep = cover_times(TWO, ExplicitConfig(TWO, {0: 0, 1: 0}), 0)
    assert (rep.t_vertex, rep.t_edge) == (2, 1)
    assert rep.num_edges == 2 and rep.diameter == 1 and rep.within_bounds()


def test_cycle6_tree_rotors():
    g = cycle_graph(6)
    rep = cover_times(g, TreeToOriginConfig(g, 0), 0)
    # frozen from the dictionary-based simulation oracle
    assert (rep.t_vertex, rep.t_edge) == (8, 11)
    assert rep.within_bounds()


def test_tree_rotors_on_path_point_at_origin():
    g = path_graph(5)
    c = TreeToOriginConfig(g, 4)
    for v in range(4):
        assert g.adj[v][c.initial_rotor(v)] == v + 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_tree_rotors_form_in_tree(seed):
    g = random_graph(seed)
    o = seed % g.n
    c = TreeToOriginConfig(g, o)
    for v in range(g.n):
        x, seen = v, set()
        while x != o:
            assert x not in seen
            seen.add(x)
            x = g.adj[x][c.initial_rotor(x)]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_cover_matches_oracle(seed, tree):
    g = random_graph(seed)
    o = seed % g.n
    cfg = TreeToOriginConfig(g, o) if tree else UniformConfig(g, seed)
    rep = cover_times(g, cfg, o)
    assert (rep.t_vertex, rep.t_edge) == naive_cover([list(h) for h in g.adj], cfg.initial_rotor, o, 10**6)
    assert rep.diameter == diameter_bfs(g.adj)
    assert rep.within_bounds()
    assert rep.t_vertex <= rep.t_edge + 1


def test_cover_budget_exhaustion_is_incomplete():
    g = cycle_graph(10)
    rep = cover_times(g, UniformConfig(g, 0), 0, budget=3)
    assert rep.incomplete and not rep.within_bounds()


def test_cover_rejects_partial_config():
    g = cycle_graph(4)
    with pytest.raises(GraphError):
        cover_times(g, ExplicitConfig(g, {0: 0}), 0)


def test_excursion_length_bounded_by_edge_count():
    for seed in range(30):
        g = random_graph(seed)
        log = run_excursions(g, UniformConfig(g, seed), 0, 2 * g.n)
        for n, t in enumerate(log.T):
            assert t <= n * g.num_edges


# ------------------------------------------------------------ hitting times


def test_single_edge_hitting_time():
    g = path_graph(2)
    assert hitting_times(g, 1).h.tolist() == [1.0, 0.0]


@pytest.mark.parametrize("seed", range(12))
def test_hitting_matches_exact_rationals(seed):
    g = random_graph(seed)
    v = seed % g.n
    col = hitting_times(g, v)
    want = exact_hitting([list(h) for h in g.adj], v)
    assert np.allclose(col.h, [float(x) for x in want], rtol=0, atol=1e-9)
    assert col.h[v] == 0 and (col.h >= 0).all()
    assert col.residual <= 1e-9


@pytest.mark.parametrize("leaves", [1, 2, 5, 12])
def test_star_center_to_leaf(leaves):
    g = star_graph(leaves)
    col = hitting_times(g, 1)
    want = absorption_hitting([list(h) for h in g.adj], 0, 1)
    assert abs(col.h[0] - want) <= 1e-8
    assert abs(col.h[0] - (2 * leaves - 1)) <= 1e-9


@pytest.mark.parametrize("ell", [3, 4, 7, 50, 200])
def test_cycle_hitting_formula(ell):
    g = cycle_graph(ell)
    h = hitting_times(g, 0).h
    for i in range(1, ell + 1):
        assert abs(h[(i - 1) % ell] - (i - 1) * (ell - i + 1)) <= 1e-9


def test_sparse_path_matches_dense():
    g = cycle_graph(2100)
    h = hitting_times(g, 0).h
    k = np.arange(2100)
    assert np.max(np.abs(h - k * (2100 - k))) <= 1e-6 * 2100**2


@pytest.mark.filterwarnings("ignore")
def test_singular_system_raises():
    g = FiniteGraph([[1], [0], [3], [2]], check=False)
    with pytest.raises(SolverError):
        hitting_times(g, 0)


def test_residual_helper_flags_wrong_solution():
    g = cycle_graph(5)
    col = hitting_times(g, 0)
    P = np.array([[0.5 * (abs(i - j) % 4 == 1) for j in range(5)] for i in range(5)])
    assert one_step_residual(P, col.h, 0) <= 1e-9
    assert one_step_residual(P, col.h + 0.1, 0) > 0.05


# ------------------------------------------------------------------------ K


def test_K_single_edge():
    assert compute_K(path_graph(2)) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_K_matches_exact_oracle(seed):
    g = random_graph(seed)
    adj = [list(h) for h in g.adj]
    cols = {v: [float(x) for x in exact_hitting(adj, v)] for v in range(g.n)}
    assert compute_K(g) == pytest.approx(k_value(adj, cols), abs=1e-8)


def test_k_term_uses_directed_edge_count():
    g = cycle_graph(3)
    col = hitting_times(g, 0)
    spread = sum(abs(col.h[i] - col.h[j] - 1) for i in range(3) for j in g.adj[i])
    assert k_term(g, col) == pytest.approx(col.h.max() + (6 + spread) / 2)


def test_directed_cycle_K():
    # on a directed cycle every edge term vanishes except the one into v
    g = directed_cycle(5)
    assert compute_K(g) == pytest.approx(4 + (5 + 5) / 2)


@pytest.mark.parametrize("ell,n", [(3, 1), (3, 2), (4, 3), (5, 2), (6, 4)])
def test_thick_cycle_quotient_matches_full_solve(ell, n):
    g = thick_cycle(ell, n)
    assert thick_cycle_K(ell, n) == pytest.approx(compute_K(g), rel=1e-10)
    D, m = thick_cycle_stats(ell, n)
    assert (D, m) == (diameter(g), g.num_edges)


def test_thick_cycle_argument_checks():
    with pytest.raises(GraphError):
        thick_cycle_K(2, 3)


def test_complete_graph_K_lower_bound():
    g = complete_graph(6)
    assert compute_K(g) >= diameter(g) * g.num_edges / 4 - 1


# ------------------------------------------------------------------ battery


def test_battery_is_deterministic_and_mixed():
    a = battery(24, seed=3)
    b = battery(24, seed=3)
    assert [i.graph_id for i in a] == [i.graph_id for i in b]
    assert [i.graph.adj for i in a] == [i.graph.adj for i in b]
    names = {i.graph.name.split("(")[0] for i in a}
    assert {"rand_undirected", "cycle", "thick_cycle", "complete"} <= names
    assert all(i.graph.n <= 60 for i in a)


def test_evaluate_and_csv():
    rows = [evaluate(i) for i in battery(8, seed=1)]
    assert all(r.ok for r in rows)
    text = cover_csv(rows).splitlines()
    assert text[0].split(",") == COVER_CSV_COLUMNS and len(text) == 9
    assert "k_vertex=1" in text[1]
