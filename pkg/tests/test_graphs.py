import numpy as np
import pytest

from rotorwalk.graphs import (
    DEFAULT_WORLD_LIMIT,
    FiniteGraph,
    GraphError,
    Lattice,
    LatticeKind,
    WorldLimitError,
    ball,
    complete_graph,
    cycle_graph,
    diameter,
    path_graph,
    random_eulerian_digraph,
    random_undirected_graph,
    star_graph,
    thick_cycle,
    validate_eulerian,
    w_inverse,
)

from oracles import brute_ball, brute_W, brute_w_inverse, diameter_bfs, lattice_in, lattice_out

KINDS = ["Z2", "LINE", "COMB", "MANHATTAN", "FLATTICE"]


def test_z2_out_edges_clockwise():
    g = Lattice("Z2")
    assert g.out_heads((0, 0)) == [(0, 1), (1, 0), (0, -1), (-1, 0)]


def test_comb_tooth_up_then_down():
    assert Lattice("COMB").out_heads((3, 2)) == [(3, 3), (3, 1)]


def test_manhattan_origin_has_two_edges():
    # row 0 points east, column 0 points south
    assert Lattice("MANHATTAN").out_heads((0, 0)) == [(1, 0), (0, -1)]


@pytest.mark.parametrize("kind", KINDS)
def test_out_edges_match_reference_orientation(kind):
    g = Lattice(kind)
    ref = lattice_out(kind)
    for x in range(-6, 7):
        for y in range(-6, 7) if kind != "LINE" else [0]:
            assert g.out_heads((x, y)) == ref((x, y))
            for e in g.out_edges((x, y)):
                assert e.tail == (x, y) and g.out_heads((x, y))[e.slot] == e.head


@pytest.mark.parametrize("kind", KINDS)
def test_out_degree_constants(kind):
    g = Lattice(kind)
    for v in [(0, 0), (3, 0), (2, 5), (-7, -1)]:
        if kind == "LINE":
            v = (v[0], 0)
        want = 4 if kind == "Z2" or (kind == "COMB" and v[1] == 0) else 2
        assert g.outdeg(v) == want


@pytest.mark.parametrize("kind", ["MANHATTAN", "FLATTICE"])
def test_directed_orientations_use_each_grid_edge_once(kind):
    g = Lattice(kind)
    used = {}
    for x in range(-10, 10):
        for y in range(-10, 10):
            for h in g.out_heads((x, y)):
                key = frozenset([(x, y), h])
                used[key] = used.get(key, 0) + 1
    inner = [k for k in used if all(-10 <= c[0] < 9 and -10 <= c[1] < 9 for c in k)]
    assert inner and all(used[k] == 1 for k in inner)
    for x in range(-8, 8):
        for y in range(-8, 8):
            assert len(g.in_edges((x, y))) == g.outdeg((x, y))


def test_world_limit_guard():
    g = Lattice("Z2", world_limit=5)
    with pytest.raises(WorldLimitError):
        g.out_heads((6, 0))
    assert Lattice("Z2").world_limit == DEFAULT_WORLD_LIMIT == 2**31 - 2


def test_ball_sizes_z2():
    g = Lattice("Z2")
    assert len(ball(g, (0, 0), 1).vertices) == 5
    assert len(ball(g, (0, 0), 2).vertices) == 13
    for r in range(0, 101, 7):
        assert len(ball(g, (0, 0), r).vertices) == 2 * r * r + 2 * r + 1


def test_ball_edge_counts_z2():
    g = Lattice("Z2")
    assert ball(g, (0, 0), 0).edge_count == 8
    assert ball(g, (0, 0), 1).edge_count == 32
    assert ball(g, (0, 0), 1).w == 8
    assert ball(g, (0, 0), 2).w == 40


def test_comb_ball_radius_two():
    assert len(ball(Lattice("COMB"), (0, 0), 2).vertices) == 13


@pytest.mark.parametrize("kind", KINDS)
def test_ball_matches_bfs_oracle(kind):
    g = Lattice(kind)
    out, into = lattice_out(kind), lattice_in(kind)
    for o in [(0, 0), (1, 0), (2, 3)] if kind != "LINE" else [(0, 0), (5, 0)]:
        for r in range(0, 7):
            prof = ball(g, o, r)
            b, v = brute_ball(out, into, o, r)
            assert prof.vertices == b
            assert prof.edge_count == v
            assert prof.w == brute_W(out, into, o, r)


@pytest.mark.parametrize("kind", KINDS)
def test_ball_monotone(kind):
    g = Lattice(kind)
    prev = set()
    w_prev = -1
    for r in range(31):
        p = ball(g, (0, 0), r)
        assert prev <= p.vertices
        assert p.w > w_prev or r == 0
        prev, w_prev = p.vertices, p.w
    assert ball(g, (0, 0), 0).w == 0


def test_w_inverse_examples():
    g = Lattice("Z2")
    assert w_inverse(g, (0, 0), 0) == 1
    assert w_inverse(g, (0, 0), 8) == 2
    assert w_inverse(g, (0, 0), 7) == 1
    assert w_inverse(g, (0, 0), 40) == 3


@pytest.mark.parametrize("kind", KINDS)
def test_w_inverse_matches_oracle(kind):
    g = Lattice(kind)
    out, into = lattice_out(kind), lattice_in(kind)
    for t in [0, 1, 5, 17, 60, 150]:
        assert w_inverse(g, (0, 0), t) == brute_w_inverse(out, into, (0, 0), t)


def test_w_cubic_growth_z2():
    w = ball(Lattice("Z2"), (0, 0), 100).w
    assert abs(w / 100**3 - 8 / 3) < 0.1


def test_diameter_examples():
    assert diameter(cycle_graph(4)) == 2
    assert diameter(thick_cycle(4, 2)) == 2
    assert diameter(path_graph(5)) == 4


def test_diameter_matches_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_eulerian_digraph(int(rng.integers(2, 15)), int(rng.integers(0, 5)), rng)
        assert diameter(g) == diameter_bfs(g.adj)


def test_diameter_disconnected_raises():
    g = FiniteGraph([[0], [1]], check=False)
    with pytest.raises(GraphError):
        diameter(g)


def test_thick_cycle_examples():
    g = thick_cycle(4, 2)
    assert g.n == 8 and all(len(h) == 5 for h in g.adj)
    tri = thick_cycle(3, 1)
    assert tri.n == 3 and all(len(h) == 2 for h in tri.adj)
    g = thick_cycle(5, 3)
    assert g.n == 15 and all(len(h) == 8 for h in g.adj)
    assert validate_eulerian(g)[0]
    assert validate_eulerian(thick_cycle(6, 4))[0]


def test_thick_cycle_adjacency_rule():
    ell, n = 6, 3
    g = thick_cycle(ell, n)
    for x in range(ell):
        for y in range(n):
            heads = set(g.adj[x * n + y])
            for x2 in range(ell):
                for y2 in range(n):
                    near = (x2 - x) % ell in (1, ell - 1)
                    far = x2 != x and y2 == y
                    assert (x2 * n + y2 in heads) == (near or far)


def test_thick_cycle_rejects_small_ell():
    with pytest.raises(GraphError):
        thick_cycle(2, 3)


def test_validate_eulerian_examples():
    ok, _ = validate_eulerian(cycle_graph(3))
    assert ok
    ok, report = validate_eulerian(FiniteGraph([[1], []], check=False))
    assert not ok and report
    with pytest.raises(GraphError):
        FiniteGraph([[1], []])


def test_builders_are_eulerian():
    rng = np.random.default_rng(0)
    graphs = [cycle_graph(7), path_graph(6), complete_graph(5), star_graph(4), thick_cycle(7, 2),
              random_undirected_graph(20, 10, rng), random_eulerian_digraph(20, 6, rng)]
    for g in graphs:
        ok, report = validate_eulerian(g)
        assert ok, report
        assert g.indeg == tuple(len(h) for h in g.adj)


def test_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    g = random_eulerian_digraph(12, 4, rng)
    path = tmp_path / "g.txt"
    g.write(path)
    h = FiniteGraph.load(path)
    assert h.adj == g.adj


def test_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 2\n0 1\n")
    with pytest.raises(GraphError):
        FiniteGraph.load(path)


def test_lattice_kind_names():
    assert Lattice("f-lattice".upper().replace("-", "")).kind == LatticeKind.FLATTICE
