"""Graph models: finite Eulerian digraphs and the periodic lattices.

Vertices of a finite graph are integer indices.  Lattice vertices are
``(x, y)`` integer pairs; the line uses ``(x, 0)``.

Out-edge orders are fixed conventions:

* ``Z2`` and comb axis: N, E, S, W (clockwise)
* comb teeth: up, down;  line: right, left
* Manhattan and F-lattice: the two lattice out-directions, ordered E < N < S < W
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_WORLD_LIMIT = 2**31 - 2

N, E, S, W = 0, 1, 2, 3
DIRECTIONS = ((0, 1), (1, 0), (0, -1), (-1, 0))
DIRECTION_NAMES = "NESW"


class WorldLimitError(ValueError):
    """A coordinate fell outside the configured world box."""


class GraphError(ValueError):
    pass


class LatticeKind(enum.IntEnum):
    Z2 = 0
    LINE = 1
    COMB = 2
    MANHATTAN = 3
    FLATTICE = 4


class DirectedEdge(NamedTuple):
    tail: object
    head: object
    slot: int


def lattice_directions(kind: LatticeKind, x: int, y: int) -> tuple[int, ...]:
    """Direction indices (into ``DIRECTIONS``) of the out-edges at ``(x, y)``, in slot order."""
    if kind == LatticeKind.Z2:
        return (N, E, S, W)
    if kind == LatticeKind.LINE:
        return (E, W)
    if kind == LatticeKind.COMB:
        return (N, E, S, W) if y == 0 else (N, S)
    if kind == LatticeKind.MANHATTAN:
        horiz = E if y % 2 == 0 else W
        vert = S if x % 2 == 0 else N
        return tuple(sorted((horiz, vert), key=lambda d: "ENSW".index(DIRECTION_NAMES[d])))
    if kind == LatticeKind.FLATTICE:
        return (N, S) if (x + y) % 2 == 0 else (E, W)
    raise GraphError(f"unknown lattice kind {kind!r}")


class Lattice:
    """One of the infinite periodic lattices.  Immutable."""

    is_finite = False

    def __init__(self, kind: LatticeKind | str, world_limit: int = DEFAULT_WORLD_LIMIT):
        if isinstance(kind, str):
            kind = LatticeKind[kind.upper().replace("-", "")]
        self.kind = LatticeKind(kind)
        self.world_limit = int(world_limit)

    def __repr__(self) -> str:
        return f"Lattice({self.kind.name})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Lattice) and (self.kind, self.world_limit) == (other.kind, other.world_limit)

    def __hash__(self) -> int:
        return hash((self.kind, self.world_limit))

    @property
    def max_degree(self) -> int:
        return 4 if self.kind in (LatticeKind.Z2, LatticeKind.COMB) else 2

    def check(self, v) -> tuple[int, int]:
        x, y = v
        lim = self.world_limit
        if abs(x) > lim or abs(y) > lim:
            raise WorldLimitError(f"vertex {v} outside world limit {lim}")
        if self.kind == LatticeKind.LINE and y != 0:
            raise GraphError(f"line vertices have y == 0, got {v}")
        return int(x), int(y)

    def outdeg(self, v) -> int:
        x, y = self.check(v)
        return len(lattice_directions(self.kind, x, y))

    deg = outdeg

    def out_heads(self, v) -> list[tuple[int, int]]:
        x, y = self.check(v)
        return [(x + DIRECTIONS[d][0], y + DIRECTIONS[d][1]) for d in lattice_directions(self.kind, x, y)]

    def out_edges(self, v) -> list[DirectedEdge]:
        v = self.check(v)
        return [DirectedEdge(v, h, k) for k, h in enumerate(self.out_heads(v))]

    def slot_direction(self, v, slot: int) -> int:
        x, y = v
        return lattice_directions(self.kind, x, y)[slot]

    def in_edges(self, v) -> list[DirectedEdge]:
        x, y = self.check(v)
        edges = []
        for dx, dy in DIRECTIONS:
            u = (x + dx, y + dy)
            if self.kind == LatticeKind.LINE and dy != 0:
                continue
            try:
                heads = self.out_heads(u)
            except WorldLimitError:
                continue
            for k, h in enumerate(heads):
                if h == (x, y):
                    edges.append(DirectedEdge(u, h, k))
        return edges


class FiniteGraph:
    """Finite directed multigraph with ordered out-edge lists.

    ``adj[v]`` lists the heads of v's out-edges in mechanism order.
    """

    is_finite = True

    def __init__(self, adj: Sequence[Sequence[int]], name: str = "", check: bool = True):
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(int(h) for h in heads) for heads in adj)
        self.n = len(self.adj)
        self.name = name
        self._in = None
        indeg = [0] * self.n
        for v, heads in enumerate(self.adj):
            for h in heads:
                if not 0 <= h < self.n:
                    raise GraphError(f"edge {v}->{h} leaves the vertex range")
                indeg[h] += 1
        self.indeg = tuple(indeg)
        if check:
            ok, problems = validate_eulerian(self)
            if not ok:
                raise GraphError("not a connected Eulerian digraph: " + "; ".join(problems[:5]))

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"FiniteGraph{label}(n={self.n}, m={self.num_edges})"

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], name: str = "", check: bool = True):
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
        return cls(adj, name=name, check=check)

    @classmethod
    def bidirected(cls, n: int, edges: Iterable[tuple[int, int]], name: str = "", check: bool = True):
        """Each undirected edge {a, b} becomes a->b and b->a."""
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        return cls(adj, name=name, check=check)

    @property
    def num_edges(self) -> int:
        return sum(len(h) for h in self.adj)

    @property
    def max_degree(self) -> int:
        return max(len(h) for h in self.adj)

    def check(self, v) -> int:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n):
            raise GraphError(f"vertex {v!r} not in 0..{self.n - 1}")
        return int(v)

    def outdeg(self, v) -> int:
        return len(self.adj[self.check(v)])

    deg = outdeg

    def out_heads(self, v) -> list[int]:
        return list(self.adj[self.check(v)])

    def out_edges(self, v) -> list[DirectedEdge]:
        v = self.check(v)
        return [DirectedEdge(v, h, k) for k, h in enumerate(self.adj[v])]

    def edges(self) -> list[DirectedEdge]:
        return [e for v in range(self.n) for e in self.out_edges(v)]

    def in_edges(self, v) -> list[DirectedEdge]:
        v = self.check(v)
        if self._in is None:
            rev: list[list[DirectedEdge]] = [[] for _ in range(self.n)]
            for e in self.edges():
                rev[e.head].append(e)
            self._in = rev
        return list(self._in[v])

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(offsets, heads) arrays; out-edges of v are ``heads[offsets[v]:offsets[v+1]]``."""
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(h) for h in self.adj])
        heads = np.fromiter((h for hs in self.adj for h in hs), dtype=np.int64, count=int(offsets[-1]))
        return offsets, heads

    def permuted(self, rng: np.random.Generator) -> "FiniteGraph":
        """Same graph with each out-edge order shuffled (a different rotor mechanism)."""
        adj = [list(h) for h in self.adj]
        for h in adj:
            rng.shuffle(h)
        return FiniteGraph(adj, name=self.name + "~perm", check=False)

    def write(self, path: str | Path) -> None:
        lines = [f"{self.n} {self.num_edges}"]
        lines += [f"{v} {h}" for v in range(self.n) for h in self.adj[v]]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, check: bool = True) -> "FiniteGraph":
        """Read ``n m`` then ``m`` lines ``tail head``; out-edge order is file order."""
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise GraphError(f"{path}: first line must be 'n m'")
        n, m = int(rows[0][0]), int(rows[0][1])
        if len(rows) - 1 != m:
            raise GraphError(f"{path}: header says {m} edges, found {len(rows) - 1}")
        edges = []
        for k, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise GraphError(f"{path}:{k}: expected 'tail head'")
            edges.append((int(row[0]), int(row[1])))
        return cls.from_edges(n, edges, name=Path(path).stem, check=check)


GraphModel = Lattice | FiniteGraph


# ---------------------------------------------------------------- validation


def _weakly_connected(g: FiniteGraph) -> bool:
    if g.n == 0:
        return False
    nbrs: list[set[int]] = [set() for _ in range(g.n)]
    for v, heads in enumerate(g.adj):
        for h in heads:
            nbrs[v].add(h)
            nbrs[h].add(v)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n


def validate_eulerian(g: FiniteGraph) -> tuple[bool, list[str]]:
    """Check indeg == outdeg everywhere and connectivity; returns (ok, violations)."""
    problems = []
    for v in range(g.n):
        if len(g.adj[v]) == 0:
            problems.append(f"vertex {v} has no out-edges")
        elif g.indeg[v] != len(g.adj[v]):
            problems.append(f"vertex {v}: indeg {g.indeg[v]} != outdeg {len(g.adj[v])}")
    if not _weakly_connected(g):
        problems.append("underlying graph is disconnected")
    return not problems, problems


# ---------------------------------------------------------------- balls and W


@dataclass
class BallProfile:
    """B(o, r), v(r) and W(r) for a single radius."""

    radius: int
    vertices: frozenset
    edge_count: int  # v(r): directed edges with tail or head in B(o, r)
    w: int  # W(r) = sum_{n < r} v(n)


@dataclass
class BallGrowth:
    """Incrementally grown ball sequence around an origin.

    Layer ``r`` holds the vertices at directed distance exactly ``r``.
    Used for ``ball``, ``w_inverse`` and the maximal degree Delta_t.
    """

    graph: object
    origin: object
    layers: list = field(default_factory=list)
    seen: set = field(default_factory=set)
    touched: set = field(default_factory=set)
    v: list = field(default_factory=list)  # v(0), v(1), ...
    w: list = field(default_factory=lambda: [0])  # W(0), W(1), ...
    max_deg: list = field(default_factory=list)  # max outdeg over B(o, r)

    def __post_init__(self):
        o = self.graph.check(self.origin)
        self.origin = o
        self.layers.append([o])
        self.seen.add(o)
        self._absorb([o])

    def _absorb(self, layer) -> None:
        g = self.graph
        for x in layer:
            for e in g.out_edges(x):
                self.touched.add((e.tail, e.slot))
            for e in g.in_edges(x):
                self.touched.add((e.tail, e.slot))
        self.v.append(len(self.touched))
        self.w.append(self.w[-1] + self.v[-1])
        prev = self.max_deg[-1] if self.max_deg else 0
        self.max_deg.append(max([prev] + [g.outdeg(x) for x in layer]))

    @property
    def radius(self) -> int:
        return len(self.layers) - 1

    def grow(self) -> None:
        g = self.graph
        nxt = []
        for x in self.layers[-1]:
            for h in g.out_heads(x):
                if h not in self.seen:
                    self.seen.add(h)
                    nxt.append(h)
        self.layers.append(nxt)
        self._absorb(nxt)

    def ensure(self, r: int) -> None:
        while self.radius < r:
            self.grow()

    def vertices(self, r: int) -> set:
        self.ensure(r)
        return {x for layer in self.layers[: r + 1] for x in layer}

    def W(self, r: int) -> int:
        self.ensure(max(r - 1, 0))
        return self.w[r]

    def w_inverse(self, t: int) -> int:
        """Smallest r with W(r) > t."""
        if t < 0:
            raise ValueError("t must be >= 0")
        r = 1
        while self.W(r) <= t:
            r += 1
        return r

    def max_degree(self, r: int) -> int:
        """Delta_r = max outdeg over B(o, r)."""
        if r <= self.radius:
            return self.max_deg[r]
        if not self.graph.is_finite and self.max_deg[-1] == self.graph.max_degree:
            return self.max_deg[-1]
        # finite graphs saturate once the ball stops growing
        while self.radius < r:
            before = len(self.seen)
            self.grow()
            if self.max_deg[-1] == self.graph.max_degree or (self.graph.is_finite and len(self.seen) == before):
                return self.max_deg[-1]
        return self.max_deg[r]


_growth_cache: dict = {}


def ball_growth(g, o) -> BallGrowth:
    key = (id(g), g.check(o))
    entry = _growth_cache.get(key)
    if entry is None or entry.graph is not g:
        entry = BallGrowth(g, o)
        _growth_cache[key] = entry
    return entry


def ball(g, o, r: int) -> BallProfile:
    """B(o, r) by breadth-first directed reachability, with v(r) and W(r)."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    if not g.is_finite and r > g.world_limit:
        raise WorldLimitError(f"radius {r} exceeds world limit")
    bg = ball_growth(g, o)
    bg.ensure(r)
    return BallProfile(r, frozenset(bg.vertices(r)), bg.v[r], bg.W(r))


def w_inverse(g, o, t: int) -> int:
    """min { r : W(r) > t }."""
    return ball_growth(g, o).w_inverse(t)


# ---------------------------------------------------------------- distances


def bfs_distances(g: FiniteGraph, source: int) -> np.ndarray:
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for h in g.adj[v]:
            if dist[h] < 0:
                dist[h] = dist[v] + 1
                queue.append(h)
    return dist


def diameter(g: FiniteGraph) -> int:
    """Max over ordered pairs of the directed distance."""
    if not g.is_finite:
        raise GraphError("diameter is defined for finite graphs only")
    best = 0
    for s in range(g.n):
        d = bfs_distances(g, s)
        if (d < 0).any():
            raise GraphError("graph is not strongly connected")
        best = max(best, int(d.max()))
    return best


# ---------------------------------------------------------------- builders


def thick_cycle(ell: int, n: int) -> FiniteGraph:
    """G_{ell,N}: vertices (x, y), x < ell, y < N (index x*N + y).

    (x, y) ~ (x', y') iff x' = x +- 1 (mod ell), or y' = y with x' != x.
    Every vertex has 2N short-range and ell - 3 long-range neighbours.
    """
    if ell < 3:
        raise GraphError("thick cycle needs ell >= 3")
    if n < 1:
        raise GraphError("thick cycle needs N >= 1")
    adj = []
    for x in range(ell):
        for y in range(n):
            heads = []
            for xp in range(ell):
                if xp == x:
                    continue
                if (xp - x) % ell in (1, ell - 1):
                    heads.extend(xp * n + yp for yp in range(n))
                else:
                    heads.append(xp * n + y)
            adj.append(heads)
    return FiniteGraph(adj, name=f"thick_cycle({ell},{n})")


def cycle_graph(n: int) -> FiniteGraph:
    if n < 2:
        raise GraphError("cycle needs n >= 2")
    if n == 2:
        return FiniteGraph([[1], [0]], name="cycle(2)")
    return FiniteGraph.bidirected(n, [(i, (i + 1) % n) for i in range(n)], name=f"cycle({n})")


def directed_cycle(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], name=f"dcycle({n})")


def path_graph(n: int) -> FiniteGraph:
    return FiniteGraph.bidirected(n, [(i, i + 1) for i in range(n - 1)], name=f"path({n})")


def complete_graph(n: int) -> FiniteGraph:
    return FiniteGraph.bidirected(n, [(i, j) for i in range(n) for j in range(i + 1, n)], name=f"complete({n})")


def star_graph(leaves: int) -> FiniteGraph:
    return FiniteGraph.bidirected(leaves + 1, [(0, k) for k in range(1, leaves + 1)], name=f"star({leaves})")


def random_undirected_graph(n: int, extra: int, rng: np.random.Generator) -> FiniteGraph:
    """Random spanning tree plus ``extra`` random chords, bidirected."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    tries = 0
    while len(edges) < n - 1 + extra and tries < 20 * (extra + 1):
        a, b = (int(z) for z in rng.integers(n, size=2))
        tries += 1
        if a != b:
            edges.add((min(a, b), max(a, b)))
    edge_list = sorted(edges)
    rng.shuffle(edge_list)
    return FiniteGraph.bidirected(n, edge_list, name=f"rand_undirected({n},{extra})")


def random_eulerian_digraph(n: int, cycles: int, rng: np.random.Generator) -> FiniteGraph:
    """Union of a Hamiltonian-ish directed cycle and random directed cycles.

    Every directed cycle adds one to indeg and outdeg of each vertex it
    visits, so the union is Eulerian; the first cycle makes it connected.
    """
    adj: list[list[int]] = [[] for _ in range(n)]
    perm = [int(z) for z in rng.permutation(n)]
    for k in range(n):
        adj[perm[k]].append(perm[(k + 1) % n])
    for _ in range(cycles):
        size = int(rng.integers(2, n + 1))
        verts = [int(z) for z in rng.choice(n, size=size, replace=False)]
        for k in range(size):
            adj[verts[k]].append(verts[(k + 1) % size])
    for heads in adj:
        rng.shuffle(heads)
    return FiniteGraph(adj, name=f"rand_eulerian({n},{cycles})")
