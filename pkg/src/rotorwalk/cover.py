"""Cover times of rotor walk on finite Eulerian graphs, random-walk hitting times and K.

K = max_v [ max_u H(u, v) + (#E + sum_{(i,j) in E} |H(i, v) - H(j, v) - 1|) / 2 ]
with #E the number of directed edges.  Rotor walk covers all vertices by
time K + 1 and all edges by 3K; the excursion argument gives D #E and
(D + 1) #E.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as K_
from .configs import ConfigProvider, TreeToOriginConfig, UniformConfig
from .graphs import (
    FiniteGraph,
    GraphError,
    complete_graph,
    cycle_graph,
    diameter,
    random_undirected_graph,
    thick_cycle,
)

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-9


class SolverError(ArithmeticError):
    pass


@dataclass
class CoverReport:
    t_vertex: int | None
    t_edge: int | None
    diameter: int
    num_edges: int
    config: dict = field(default_factory=dict)

    @property
    def incomplete(self) -> bool:
        return self.t_vertex is None or self.t_edge is None

    def within_bounds(self) -> bool:
        """t_vertex <= D #E and t_edge <= (D + 1) #E."""
        if self.incomplete:
            return False
        D, m = self.diameter, self.num_edges
        return self.t_vertex <= D * m and self.t_edge <= (D + 1) * m


def cover_times(g: FiniteGraph, config: ConfigProvider, o: int = 0, budget: int | None = None,
                diam: int | None = None) -> CoverReport:
    """Exact t_vertex = min{t : {X_1..X_t} = V} and t_edge = min{t : {(X_s, X_s+1)}_{s<=t} = E}."""
    if not g.is_finite:
        raise GraphError("cover times need a finite graph")
    D = diameter(g) if diam is None else diam
    m = g.num_edges
    if budget is None:
        budget = (D + 2) * m + 1
    offsets, heads = g.csr()
    rot = config.fill_finite().astype(np.int64)
    if (rot < 0).any():
        raise GraphError("configuration does not cover every vertex")
    tv, te = K_.finite_cover(offsets, heads, rot, g.check(o), budget)
    return CoverReport(None if tv < 0 else int(tv), None if te < 0 else int(te), D, m, config.describe())


# ------------------------------------------------------------- hitting times


@dataclass
class HittingColumn:
    """H(u, v) for all u and a fixed target v."""

    target: int
    h: np.ndarray
    residual: float


def _transition(g: FiniteGraph) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for u, heads in enumerate(g.adj):
        w = 1.0 / len(heads)
        for h in heads:
            rows.append(u)
            cols.append(h)
            vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def one_step_residual(P, h: np.ndarray, v: int) -> float:
    """max_{u != v} |h(u) - 1 - (P h)(u)|, accumulated in extended precision."""
    hl = h.astype(np.longdouble)
    if sp.issparse(P):
        Ph = np.zeros(len(h), dtype=np.longdouble)
        P = P.tocoo()
        np.add.at(Ph, P.row, P.data.astype(np.longdouble) * hl[P.col])
    else:
        Ph = P.astype(np.longdouble) @ hl
    r = hl - 1 - Ph
    r[v] = hl[v]
    return float(np.max(np.abs(r)))


def _solve_column(P, v: int, n: int) -> np.ndarray:
    keep = np.array([u for u in range(n) if u != v], dtype=np.int64)
    if sp.issparse(P):
        A = (sp.identity(n, format="csr") - P)[keep][:, keep].tocsc()
        solve = spla.factorized(A)
    else:
        A = np.eye(n) - P
        A = A[np.ix_(keep, keep)]
        lu = sla.lu_factor(A)

        def solve(rhs):
            return sla.lu_solve(lu, rhs)
    b = np.ones(n - 1)
    x = solve(b)
    # iterative refinement with the residual formed in extended precision
    Al = A.astype(np.longdouble) if not sp.issparse(A) else None
    for _ in range(4):
        if Al is not None:
            r = (b.astype(np.longdouble) - Al @ x.astype(np.longdouble)).astype(np.float64)
        else:
            r = b - A @ x
        if np.max(np.abs(r)) == 0:
            break
        x = x + solve(r)
    h = np.zeros(n)
    h[keep] = x
    return h


def hitting_times(g: FiniteGraph, v: int, P=None) -> HittingColumn:
    """Solve H(u, v) = 1 + mean_{w out-neighbour of u} H(w, v), H(v, v) = 0.

    Dense LU for n <= 2000, sparse LU above; both with iterative refinement.
    """
    v = g.check(v)
    if g.n == 1:
        return HittingColumn(v, np.zeros(1), 0.0)
    if P is None:
        P = _transition(g)
        if g.n <= DENSE_LIMIT:
            P = P.toarray()
    try:
        h = _solve_column(P, v, g.n)
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        raise SolverError(f"hitting-time system is singular: {exc}") from exc
    if not np.all(np.isfinite(h)):
        raise SolverError("hitting-time system is singular (graph not strongly connected?)")
    res = one_step_residual(P, h, v)
    if res > RESIDUAL_TOL:
        raise SolverError(f"residual {res:.3e} above {RESIDUAL_TOL}")
    return HittingColumn(v, h, res)


def k_term(g: FiniteGraph, col: HittingColumn) -> float:
    """max_u H(u, v) + (#E + sum_{(i,j)} |H(i,v) - H(j,v) - 1|) / 2 for one target v."""
    offsets, heads = g.csr()
    tails = np.repeat(np.arange(g.n), np.diff(offsets))
    h = col.h
    spread = np.abs(h[tails] - h[heads] - 1).sum()
    return float(h.max() + 0.5 * (g.num_edges + spread))


def compute_K(g: FiniteGraph, targets=None) -> float:
    """K with v bound jointly with u under the outer maximum."""
    if targets is None:
        targets = range(g.n)
    P = _transition(g)
    if g.n <= DENSE_LIMIT:
        P = P.toarray()
    return max(k_term(g, hitting_times(g, v, P)) for v in targets)


# -------------------------------------------------------------- thick cycles


def thick_cycle_stats(ell: int, n: int) -> tuple[int, int]:
    """(D, #E) of G_{ell,N}; with N = 1 the graph is complete."""
    m = ell * n * (2 * n + ell - 3)
    return (1 if n == 1 else 2), m


def thick_cycle_K(ell: int, n: int) -> float:
    """K of G_{ell,N} from the exact quotient chain seen from target (0, 0).

    The graph is vertex-transitive, so one target suffices.  Vertices
    (x, y) with the same x and the same truth value of y == 0 have equal
    hitting times; class (x, s) has 1 member if s else N - 1.
    """
    if ell < 3 or n < 1:
        raise GraphError("thick cycle needs ell >= 3 and N >= 1")
    deg = 2 * n + ell - 3

    def idx(x, s):
        return 2 * (x % ell) + s

    size = 2 * ell
    # edges out of one vertex of class (x, s): list of (target class, multiplicity)
    moves: dict = {}
    for x in range(ell):
        for s in (0, 1):
            out = []
            for dx in (1, -1):
                out.append((idx(x + dx, 1), 1))
                if n > 1:
                    out.append((idx(x + dx, 0), n - 1))
            for x2 in range(ell):
                if x2 % ell not in {x, (x + 1) % ell, (x - 1) % ell}:
                    out.append((idx(x2, s), 1))
            moves[idx(x, s)] = out
    A = np.eye(size, dtype=np.longdouble)
    for c, out in moves.items():
        for c2, mult in out:
            A[c, c2] -= mult / deg
    target = idx(0, 1)
    classes = [c for c in range(size) if (n > 1 or c % 2 == 1)]
    keep = [c for c in classes if c != target]
    sub = np.array(A[np.ix_(keep, keep)], dtype=np.float64)
    h_keep = np.linalg.solve(sub, np.ones(len(keep)))
    for _ in range(3):
        r = np.ones(len(keep), dtype=np.longdouble) - A[np.ix_(keep, keep)] @ h_keep.astype(np.longdouble)
        h_keep = h_keep + np.linalg.solve(sub, r.astype(np.float64))
    h = np.zeros(size)
    h[keep] = h_keep
    counts = {c: (1 if c % 2 == 1 else n - 1) for c in range(size)}
    spread = 0.0
    for c in classes:
        for c2, mult in moves[c]:
            spread += counts[c] * mult * abs(h[c] - h[c2] - 1)
    _, m = thick_cycle_stats(ell, n)
    return float(h[classes].max() + 0.5 * (m + spread))


# ------------------------------------------------------------------ battery


@dataclass
class Instance:
    graph_id: str
    graph: FiniteGraph
    config: ConfigProvider
    origin: int


def battery(count: int = 200, seed: int = 0, max_n: int = 60) -> list[Instance]:
    """Deterministic mix of undirected graphs with random or tree rotors.

    Each instance also gets a shuffled rotor mechanism and a random start.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        family = k % 4
        if family == 0:
            n = int(rng.integers(3, max_n + 1))
            g = random_undirected_graph(n, int(rng.integers(0, 2 * n)), rng)
        elif family == 1:
            g = cycle_graph(int(rng.integers(3, max_n + 1)))
        elif family == 2:
            ell = int(rng.integers(3, 7))
            g = thick_cycle(ell, int(rng.integers(1, max_n // ell + 1)))
        else:
            g = complete_graph(int(rng.integers(2, max_n + 1)))
        name = g.name
        if rng.random() < 0.5:
            g = g.permuted(rng)
        o = int(rng.integers(0, g.n))
        if k % 2 == 0:
            cfg = UniformConfig(g, int(rng.integers(0, 2**31)))
        else:
            cfg = TreeToOriginConfig(g, o)
        out.append(Instance(f"{k:03d}-{name}", g, cfg, o))
    return out


@dataclass
class CoverRow:
    graph_id: str
    n: int
    m_directed: int
    D: int
    t_vertex: int | None
    t_edge: int | None
    K: float
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def evaluate(inst: Instance) -> CoverRow:
    g = inst.graph
    rep = cover_times(g, inst.config, inst.origin)
    K = compute_K(g)
    D, m = rep.diameter, rep.num_edges
    tv = rep.t_vertex if rep.t_vertex is not None else math.inf
    te = rep.t_edge if rep.t_edge is not None else math.inf
    checks = {
        "vertex_bound": tv <= D * m,
        "edge_bound": te <= (D + 1) * m,
        "k_lower": K >= D * m / 4 - 1,
        "k_vertex": tv <= K + 1,
        "k_edge": te <= 3 * K,
    }
    return CoverRow(inst.graph_id, g.n, m, D, rep.t_vertex, rep.t_edge, K, checks)


COVER_CSV_COLUMNS = ["graph_id", "n", "m_directed", "D", "t_vertex", "t_edge", "K", "bound_checks"]


def cover_csv(rows: list[CoverRow]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(COVER_CSV_COLUMNS)
    for r in rows:
        flags = ";".join(f"{k}={int(v)}" for k, v in r.checks.items())
        out.writerow([r.graph_id, r.n, r.m_directed, r.D, r.t_vertex, r.t_edge, f"{r.K:.10g}", flags])
    return buf.getvalue()
