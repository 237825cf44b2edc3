"""Rotor walk stepper, odometer tracking and excursion decomposition.

Retrospective convention: the rotor at v is the slot of the last exit
from v (the initial rotor plays the exit "before time 0").  A step first
advances the rotor at the current vertex one slot cyclically, then moves
along the new rotor.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .configs import ConfigError, ConfigProvider
from .graphs import (
    DIRECTIONS,
    FiniteGraph,
    Lattice,
    LatticeKind,
    WorldLimitError,
    ball_growth,
    lattice_directions,
)

_NO_TABLE = np.zeros((2, 2, 4, 2), dtype=np.int8)
_EMPTY_I64 = np.zeros(0, dtype=np.int64)
_EMPTY_I8 = np.zeros(0, dtype=np.int8)
_RECORD_CHUNK = 1 << 20
_MIN_GROW = 64


class InvariantViolation(AssertionError):
    """A proven property of rotor walks failed on a run."""


def pack_keys(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Injective int64 key for lattice coordinates within the world limit."""
    return (np.asarray(xs, dtype=np.int64) << 32) + np.asarray(ys, dtype=np.int64)


def unpack_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys = np.asarray(keys, dtype=np.int64)
    xs = (keys + (1 << 31)) >> 32
    return xs, keys - (xs << 32)


class RotorWalk:
    """Mutable state of one rotor walk: position, rotors, odometer, range.

    Lattice state is kept in a dense window that doubles on demand;
    finite graphs use flat arrays.  With ``record=True`` every position
    and exit slot is kept for excursion analysis.
    """

    def __init__(self, graph, config: ConfigProvider, origin=None, record: bool = False,
                 world_limit: int | None = None, window: int = 32):
        self.graph = graph
        self.config = config
        self.record = record
        self.finite = graph.is_finite
        self.state = np.zeros(K.STATE_LEN, dtype=np.int64)
        self.state[K.SARR] = -1
        self._rec: list[tuple[np.ndarray, ...]] = []
        self._buf = None
        self._buf_len = 0
        if self.finite:
            self.origin = graph.check(0 if origin is None else origin)
            self.offsets, self.heads = graph.csr()
            self.rot = config.fill_finite().astype(np.int32)
            self.u = np.zeros(graph.n, dtype=np.int64)
            self.arrived = np.zeros(graph.n, dtype=np.bool_)
            self.state[K.SX] = self.state[K.SOX] = self.origin
        else:
            self.origin = graph.check((0, 0) if origin is None else origin)
            self.kind = int(graph.kind)
            self.limit = graph.world_limit if world_limit is None else int(world_limit)
            self.table = getattr(config, "coupled_table", None)
            if self.table is None:
                self.table = _NO_TABLE
            ox, oy = self.origin
            if abs(ox) > self.limit or abs(oy) > self.limit:
                raise WorldLimitError(f"origin {self.origin} outside world limit {self.limit}")
            x0, x1 = max(ox - window, -self.limit), min(ox + window, self.limit)
            if graph.kind == LatticeKind.LINE:
                y0 = y1 = 0
            else:
                y0, y1 = max(oy - window, -self.limit), min(oy + window, self.limit)
            self.x0, self.y0 = x0, y0
            self.h0 = np.uint64(config.lazy_h0 or 0)
            self.rot = config.window(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
            self.u = np.zeros(self.rot.shape, dtype=np.int64)
            self.arrived = np.zeros(self.rot.shape, dtype=np.bool_)
            self.state[K.SX], self.state[K.SY] = ox, oy
            self.state[K.SOX], self.state[K.SOY] = ox, oy

    # ------------------------------------------------------------ views
    @property
    def t(self) -> int:
        return int(self.state[K.ST])

    @property
    def position(self):
        if self.finite:
            return int(self.state[K.SX])
        return int(self.state[K.SX]), int(self.state[K.SY])

    @property
    def returns(self) -> int:
        """Number of times s in 1..t with X_s = o."""
        return int(self.state[K.SRET])

    @property
    def range_size(self) -> int:
        """#R_t with R_t = {X_1, ..., X_t}."""
        return int(self.state[K.SRANGE])

    def _cell(self, v):
        if self.finite:
            return self.graph.check(v)
        x, y = self.graph.check(v)
        i, j = x - self.x0, y - self.y0
        if 0 <= i < self.rot.shape[0] and 0 <= j < self.rot.shape[1]:
            return i, j
        return None

    def odometer(self, v) -> int:
        """u_t(v): number of times s < t with X_s = v."""
        c = self._cell(v)
        return 0 if c is None else int(self.u[c])

    def in_range(self, v) -> bool:
        c = self._cell(v)
        return c is not None and bool(self.arrived[c])

    def rotor(self, v) -> int:
        """Current rotor slot at v (the initial rotor if v was never exited)."""
        c = self._cell(v)
        if c is None:
            return self.config.initial_rotor(v)
        r = int(self.rot[c])
        if r == -1:
            raise ConfigError(f"no rotor at {v}")
        if r < 0 or r >= 4:
            return self.config.initial_rotor(v)
        return r

    def odometer_map(self) -> dict:
        if self.finite:
            idx = np.flatnonzero(self.u)
            return dict(zip(idx.tolist(), self.u[idx].tolist()))
        ii, jj = np.nonzero(self.u)
        coords = zip((ii + self.x0).tolist(), (jj + self.y0).tolist())
        return dict(zip(coords, self.u[ii, jj].tolist()))

    def range_vertices(self) -> set:
        if self.finite:
            return set(np.flatnonzero(self.arrived).tolist())
        ii, jj = np.nonzero(self.arrived)
        return set(zip((ii + self.x0).tolist(), (jj + self.y0).tolist()))

    def range_coords(self) -> np.ndarray:
        """R_t as an (k, 2) array of lattice coordinates."""
        ii, jj = np.nonzero(self.arrived)
        return np.stack([ii + self.x0, jj + self.y0], axis=1)

    def max_excess(self) -> int:
        """max_x u_t(x) - deg(x) over all vertices (negative before any step)."""
        if self.finite:
            return int((self.u - np.diff(self.offsets)).max())
        ii, jj = np.nonzero(self.u)
        if len(ii) == 0:
            return -1
        ys = jj + self.y0
        deg = np.where((self.kind == 0) | ((self.kind == 2) & (ys == 0)), 4, 2)
        return int((self.u[ii, jj] - deg).max())

    # ---------------------------------------------------------- stepping
    def step(self):
        self.run(1)
        return self

    def run(self, nsteps: int, stop_returns: int = 0) -> int:
        """Take up to ``nsteps`` steps, stopping early once ``returns`` reaches ``stop_returns``."""
        done = 0
        while done < nsteps:
            chunk = nsteps - done
            if self.record:
                chunk = min(chunk, _RECORD_CHUNK)
                self._ensure_buffer(chunk)
            if self.finite:
                rv, rs = (self._buf[0], self._buf[2]) if self.record else (_EMPTY_I64, _EMPTY_I8)
                k, status = K.finite_walk(self.offsets, self.heads, self.rot, self.u, self.arrived,
                                          self.state, chunk, stop_returns, rv, rs, self._buf_len)
            else:
                rx, ry, rs = self._buf if self.record else (_EMPTY_I64, _EMPTY_I64, _EMPTY_I8)
                k, status = K.lattice_walk(self.kind, self.rot, self.u, self.arrived, self.x0, self.y0,
                                           self.state, chunk, stop_returns, self.table,
                                           rx, ry, rs, self._buf_len, self.h0)
            self._buf_len += k
            done += k
            if status == K.GROW:
                self._grow()
            elif status == K.MISSING:
                raise ConfigError(f"no initial rotor available at {self.position}")
            elif stop_returns > 0 and self.returns >= stop_returns:
                break
        return done

    def _ensure_buffer(self, chunk: int) -> None:
        if self._buf is not None and self._buf_len + chunk <= len(self._buf[2]):
            return
        if self._buf is not None:
            self._rec.append(tuple(a[: self._buf_len] for a in self._buf))
        size = max(chunk, 1 << 12)
        self._buf = (np.empty(size, np.int64), np.empty(size, np.int64), np.empty(size, np.int8))
        self._buf_len = 0

    def _peek(self):
        """The vertex the next step would move to."""
        x, y = self.position
        r = int(self.rot[x - self.x0, y - self.y0])
        if r == K.LAZY:
            r = self.config.initial_rotor((x, y))
        elif r >= 4:
            r = int(self.table[x & 1, y & 1, self.state[K.SARR], r - 4])
        dirs = lattice_directions(self.graph.kind, x, y)
        d = dirs[(r + 1) % len(dirs)]
        return x + DIRECTIONS[d][0], y + DIRECTIONS[d][1]

    def _grow(self) -> None:
        nx, ny = self._peek()
        lim = self.limit
        if abs(nx) > lim or abs(ny) > lim:
            err = WorldLimitError(f"walk left the world box |x|,|y| <= {lim} at t={self.t}")
            err.walk = self
            raise err
        w, h = self.rot.shape
        x0, y0 = self.x0, self.y0
        x1, y1 = x0 + w - 1, y0 + h - 1
        if nx < x0:
            x0 = max(x0 - max(w, _MIN_GROW), -lim)
        if nx > x1:
            x1 = min(x1 + max(w, _MIN_GROW), lim)
        if ny < y0:
            y0 = max(y0 - max(h, _MIN_GROW), -lim)
        if ny > y1:
            y1 = min(y1 + max(h, _MIN_GROW), lim)
        rot = self.config.window(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
        u = np.zeros(rot.shape, dtype=np.int64)
        arrived = np.zeros(rot.shape, dtype=np.bool_)
        i, j = self.x0 - x0, self.y0 - y0
        rot[i:i + w, j:j + h] = self.rot
        u[i:i + w, j:j + h] = self.u
        arrived[i:i + w, j:j + h] = self.arrived
        self.rot, self.u, self.arrived = rot, u, arrived
        self.x0, self.y0 = x0, y0

    # -------------------------------------------------------- trajectory
    def trajectory(self) -> tuple[np.ndarray, np.ndarray]:
        """(positions X_0..X_t, exit slots); lattice positions have shape (t + 1, 2)."""
        if not self.record:
            raise ValueError("walk was created without record=True")
        parts = list(self._rec)
        if self._buf is not None:
            parts.append(tuple(a[: self._buf_len] for a in self._buf))
        slots = np.concatenate([p[2] for p in parts]) if parts else _EMPTY_I8.copy()
        if self.finite:
            pos = np.concatenate([[self.origin]] + [p[0] for p in parts]).astype(np.int64)
            return pos, slots
        xs = np.concatenate([[self.origin[0]]] + [p[0] for p in parts]).astype(np.int64)
        ys = np.concatenate([[self.origin[1]]] + [p[1] for p in parts]).astype(np.int64)
        return np.stack([xs, ys], axis=1), slots

    def position_keys(self) -> np.ndarray:
        pos, _ = self.trajectory()
        return pos if self.finite else pack_keys(pos[:, 0], pos[:, 1])


def _vertices(graph, keys: np.ndarray) -> list:
    if graph.is_finite:
        return keys.tolist()
    xs, ys = unpack_keys(keys)
    return list(zip(xs.tolist(), ys.tolist()))


# ------------------------------------------------------------------ runs


@dataclass
class Checkpoint:
    t: int
    u_origin: int
    range_size: int
    max_excess: int
    snapshot: np.ndarray | set | None = None


@dataclass
class StepSummary:
    checkpoints: list[Checkpoint]
    final: Checkpoint


def run_steps(graph, config, o=None, t: int = 0, checkpoints=(), snapshots: bool = False,
              world_limit: int | None = None) -> StepSummary:
    """Walk exactly ``t`` steps, recording u_t(o) and #R_t at each checkpoint."""
    if t < 0:
        raise ValueError("t must be >= 0")
    walk = RotorWalk(graph, config, o, world_limit=world_limit)
    marks = sorted({int(c) for c in checkpoints if 0 <= c <= t})

    def take():
        snap = None
        if snapshots:
            snap = walk.range_vertices() if walk.finite else walk.range_coords()
        return Checkpoint(walk.t, walk.odometer(walk.origin), walk.range_size, walk.max_excess(), snap)

    rows = []
    for c in marks:
        walk.run(c - walk.t)
        rows.append(take())
    walk.run(t - walk.t)
    return StepSummary(rows, take())


@dataclass
class ExcursionLog:
    """Excursion decomposition of one walk.

    Index n runs from 0: ``T[0] = 0``, ``A[0] = {o}``, ``e[0] = {}``.  For
    n >= 1, ``T[n]`` is the time of the (n deg(o))-th return to o,
    ``e[n]`` the visit counts during excursion n and ``rotors[n]`` the
    rotors on ``A[n]`` at time ``T[n]``.
    """

    origin: object
    T: list[int] = field(default_factory=list)
    e: list[dict] = field(default_factory=list)
    A: list[set] = field(default_factory=list)
    rotors: list[dict] = field(default_factory=list)
    incomplete: bool = False
    steps: int = 0

    @property
    def completed(self) -> int:
        return len(self.T) - 1


def run_excursions(graph, config, o=None, n_max: int = 1, step_budget: int = 10**6,
                   world_limit: int | None = None) -> ExcursionLog:
    """Run until ``n_max`` excursions complete or ``step_budget`` steps are spent.

    Excursion n ends at the (n deg(o))-th return to the origin, so that
    u_{T(n)}(o) = n deg(o).
    """
    if n_max < 1 or step_budget < 1:
        raise ValueError("n_max and step_budget must be >= 1")
    walk = RotorWalk(graph, config, o, record=True, world_limit=world_limit)
    deg_o = graph.outdeg(walk.origin)
    T = [0]
    for n in range(1, n_max + 1):
        walk.run(step_budget - walk.t, stop_returns=n * deg_o)
        if walk.returns < n * deg_o:
            break
        T.append(walk.t)
    log = ExcursionLog(walk.origin, incomplete=len(T) <= n_max, steps=walk.t)
    keys = walk.position_keys()
    _, slots = walk.trajectory()
    log.T = T
    log.e.append({})
    log.A.append({walk.origin})
    log.rotors.append({})
    current: dict = {}
    for n in range(1, len(T)):
        seg = keys[T[n - 1]:T[n]]
        uniq, counts = np.unique(seg, return_counts=True)
        verts = _vertices(graph, uniq)
        log.e.append(dict(zip(verts, counts.tolist())))
        log.A.append(set(verts))
        # last exit slot of each vertex within the segment
        rev = seg[::-1]
        ru, first = np.unique(rev, return_index=True)
        last_slots = slots[T[n - 1]:T[n]][::-1][first]
        current.update(zip(_vertices(graph, ru), last_slots.tolist()))
        log.rotors.append({v: current[v] for v in verts})
    return log


# ------------------------------------------------------------ invariants


def check_excursions(graph, log: ExcursionLog) -> list[str]:
    """Exact excursion invariants; returns human-readable violations (empty if none).

    e_n <= deg; e_{n+1} = deg on A_n; A_{n+1} contains A_n and its outer
    boundary; B(o, n) within A_n; rotors on A_n frozen after T(n).
    """
    bad = []
    grow = ball_growth(graph, log.origin)
    for n in range(1, len(log.T)):
        e = log.e[n]
        for x, c in e.items():
            if c > graph.outdeg(x):
                bad.append(f"e_{n}({x}) = {c} > deg")
        ball = grow.vertices(n)
        if not ball <= log.A[n]:
            bad.append(f"B(o,{n}) not inside A_{n}")
        if n + 1 < len(log.T):
            nxt, A_next = log.e[n + 1], log.A[n + 1]
            for x in log.A[n]:
                d = graph.outdeg(x)
                if nxt.get(x, 0) != d:
                    bad.append(f"e_{n + 1}({x}) = {nxt.get(x, 0)} != deg {d}")
                for h in graph.out_heads(x):
                    if h not in A_next:
                        bad.append(f"A_{n + 1} misses {h} from the boundary of A_{n}")
                if log.rotors[n + 1][x] != log.rotors[n][x]:
                    bad.append(f"rotor at {x} moved between T({n}) and T({n + 1})")
    return bad


def range_bound(graph, o, t: int) -> float:
    """t / (deg(o) W^{-1}(t) + Delta_t - 1), the guaranteed minimum of #R_t."""
    if t == 0:
        return 0.0
    grow = ball_growth(graph, o)
    return t / (graph.outdeg(o) * grow.w_inverse(t) + grow.max_degree(t) - 1)


def check_growth_bounds(graph, o, cp: Checkpoint) -> list[str]:
    """The three growth bounds as stated, each violation tagged (i), (ii) or (iii).

    (i) u_t(o) < deg(o) W^{-1}(t); (ii) u_t(x) <= u_t(o) + deg(x);
    (iii) #R_t >= t / (deg(o) W^{-1}(t) + Delta_t - 1).  With u_t counting
    the time-0 presence, (i) can fail by one at equality, and (ii) and
    (iii) need deg(x) <= deg(o); see ``corrected_growth_bounds``.
    """
    bad = []
    grow = ball_growth(graph, o)
    cap = graph.outdeg(o) * grow.w_inverse(cp.t)
    if cp.u_origin >= cap:
        bad.append(f"(i) t={cp.t}: u_t(o) = {cp.u_origin} >= {cap}")
    if cp.max_excess > cp.u_origin:
        bad.append(f"(ii) t={cp.t}: some u_t(x) - deg(x) = {cp.max_excess} > u_t(o) = {cp.u_origin}")
    lower = range_bound(graph, o, cp.t)
    if cp.range_size < lower:
        bad.append(f"(iii) t={cp.t}: #R_t = {cp.range_size} < {lower:.3f}")
    return bad


def corrected_growth_bounds(graph, o, walk: "RotorWalk") -> list[str]:
    """Bounds that hold for every Eulerian graph with u_t(x) = #{0 <= s < t : X_s = x}.

    With k excursions finished before t: u_t(o) >= 1 + k deg(o) and
    u_t(x) <= (k + 1) deg(x), while W(k) <= T(k) < t gives k < W^{-1}(t).
    Hence u_t(o) <= deg(o) W^{-1}(t), u_t(x) <= deg(x) (floor((u_t(o) - 1) / deg(o)) + 1)
    and #{x : u_t(x) > 0} >= t / (Delta_t W^{-1}(t)).
    """
    t = walk.t
    if t == 0:
        return []
    bad = []
    grow = ball_growth(graph, o)
    r = grow.w_inverse(t)
    d_o = graph.outdeg(o)
    u = walk.odometer_map()
    u_o = u.get(o, 0)
    if u_o > d_o * r:
        bad.append(f"t={t}: u_t(o) = {u_o} > {d_o * r}")
    k = (u_o - 1) // d_o
    for x, c in u.items():
        if c > graph.outdeg(x) * (k + 1):
            bad.append(f"t={t}: u_t({x}) = {c} > {graph.outdeg(x) * (k + 1)}")
            break
    visited = sum(1 for c in u.values() if c > 0)
    if visited * grow.max_degree(t) * r < t:
        bad.append(f"t={t}: only {visited} vertices with u_t > 0")
    return bad


# --------------------------------------------------------- serialization


def snapshot_json(walk: RotorWalk) -> str:
    """Compact JSON of the odometer: parallel vertex and count lists."""
    od = walk.odometer_map()
    verts = sorted(od)
    return json.dumps({
        "t": walk.t,
        "position": walk.position,
        "origin": walk.origin,
        "vertices": [list(v) if isinstance(v, tuple) else v for v in verts],
        "counts": [od[v] for v in verts],
    }, separators=(",", ":"))


def write_snapshot(walk: RotorWalk, path: str | Path) -> None:
    Path(path).write_text(snapshot_json(walk) + "\n")
