"""Critical bond percolation on the half-dual lattice and the mirror walk.

The half-dual lattice L has corners (a + 1/2, b + 1/2) with a + b odd.
Each vertex v = (p, q) of Z^2 is the midpoint of exactly one L-edge e_v,
so edge bits are indexed by v itself:

* p + q even: e_v runs NW-SE, shape ``\\``
* p + q odd:  e_v runs SW-NE, shape ``/``

This parity makes the Manhattan mirrors (``\\`` on even sites, ``/`` on
odd sites) send every light ray along a lattice edge.  Corner points are
handled in doubled coordinates (2a + 1, 2b + 1).
"""
from __future__ import annotations

import csv
import enum
import io
from collections import deque
from dataclasses import dataclass

import numpy as np

from .configs import (
    TAG_ORIGIN_EXIT,
    TAG_PERCOLATION,
    ConfigError,
    ConfigProvider,
    UniformConfig,
    hash_site,
    hash_sites,
    window_coords,
)
from .engine import RotorWalk
from .graphs import DIRECTIONS, E, Lattice, LatticeKind, N, S, W, WorldLimitError, lattice_directions

OPEN, CLOSED = 1, 0
BACKSLASH, SLASH = "\\", "/"

# travel direction after reflection
_REFLECT = {
    SLASH: {E: N, N: E, W: S, S: W},
    BACKSLASH: {E: S, S: E, W: N, N: W},
}


class MirrorError(ValueError):
    pass


class Mirror(enum.Enum):
    NONE = 0
    PARALLEL = 1
    PERPENDICULAR = 2


def edge_shape(v) -> str:
    """Shape of e_v: ``\\`` on even sites, ``/`` on odd sites."""
    return BACKSLASH if (v[0] + v[1]) % 2 == 0 else SLASH


def edge_corners(v) -> tuple[tuple[int, int], tuple[int, int]]:
    """Endpoints of e_v in doubled coordinates."""
    p, q = v
    if (p + q) % 2 == 0:
        return (2 * p - 1, 2 * q + 1), (2 * p + 1, 2 * q - 1)
    return (2 * p - 1, 2 * q - 1), (2 * p + 1, 2 * q + 1)


class PercolationField:
    """Lazily revealed fair bits beta_e (1 = open) on the edges of L.

    ``overrides`` plants chosen bits; ``default`` (0 or 1) replaces the
    random bits everywhere else.
    """

    def __init__(self, seed: int = 0, overrides: dict | None = None, default: int | None = None):
        self.seed = int(seed)
        self.overrides = {tuple(k): int(b) for k, b in (overrides or {}).items()}
        self.default = default

    @classmethod
    def constant(cls, bit: int, overrides: dict | None = None) -> "PercolationField":
        return cls(0, overrides, default=bit)

    def bit(self, v) -> int:
        v = (int(v[0]), int(v[1]))
        if v in self.overrides:
            return self.overrides[v]
        if self.default is not None:
            return self.default
        return hash_site(self.seed, TAG_PERCOLATION, v[0], v[1]) & 1

    def is_open(self, v) -> bool:
        return self.bit(v) == OPEN

    def window_bits(self, x0: int, y0: int, w: int, h: int) -> np.ndarray:
        """Bits over a window, shape (w, h), index [x - x0, y - y0]."""
        if self.default is not None:
            out = np.full((w, h), self.default, dtype=np.int8)
        else:
            xs, ys = window_coords(x0, y0, w, h)
            out = (hash_sites(self.seed, TAG_PERCOLATION, xs, ys) & np.uint64(1)).astype(np.int8)
        for (x, y), b in self.overrides.items():
            if 0 <= x - x0 < w and 0 <= y - y0 < h:
                out[x - x0, y - y0] = b
        return out

    def origin_slot(self, o) -> int:
        """The walker's first exit from the origin: a fair bit of its own."""
        return hash_site(self.seed, TAG_ORIGIN_EXIT, int(o[0]), int(o[1])) & 1


def _mirror_lattice(kind) -> LatticeKind:
    kind = LatticeKind[kind.upper().replace("-", "")] if isinstance(kind, str) else LatticeKind(kind)
    if kind not in (LatticeKind.MANHATTAN, LatticeKind.FLATTICE):
        raise MirrorError(f"mirror fields exist only on MANHATTAN and FLATTICE, not {kind.name}")
    return kind


def mirror_at(field: PercolationField, lattice_kind, v) -> Mirror:
    kind = _mirror_lattice(lattice_kind)
    closed = field.bit(v) == CLOSED
    if kind == LatticeKind.MANHATTAN:
        return Mirror.PARALLEL if closed else Mirror.NONE
    return Mirror.PARALLEL if closed else Mirror.PERPENDICULAR


def mirror_shape(v, mirror: Mirror) -> str | None:
    if mirror == Mirror.NONE:
        return None
    shape = edge_shape(v)
    if mirror == Mirror.PARALLEL:
        return shape
    return SLASH if shape == BACKSLASH else BACKSLASH


def light_exit(kind, v, arrival: int, bit: int) -> int:
    """Travel direction out of v for a ray arriving with direction ``arrival``."""
    kind = _mirror_lattice(kind)
    closed = bit == CLOSED
    if kind == LatticeKind.MANHATTAN:
        mirror = Mirror.PARALLEL if closed else Mirror.NONE
    else:
        mirror = Mirror.PARALLEL if closed else Mirror.PERPENDICULAR
    shape = mirror_shape(v, mirror)
    return arrival if shape is None else _REFLECT[shape][arrival]


# ------------------------------------------------------ first glance walk


@dataclass
class MirrorWalk:
    positions: list[tuple[int, int]]
    rotors: dict  # vertex -> rotor assigned at its first visit

    def as_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=np.int64).reshape(-1, 2)


def first_glance_mirror_walk(field: PercolationField, lattice_kind, o=(0, 0), t: int = 0) -> MirrorWalk:
    """Light ray on first visits, rotor walk afterwards.

    The first exit from ``o`` is ``field.origin_slot(o)``.  Every step is
    checked against the lattice orientation.
    """
    kind = _mirror_lattice(lattice_kind)
    o = (int(o[0]), int(o[1]))
    rotors: dict = {}
    x, y = o
    positions = [o]
    arrival = None
    for _ in range(t):
        dirs = lattice_directions(kind, x, y)
        v = (x, y)
        if v in rotors:
            slot = (rotors[v] + 1) % 2
            rotors[v] = slot
            d = dirs[slot]
        else:
            if v == o:
                d = dirs[field.origin_slot(o)]
            else:
                d = light_exit(kind, v, arrival, field.bit(v))
            if d not in dirs:
                raise MirrorError(f"ray at {v} heading {'NESW'[d]} leaves the {kind.name} orientation")
            rotors[v] = dirs.index(d)
        x, y = x + DIRECTIONS[d][0], y + DIRECTIONS[d][1]
        arrival = d
        positions.append((x, y))
    return MirrorWalk(positions, rotors)


# -------------------------------------------------------- coupled rotors


def coupling_table(lattice_kind) -> np.ndarray:
    """Initial rotor slot indexed by [x & 1, y & 1, arrival direction, bit].

    The slot is chosen so that the first exit (the next slot) is the ray's
    exit.  For a fixed arrival the two bits give the two slots, so uniform
    bits yield uniform rotors.  Arrivals impossible at a parity class are 0.
    """
    kind = _mirror_lattice(lattice_kind)
    table = np.zeros((2, 2, 4, 2), dtype=np.int8)
    for px in (0, 1):
        for py in (0, 1):
            dirs = lattice_directions(kind, px, py)
            for arr in (N, E, S, W):
                # the arrival must be along an in-edge: the step from the neighbour behind
                bx, by = px - DIRECTIONS[arr][0], py - DIRECTIONS[arr][1]
                if arr not in lattice_directions(kind, bx, by):
                    continue
                for bit in (0, 1):
                    d = light_exit(kind, (px, py), arr, bit)
                    table[px, py, arr, bit] = (dirs.index(d) - 1) % 2
    return table


class CoupledRotorConfig(ConfigProvider):
    """Initial rotors revealed from the mirror field.

    A vertex's initial rotor depends on the side the walker first arrives
    from, so it is resolved at the first departure (the window holds
    4 + bit until then).  The origin's rotor is fixed by its own fair bit.
    """

    kind = "mirror_coupled"

    def __init__(self, field: PercolationField, lattice_kind, origin=(0, 0)):
        kind = _mirror_lattice(lattice_kind)
        super().__init__(Lattice(kind))
        self.field = field
        self.origin = (int(origin[0]), int(origin[1]))
        self.coupled_table = coupling_table(kind)
        self.origin_rotor = (field.origin_slot(self.origin) - 1) % 2

    def initial_rotor_given(self, v, arrival: int) -> int:
        v = self.graph.check(v)
        if v == self.origin:
            return self.origin_rotor
        return int(self.coupled_table[v[0] & 1, v[1] & 1, arrival, self.field.bit(v)])

    def initial_rotor(self, v) -> int:
        v = self.graph.check(v)
        if v == self.origin:
            return self.origin_rotor
        raise ConfigError("a coupled rotor depends on the arrival direction; use initial_rotor_given")

    def fill(self, x0, y0, w, h):
        out = (4 + self.field.window_bits(x0, y0, w, h)).astype(np.int8)
        ox, oy = self.origin
        if 0 <= ox - x0 < w and 0 <= oy - y0 < h:
            out[ox - x0, oy - y0] = self.origin_rotor
        return out

    def describe(self):
        return {"kind": self.kind, "seed": self.field.seed}


def coupled_rotor_config(field: PercolationField, lattice_kind, origin=(0, 0)) -> CoupledRotorConfig:
    return CoupledRotorConfig(field, lattice_kind, origin)


def coupled_walk(field: PercolationField, lattice_kind, o=(0, 0), t: int = 0,
                 world_limit: int | None = None) -> RotorWalk:
    cfg = CoupledRotorConfig(field, lattice_kind, o)
    walk = RotorWalk(cfg.graph, cfg, o, record=True, world_limit=world_limit)
    walk.run(t)
    return walk


# ---------------------------------------------------- surrounding cycles


def annulus_edges(ell: int):
    """Midpoints v of the L-edges with v and both ends in S_{3 ell} - S_ell (sup norm)."""
    lo, hi = 2 * ell, 6 * ell
    for p in range(-3 * ell, 3 * ell + 1):
        for q in range(-3 * ell, 3 * ell + 1):
            if not ell < max(abs(p), abs(q)) <= 3 * ell:
                continue
            a, b = edge_corners((p, q))
            if all(lo < max(abs(c[0]), abs(c[1])) <= hi for c in (a, b)):
                yield p, q


def closed_ring(a: int, b: int) -> dict:
    """Overrides closing the L-edges on the boundary of {|x + y| <= a, |y - x| <= b}.

    L-edges run along x + y = const only for even constants and along
    y - x = const only for odd ones, so ``a`` must be even and ``b`` odd;
    the boundary is then a closed cycle around the origin.
    """
    if a <= 0 or b <= 0 or a % 2 or b % 2 == 0:
        raise ValueError("need a even, b odd, both positive")
    ring = {}
    r = (a + b) // 2 + 1
    for p in range(-r, r + 1):
        for q in range(-r, r + 1):
            c1, c2 = edge_corners((p, q))
            # doubled coordinates: sums and differences scale by 2
            s1, s2 = c1[0] + c1[1], c2[0] + c2[1]
            d1, d2 = c1[1] - c1[0], c2[1] - c2[0]
            on_sum = s1 == s2 and abs(s1) == 2 * a and max(abs(d1), abs(d2)) <= 2 * b
            on_diff = d1 == d2 and abs(d1) == 2 * b and max(abs(s1), abs(s2)) <= 2 * a
            if on_sum or on_diff:
                ring[(p, q)] = CLOSED
    return ring


def closed_annulus_graph(field: PercolationField, ell: int) -> list[tuple[tuple, tuple, tuple]]:
    """Closed annulus edges as (corner, corner, midpoint), corners doubled."""
    out = []
    for v in annulus_edges(ell):
        if field.bit(v) == CLOSED:
            a, b = edge_corners(v)
            out.append((a, b, v))
    return out


def find_surrounding_cycle(field: PercolationField, ell: int) -> bool:
    """Is there a closed cycle in S_{3 ell} - S_ell winding around the origin?

    Cut along the positive x-axis: crossing it upward moves to the next
    sheet of the cut annulus.  A breadth-first search that labels each
    corner with a sheet number meets a corner on two different sheets
    exactly when some cycle has nonzero winding number.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    adj: dict = {}
    for a, b, (p, q) in closed_annulus_graph(field, ell):
        # the edge through (p, 0), p > 0, crosses the cut; shift counts upward crossings
        shift = 1 if q == 0 and p > 0 else 0
        lower, upper = (a, b) if a[1] < b[1] else (b, a)
        adj.setdefault(lower, []).append((upper, shift))
        adj.setdefault(upper, []).append((lower, -shift))
    sheet: dict = {}
    for start in adj:
        if start in sheet:
            continue
        sheet[start] = 0
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for nb, s in adj[c]:
                want = sheet[c] + s
                if nb not in sheet:
                    sheet[nb] = want
                    queue.append(nb)
                elif sheet[nb] != want:
                    return True
    return False


def returns_before_exit(field: PercolationField, lattice_kind, ell: int, budget: int = 10**5,
                        o=(0, 0)) -> tuple[int, bool]:
    """Returns to ``o`` before the coupled walk first leaves S_{3 ell}; flag = left the box."""
    cfg = CoupledRotorConfig(field, lattice_kind, o)
    walk = RotorWalk(cfg.graph, cfg, o, world_limit=3 * ell)
    try:
        walk.run(budget)
    except WorldLimitError:
        return walk.returns, True
    return walk.returns, False


# ------------------------------------------------------- return counts


@dataclass
class ReturnRecord:
    seed: int
    lattice: str
    t: int
    u_origin: int
    range_size: int
    aborted: bool


def return_count_experiment(lattice_kind, seeds, t: int, checkpoints=(),
                            world_limit: int | None = None) -> list[ReturnRecord]:
    """u_t(o) of the uniform rotor walk per seed (and per checkpoint)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    kind = _mirror_lattice(lattice_kind)
    g = Lattice(kind) if world_limit is None else Lattice(kind, world_limit)
    marks = sorted({int(c) for c in checkpoints if 0 < c < t}) + [t]
    rows = []
    for seed in seeds:
        walk = RotorWalk(g, UniformConfig(g, seed), (0, 0))
        aborted = False
        for c in marks:
            if not aborted:
                try:
                    walk.run(c - walk.t)
                except WorldLimitError:
                    aborted = True
            rows.append(ReturnRecord(int(seed), kind.name, c, walk.odometer((0, 0)), walk.range_size, aborted))
    return rows


RETURN_CSV_COLUMNS = ["seed", "lattice", "t", "u_t_o", "range_size", "aborted"]


def returns_csv(rows: list[ReturnRecord]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(RETURN_CSV_COLUMNS)
    for r in rows:
        out.writerow([r.seed, r.lattice, r.t, r.u_origin, r.range_size, int(r.aborted)])
    return buf.getvalue()
