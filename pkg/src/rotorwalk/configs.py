"""Initial rotor configurations.

Every provider is a pure function of its parameters and the vertex.  The
seeded providers use a splitmix64-style avalanche mix of (seed, tag, x, y);
tags keep independent uses of one seed apart.
"""
from __future__ import annotations

from collections import deque
from pathlib import Path

import numpy as np

from .graphs import (
    DIRECTIONS,
    DIRECTION_NAMES,
    E,
    FiniteGraph,
    GraphError,
    Lattice,
    LatticeKind,
    N,
    S,
    W,
    lattice_directions,
)

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

TAG_ROTOR = 1
TAG_PERCOLATION = 2
TAG_ORIGIN_EXIT = 3
TAG_AUX = 4

MISSING = -1  # explicit configuration has no entry
LAZY = -2  # seeded uniform rotor, hashed by the walk kernel on first use


class ConfigError(ValueError):
    pass


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def hash_site(seed: int, tag: int, x: int, y: int, counter: int = 0) -> int:
    h = mix64(seed * _GOLDEN + tag)
    h = mix64(h ^ (x & MASK64))
    h = mix64(h ^ (y & MASK64))
    return mix64(h ^ counter)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def hash_sites(seed: int, tag: int, xs: np.ndarray, ys: np.ndarray, counter: int = 0) -> np.ndarray:
    """Vectorised ``hash_site``; agrees bit-for-bit with the scalar version."""
    h0 = np.uint64(mix64(seed * _GOLDEN + tag))
    xs = np.asarray(xs, dtype=np.int64).view(np.uint64)
    ys = np.asarray(ys, dtype=np.int64).view(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64_np(h0 ^ xs)
        h = _mix64_np(h ^ ys)
        return _mix64_np(h ^ np.uint64(counter))


def uniform_slot(seed: int, tag: int, x: int, y: int, deg: int) -> int:
    """Uniform slot in [0, deg) by rejection sampling (no modulo bias)."""
    limit = (1 << 64) // deg * deg
    counter = 0
    while True:
        h = hash_site(seed, tag, x, y, counter)
        if h < limit:
            return h % deg
        counter += 1


def uniform_slots(seed: int, tag: int, xs, ys, degs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    degs = np.broadcast_to(np.asarray(degs, dtype=np.uint64), xs.shape)
    h = hash_sites(seed, tag, xs, ys)
    out = (h % degs).astype(np.int64)
    # powers of two never reject; other degrees almost never do
    pow2 = (degs & (degs - np.uint64(1))) == 0
    if not pow2.all():
        limit = (np.uint64(MASK64) // degs) * degs
        bad = np.flatnonzero((~pow2) & (h >= limit))
        for k in bad:
            out[k] = uniform_slot(seed, tag, int(xs.flat[k]), int(ys.flat[k]), int(degs.flat[k]))
    return out


def lattice_degrees(kind: LatticeKind, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if kind == LatticeKind.Z2:
        return np.full(np.shape(xs), 4, dtype=np.int64)
    if kind == LatticeKind.COMB:
        return np.where(np.asarray(ys) == 0, 4, 2).astype(np.int64)
    return np.full(np.shape(xs), 2, dtype=np.int64)


def window_coords(x0: int, y0: int, w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = np.meshgrid(np.arange(x0, x0 + w, dtype=np.int64), np.arange(y0, y0 + h, dtype=np.int64), indexing="ij")
    return xs, ys


def slot_toward(graph: Lattice, v, direction: int) -> int:
    dirs = lattice_directions(graph.kind, *v)
    if direction not in dirs:
        raise ConfigError(f"{graph!r} has no {DIRECTION_NAMES[direction]} out-edge at {v}")
    return dirs.index(direction)


class ConfigProvider:
    """Initial rotor ``rho_0(v)`` as an out-edge slot of ``v``."""

    kind = "abstract"
    lazy_h0: int | None = None

    def __init__(self, graph):
        self.graph = graph

    def initial_rotor(self, v) -> int:
        raise NotImplementedError

    def fill(self, x0: int, y0: int, w: int, h: int) -> np.ndarray:
        """Initial slots over a lattice window, shape (w, h), index [x - x0, y - y0]."""
        out = np.empty((w, h), dtype=np.int8)
        for i in range(w):
            for j in range(h):
                out[i, j] = self.initial_rotor((x0 + i, y0 + j))
        return out

    def window(self, x0: int, y0: int, w: int, h: int) -> np.ndarray:
        """Window for the walk kernel; may hold LAZY cells resolved from ``lazy_h0``."""
        return self.fill(x0, y0, w, h)

    def fill_finite(self) -> np.ndarray:
        return np.array([self.initial_rotor(v) for v in range(self.graph.n)], dtype=np.int32)

    def describe(self) -> dict:
        return {"kind": self.kind}


def initial_rotor(c: ConfigProvider, v) -> int:
    return c.initial_rotor(v)


class UniformConfig(ConfigProvider):
    """i.i.d. uniform initial rotors from a seed."""

    kind = "uniform"

    def __init__(self, graph, seed: int, tag: int = TAG_ROTOR):
        super().__init__(graph)
        self.seed = int(seed)
        self.tag = tag
        self.lazy_h0 = mix64(self.seed * _GOLDEN + tag)

    def window(self, x0, y0, w, h):
        return np.full((w, h), LAZY, dtype=np.int8)

    def initial_rotor(self, v) -> int:
        g = self.graph
        if g.is_finite:
            v = g.check(v)
            return uniform_slot(self.seed, self.tag, v, 0, g.outdeg(v))
        x, y = g.check(v)
        return uniform_slot(self.seed, self.tag, x, y, g.outdeg((x, y)))

    def fill(self, x0, y0, w, h):
        xs, ys = window_coords(x0, y0, w, h)
        degs = lattice_degrees(self.graph.kind, xs, ys)
        return uniform_slots(self.seed, self.tag, xs, ys, degs).astype(np.int8)

    def fill_finite(self):
        g = self.graph
        vs = np.arange(g.n, dtype=np.int64)
        degs = np.array([len(h) for h in g.adj], dtype=np.int64)
        return uniform_slots(self.seed, self.tag, vs, np.zeros_like(vs), degs).astype(np.int32)

    def describe(self):
        return {"kind": self.kind, "seed": self.seed}


class DiamondConfigZ2(ConfigProvider):
    """Clockwise rotors on Z^2 whose excursion sets are the diamonds B(o, n).

    Each closed quadrant sector points one way: {x >= 0, y > 0} east,
    {x > 0, y <= 0} south, {x <= 0, y < 0} west, {x < 0, y >= 0} north.
    A vertex at distance n is first reached during excursion n from its
    inner neighbours, and the sector rule makes every such visit bounce
    straight back, so excursion n stays inside B(o, n).  Only the origin
    (rotor north) lies outside all four sectors.
    """

    kind = "diamond"

    def __init__(self, graph, origin=(0, 0)):
        if graph.is_finite or graph.kind != LatticeKind.Z2:
            raise ConfigError("the diamond configuration is defined on Z2 only")
        super().__init__(graph)
        self.origin = graph.check(origin)

    def initial_rotor(self, v) -> int:
        x, y = self.graph.check(v)
        return int(self._rule(np.array(x - self.origin[0]), np.array(y - self.origin[1])))

    @staticmethod
    def _rule(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.full(np.shape(x), N, dtype=np.int8)
        out[(x >= 0) & (y > 0)] = E
        out[(x > 0) & (y <= 0)] = S
        out[(x <= 0) & (y < 0)] = W
        return out

    def fill(self, x0, y0, w, h):
        xs, ys = window_coords(x0, y0, w, h)
        return self._rule(xs - self.origin[0], ys - self.origin[1])

    def describe(self):
        return {"kind": self.kind}


_RAY = {"E": E, "N": N, "W": W, "S": S}


class PathToOriginConfig(ConfigProvider):
    """An infinite ray of rotors pointing back at the origin; uniform elsewhere.

    The ray leaves ``origin`` in ``direction``; the off-ray rotors come
    from ``aux_seed`` under a tag of their own.
    """

    kind = "path_to_origin"

    def __init__(self, graph, origin=(0, 0), direction: str = "E", aux_seed: int = 0):
        if graph.is_finite:
            raise ConfigError("path-to-origin needs an infinite lattice")
        super().__init__(graph)
        self.origin = graph.check(origin)
        self.direction = _RAY[direction.upper()]
        self.toward = (self.direction + 2) % 4
        self.aux_seed = int(aux_seed)
        self._uniform = UniformConfig(graph, self.aux_seed, tag=TAG_AUX)
        self.lazy_h0 = self._uniform.lazy_h0
        dx, dy = DIRECTIONS[self.direction]
        # the lattices are 2-periodic, so two ray sites settle existence
        self._ray_slots = []
        for k in (1, 2):
            v = (self.origin[0] + k * dx, self.origin[1] + k * dy)
            if graph.kind == LatticeKind.LINE and v[1] != 0:
                raise ConfigError("the line has only horizontal rays")
            self._ray_slots.append(slot_toward(graph, v, self.toward))

    def _on_ray(self, x, y):
        dx, dy = DIRECTIONS[self.direction]
        ox, oy = self.origin
        rx, ry = x - ox, y - oy
        k = rx * dx + ry * dy
        return (k > 0) & (rx == k * dx) & (ry == k * dy), k

    def initial_rotor(self, v) -> int:
        x, y = self.graph.check(v)
        on, k = self._on_ray(x, y)
        if on:
            return self._ray_slots[(k - 1) % 2]
        return self._uniform.initial_rotor((x, y))

    def fill(self, x0, y0, w, h):
        return self._plant(self._uniform.fill(x0, y0, w, h), x0, y0)

    def window(self, x0, y0, w, h):
        return self._plant(self._uniform.window(x0, y0, w, h), x0, y0)

    def _plant(self, out, x0, y0):
        w, h = out.shape
        xs, ys = window_coords(x0, y0, w, h)
        on, k = self._on_ray(xs, ys)
        out[on] = np.where((k[on] - 1) % 2 == 0, self._ray_slots[0], self._ray_slots[1])
        return out

    def describe(self):
        return {"kind": self.kind, "direction": DIRECTION_NAMES[self.direction], "aux_seed": self.aux_seed}


class TreeToOriginConfig(ConfigProvider):
    """Rotors forming a spanning in-tree rooted at ``origin``.

    Each non-root vertex points along a shortest path toward the origin;
    ties go to the smallest head index, then the smallest slot.  The root
    keeps slot 0.
    """

    kind = "tree_to_origin"

    def __init__(self, graph: FiniteGraph, origin: int = 0):
        if not graph.is_finite:
            raise ConfigError("tree-to-origin needs a finite graph")
        super().__init__(graph)
        self.origin = graph.check(origin)
        rev: list[list[int]] = [[] for _ in range(graph.n)]
        for v, heads in enumerate(graph.adj):
            for h in heads:
                rev[h].append(v)
        dist = [-1] * graph.n
        dist[self.origin] = 0
        queue = deque([self.origin])
        while queue:
            v = queue.popleft()
            for p in rev[v]:
                if dist[p] < 0:
                    dist[p] = dist[v] + 1
                    queue.append(p)
        if min(dist) < 0:
            raise ConfigError("origin is not reachable from every vertex")
        slots = [0] * graph.n
        for v, heads in enumerate(graph.adj):
            if v == self.origin:
                continue
            best = min((h, k) for k, h in enumerate(heads) if dist[h] == dist[v] - 1)
            slots[v] = best[1]
        self.slots = slots

    def initial_rotor(self, v) -> int:
        return self.slots[self.graph.check(v)]

    def fill_finite(self):
        return np.array(self.slots, dtype=np.int32)

    def describe(self):
        return {"kind": self.kind, "origin": self.origin}


class ExplicitConfig(ConfigProvider):
    """Rotors from an explicit mapping; unlisted vertices are an error."""

    kind = "explicit"

    def __init__(self, graph, mapping: dict):
        super().__init__(graph)
        self.mapping = {}
        for v, slot in mapping.items():
            v = graph.check(tuple(v) if isinstance(v, list) else v)
            if not 0 <= slot < graph.outdeg(v):
                raise ConfigError(f"slot {slot} out of range at {v}")
            self.mapping[v] = int(slot)

    def initial_rotor(self, v) -> int:
        v = self.graph.check(v)
        try:
            return self.mapping[v]
        except KeyError:
            raise ConfigError(f"explicit configuration has no rotor at {v}") from None

    def fill(self, x0, y0, w, h):
        out = np.full((w, h), MISSING, dtype=np.int8)
        for (x, y), slot in self.mapping.items():
            if x0 <= x < x0 + w and y0 <= y < y0 + h:
                out[x - x0, y - y0] = slot
        return out

    def fill_finite(self):
        out = np.full(self.graph.n, MISSING, dtype=np.int32)
        for v, slot in self.mapping.items():
            out[v] = slot
        return out

    @classmethod
    def load(cls, graph, path: str | Path) -> "ExplicitConfig":
        """Lines ``x y slot`` (lattices) or ``v slot`` (finite graphs)."""
        mapping = {}
        for k, line in enumerate(Path(path).read_text().splitlines(), start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            nums = [int(p) for p in parts]
            if graph.is_finite and len(nums) == 2:
                mapping[nums[0]] = nums[1]
            elif len(nums) == 3:
                v = nums[0] if graph.is_finite else (nums[0], nums[1])
                if graph.is_finite and nums[1] != 0:
                    raise ConfigError(f"{path}:{k}: finite vertices use y == 0")
                mapping[v] = nums[2]
            else:
                raise ConfigError(f"{path}:{k}: expected 'x y slot'")
        return cls(graph, mapping)

    def describe(self):
        return {"kind": self.kind, "size": len(self.mapping)}


def diamond_config_z2(graph=None) -> DiamondConfigZ2:
    return DiamondConfigZ2(graph if graph is not None else Lattice(LatticeKind.Z2))


def path_to_origin_config(graph, origin=(0, 0), direction="E", aux_seed=0) -> PathToOriginConfig:
    if graph.is_finite:
        raise ConfigError("path-to-origin needs an infinite lattice")
    return PathToOriginConfig(graph, origin, direction, aux_seed)


def tree_to_origin_config(graph, origin=0) -> TreeToOriginConfig:
    return TreeToOriginConfig(graph, origin)
