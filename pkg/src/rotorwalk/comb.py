"""Comb lattice: zigzag marks, the predicted odometer f_m and the diamond shape test.

On the comb the walk projected to the x-axis is itself a rotor walk on
Z, which turns around exactly at the marked axis vertices.  After m
excursions the odometer (counted in full rotor turns) is close to
f_m(x, y) = (m - |x|/2 - |y|/2)^+.  ``DiamondSpec`` and ``shape_check``
encode the sandwich D_{n - k a} within R_t within D_{n + k a} for the
range after t = floor(16 n^3 / 3) steps.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .configs import ConfigProvider, UniformConfig
from .engine import ExcursionLog, RotorWalk
from .graphs import E, Lattice, LatticeKind, N, S, W


class CombError(ValueError):
    pass


def _require_comb(graph) -> None:
    if graph.is_finite or graph.kind != LatticeKind.COMB:
        raise CombError("comb analysis needs the comb lattice")


# axis mechanism N, E, S, W; teeth up (slot 0), down (slot 1)
def axis_west_first(slot: int) -> bool:
    """From rotor ``slot`` (last exit), is the next horizontal exit W?"""
    for k in range(1, 5):
        d = (slot + k) % 4
        if d in (E, W):
            return d == W
    raise AssertionError


def tooth_down_first(slot: int) -> bool:
    return (slot + 1) % 2 == 1


@dataclass
class ZigzagMarks:
    """Marked positions, nearest to the origin first.

    ``positive[i-1]`` is x_i (x > 0, W before E), ``negative[i-1]`` is
    x_{-i} (x < 0, E before W).  ``teeth_up[k]`` / ``teeth_down[k]`` hold
    the marks on tooth k for y > 0 (down before up) and y < 0 (up before
    down).  ``partial`` is set when the window ran out before ``count``.
    """

    positive: list[int] = field(default_factory=list)
    negative: list[int] = field(default_factory=list)
    teeth_up: dict[int, list[int]] = field(default_factory=dict)
    teeth_down: dict[int, list[int]] = field(default_factory=dict)
    partial: bool = False


def extract_marks(config: ConfigProvider, window: int, count: int | None = None,
                  teeth: int = 0) -> ZigzagMarks:
    """Scan |x| <= window on the axis (and |y| <= window on teeth |k| <= ``teeth``)."""
    _require_comb(config.graph)
    xs = np.arange(-window, window + 1)
    axis = config.fill(-window, 0, 2 * window + 1, 1)[:, 0]
    west = np.isin(axis, (E, S))  # next horizontal exit is W
    pos = xs[(xs > 0) & west].tolist()
    neg = xs[(xs < 0) & ~west][::-1].tolist()
    marks = ZigzagMarks(pos, neg)
    if teeth:
        col = config.fill(-teeth, -window, 2 * teeth + 1, 2 * window + 1)
        ys = np.arange(-window, window + 1)
        for i, k in enumerate(range(-teeth, teeth + 1)):
            r = col[i]
            marks.teeth_up[k] = ys[(ys > 0) & (r == 0)].tolist()
            marks.teeth_down[k] = ys[(ys < 0) & (r == 1)][::-1].tolist()
    if count is not None:
        marks.partial = len(pos) < count or len(neg) < count
        marks.positive, marks.negative = pos[:count], neg[:count]
    return marks


def predicted_turns(marks: ZigzagMarks, east_first: bool) -> list[int]:
    """Turning points x_1, x_{-1}, x_2, ... (or starting with x_{-1})."""
    a, b = (marks.positive, marks.negative) if east_first else (marks.negative, marks.positive)
    out = []
    for i in range(min(len(a), len(b))):
        out += [a[i], b[i]]
    if len(a) > len(b):
        out.append(a[len(b)])
    return out


def axis_turning_points(positions: np.ndarray) -> list[int]:
    """Where the axis-restricted walk reverses direction."""
    xs = positions[positions[:, 1] == 0, 0]
    if len(xs) < 2:
        return []
    keep = np.concatenate([[True], xs[1:] != xs[:-1]])
    xs = xs[keep]
    steps = np.diff(xs)
    if np.any(np.abs(steps) != 1):
        raise CombError("axis projection is not a nearest-neighbour walk")
    flips = np.flatnonzero(steps[1:] != steps[:-1]) + 1
    return xs[flips].tolist()


def check_zigzag(walk: RotorWalk, window: int) -> tuple[bool, list[int], list[int]]:
    """Compare observed axis turns with the marks of the initial configuration."""
    pos, _ = walk.trajectory()
    seen = axis_turning_points(pos)
    ox, oy = walk.origin
    if (ox, oy) != (0, 0):
        raise CombError("zigzag check assumes the origin (0, 0)")
    marks = extract_marks(walk.config, window)
    east_first = not axis_west_first(walk.config.initial_rotor((0, 0)))
    want = predicted_turns(marks, east_first)
    return seen == want[: len(seen)], seen, want


# ------------------------------------------------------------ f_m and norms


def predicted_odometer(m, x: int, y: int) -> Fraction:
    """f_m(x, y) = (m - |x|/2 - |y|/2)^+ exactly."""
    if m < 0:
        raise ValueError("m must be >= 0")
    val = Fraction(m) - Fraction(abs(x) + abs(y), 2)
    return max(val, Fraction(0))


def f_norm(m: int) -> Fraction:
    """sum_z deg(z) f_m(z) over the comb.

    Layer |x| + |y| = l >= 1 has total degree 8 l + 4 (two axis vertices of
    degree 4, 4l - 2 tooth vertices of degree 2) and f_m = (2m - l)/2 there.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    total = 8 * m + sum((8 * l + 4) * (2 * m - l) for l in range(1, 2 * m))
    return Fraction(total, 2)


# ----------------------------------------------------------------- diamonds


@dataclass(frozen=True)
class DiamondSpec:
    n: int
    c: float = 4.0

    def __post_init__(self):
        if self.n < 2 or self.c <= 0:
            raise ValueError("need n >= 2 and c > 0")

    @property
    def t(self) -> int:
        return 16 * self.n**3 // 3

    @property
    def a(self) -> float:
        return math.sqrt(self.c * self.n * math.log(self.n))


def diamond_size(r: float) -> int:
    """#D_r with D_r = {|x| + |y| < r}."""
    if r <= 0:
        return 0
    k = math.ceil(r) - 1
    return 2 * k * k + 2 * k + 1


def _as_coords(rng) -> np.ndarray:
    if isinstance(rng, np.ndarray):
        return rng.reshape(-1, 2)
    return np.array(sorted(rng), dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class ShapeVerdict:
    inside_ok: bool
    outside_ok: bool

    @property
    def ok(self) -> bool:
        return self.inside_ok and self.outside_ok


def shape_check(rng, spec: DiamondSpec, multiplier: int = 6, t: int | None = None) -> ShapeVerdict:
    """D_{n - k a} within ``rng`` within D_{n + k a}, with k = ``multiplier``."""
    if t is not None and t != spec.t:
        raise CombError(f"range after t={t} steps, but n={spec.n} needs t={spec.t}")
    pts = _as_coords(rng)
    l1 = np.abs(pts[:, 0]) + np.abs(pts[:, 1])
    r_in = spec.n - multiplier * spec.a
    r_out = spec.n + multiplier * spec.a
    inside = int(np.count_nonzero(l1 < r_in)) == diamond_size(r_in)
    outside = bool(np.all(l1 < r_out))
    return ShapeVerdict(inside, outside)


@dataclass
class CombRun:
    seed: int
    spec: DiamondSpec
    t: int
    range_size: int
    verdict: ShapeVerdict
    coords: np.ndarray

    @property
    def ratio(self) -> float:
        return self.range_size / self.t ** (2 / 3)


def comb_run(seed: int, spec: DiamondSpec, multiplier: int = 6, world_limit: int | None = None) -> CombRun:
    g = Lattice(LatticeKind.COMB)
    walk = RotorWalk(g, UniformConfig(g, seed), (0, 0), world_limit=world_limit)
    walk.run(spec.t)
    coords = walk.range_coords()
    return CombRun(seed, spec, walk.t, walk.range_size, shape_check(coords, spec, multiplier, walk.t), coords)


COMB_CSV_COLUMNS = ["seed", "n", "c", "t", "inside_ok", "outside_ok", "range_size"]


def comb_csv(runs: list[CombRun]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(COMB_CSV_COLUMNS)
    for r in runs:
        out.writerow([r.seed, r.spec.n, r.spec.c, r.t, int(r.verdict.inside_ok), int(r.verdict.outside_ok), r.range_size])
    return buf.getvalue()


# ------------------------------------------------------ odometer sandwich


def odometer_sandwich(log: ExcursionLog, spec: DiamondSpec, slack: float = 2.0) -> list[tuple[int, tuple, str]]:
    """Violations of f_{m - s a} <= u_m <= f_{m + s a} for m <= completed excursions.

    u_m(x) = floor(visits to x during the first m excursions / deg(x)).
    """
    bad = []
    a = slack * spec.a
    visits: dict = {}
    g = Lattice(LatticeKind.COMB)
    for m in range(1, log.completed + 1):
        for v, c in log.e[m].items():
            visits[v] = visits.get(v, 0) + c
        hi = m + a
        lo = m - a
        # vertices where the upper envelope is positive, plus all visited ones
        for v, c in visits.items():
            turns = c // g.outdeg(v)
            l1 = abs(v[0]) + abs(v[1])
            if turns > max(hi - l1 / 2, 0):
                bad.append((m, v, "above"))
            if turns < max(lo - l1 / 2, 0):
                bad.append((m, v, "below"))
        if lo > 0:
            r = math.ceil(2 * lo)
            for x in range(-r, r + 1):
                for y in range(-(r - abs(x)), r - abs(x) + 1):
                    if (x, y) not in visits and lo - (abs(x) + abs(y)) / 2 > 0:
                        bad.append((m, (x, y), "below"))
    return bad
