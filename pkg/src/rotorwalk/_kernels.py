"""Compiled inner loops for the rotor walk.

Lattice state lives in dense windows indexed [x - x0, y - y0].  A kernel
stops (status GROW) before any step that would leave its window and
leaves the state untouched, so the caller can enlarge the window and
resume.

Rotor cell codes: 0..3 current slot, -1 unknown, -2 a seeded uniform
rotor not yet hashed, 4 / 5 a pending mirror-coupled rotor carrying
percolation bit 0 / 1 that is resolved from the arrival direction on
first departure.
"""
import numpy as np
from numba import njit

DONE = 0
GROW = 1
MISSING = 2

# state vector layout
SX, SY, ST, SRANGE, SRET, SARR, SOX, SOY = range(8)
STATE_LEN = 8

LAZY = -2
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

DX = np.array([0, 1, 0, -1], dtype=np.int64)
DY = np.array([1, 0, -1, 0], dtype=np.int64)


@njit(cache=True)
def mix64(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def uniform_slot(h0, x, y, deg):
    """Same value as ``configs.uniform_slot`` given h0 = mix64(seed * golden + tag)."""
    d = np.uint64(deg)
    limit = (np.uint64(0xFFFFFFFFFFFFFFFF) // d) * d
    if (d & (d - np.uint64(1))) == np.uint64(0):
        limit = np.uint64(0)
    counter = np.uint64(0)
    while True:
        h = mix64(h0 ^ np.uint64(x))
        h = mix64(h ^ np.uint64(y))
        h = mix64(h ^ counter)
        # for powers of two every value is accepted
        if limit == np.uint64(0) or h < limit:
            return np.int64(h % d)
        counter += np.uint64(1)


@njit(cache=True, inline="always")
def lattice_degree(kind, x, y):
    if kind == 0:
        return 4
    if kind == 2 and y == 0:
        return 4
    return 2


@njit(cache=True, inline="always")
def lattice_direction(kind, x, y, slot):
    if kind == 0:
        return slot
    if kind == 1:
        return 1 if slot == 0 else 3
    if kind == 2:
        if y == 0:
            return slot
        return 0 if slot == 0 else 2
    if kind == 3:
        horiz = 1 if y % 2 == 0 else 3
        vert = 2 if x % 2 == 0 else 0
        if horiz == 1:
            return 1 if slot == 0 else vert
        return vert if slot == 0 else 3
    # F-lattice
    if (x + y) % 2 == 0:
        return 0 if slot == 0 else 2
    return 1 if slot == 0 else 3


@njit(cache=True)
def lattice_walk(kind, rot, u, arrived, x0, y0, state, nsteps, stop_returns,
                 table, rec_x, rec_y, rec_slot, rec_off, h0):
    """Advance up to ``nsteps`` steps.  Returns (steps_taken, status).

    Stops early once the return count reaches ``stop_returns`` (if > 0).
    When ``rec_x`` is non-empty, positions after each step and the exit
    slots are written from index ``rec_off``.
    """
    w, h = rot.shape
    x = state[SX]
    y = state[SY]
    ox = state[SOX]
    oy = state[SOY]
    arr = state[SARR]
    record = rec_x.shape[0] > 0
    k = 0
    status = DONE
    while k < nsteps:
        i = x - x0
        j = y - y0
        r = rot[i, j]
        if r == LAZY:
            r = uniform_slot(h0, x, y, lattice_degree(kind, x, y))
        elif r < 0:
            status = MISSING
            break
        if r >= 4:
            if arr < 0:
                status = MISSING
                break
            r = table[x & 1, y & 1, arr, r - 4]
        deg = lattice_degree(kind, x, y)
        s = r + 1
        if s == deg:
            s = 0
        d = lattice_direction(kind, x, y, s)
        nx = x + DX[d]
        ny = y + DY[d]
        ni = nx - x0
        nj = ny - y0
        if ni < 0 or ni >= w or nj < 0 or nj >= h:
            status = GROW
            break
        rot[i, j] = s
        u[i, j] += 1
        if not arrived[ni, nj]:
            arrived[ni, nj] = True
            state[SRANGE] += 1
        if record:
            rec_x[rec_off + k] = nx
            rec_y[rec_off + k] = ny
            rec_slot[rec_off + k] = s
        x = nx
        y = ny
        arr = d
        k += 1
        if x == ox and y == oy:
            state[SRET] += 1
            if stop_returns > 0 and state[SRET] >= stop_returns:
                break
    state[SX] = x
    state[SY] = y
    state[ST] += k
    state[SARR] = arr
    return k, status


@njit(cache=True)
def finite_walk(offsets, heads, rot, u, arrived, state, nsteps, stop_returns,
                rec_v, rec_slot, rec_off):
    """Finite-graph counterpart of ``lattice_walk``; state[SX] is the vertex."""
    v = state[SX]
    o = state[SOX]
    record = rec_v.shape[0] > 0
    k = 0
    status = DONE
    while k < nsteps:
        r = rot[v]
        if r < 0:
            status = MISSING
            break
        deg = offsets[v + 1] - offsets[v]
        s = r + 1
        if s == deg:
            s = 0
        nv = heads[offsets[v] + s]
        rot[v] = s
        u[v] += 1
        if not arrived[nv]:
            arrived[nv] = True
            state[SRANGE] += 1
        if record:
            rec_v[rec_off + k] = nv
            rec_slot[rec_off + k] = s
        v = nv
        k += 1
        if v == o:
            state[SRET] += 1
            if stop_returns > 0 and state[SRET] >= stop_returns:
                break
    state[SX] = v
    state[ST] += k
    return k, status


@njit(cache=True)
def finite_cover(offsets, heads, rot, start, budget):
    """Vertex and edge cover times of the walk from ``start``; -1 if not reached."""
    n = offsets.shape[0] - 1
    m = heads.shape[0]
    seen_v = np.zeros(n, dtype=np.bool_)
    seen_e = np.zeros(m, dtype=np.bool_)
    nv = 0
    ne = 0
    t_vertex = -1
    t_edge = -1
    v = start
    t = 0
    while t < budget and (t_vertex < 0 or t_edge < 0):
        deg = offsets[v + 1] - offsets[v]
        s = rot[v] + 1
        if s == deg:
            s = 0
        rot[v] = s
        e = offsets[v] + s
        if not seen_e[e]:
            seen_e[e] = True
            ne += 1
            if ne == m and t_edge < 0:
                # the edge taken at step index t is (X_t, X_{t+1})
                t_edge = t
        v = heads[e]
        t += 1
        if not seen_v[v]:
            seen_v[v] = True
            nv += 1
            if nv == n and t_vertex < 0:
                t_vertex = t
    return t_vertex, t_edge
