"""Pure-Python grid kernels.

Reference implementation of the hot inner loops: ray traversal, scan
integration, grid line of sight, volumetric gain, frontier extraction and
grid search. The compiled twin in _grid_core.pyx must stay in lockstep with
this file expression by expression; episode determinism relies on the two
backends producing bit-identical floats.

Cell states: 0 = unknown, 1 = free, 2 = occupied.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

SQRT2 = math.sqrt(2.0)

_N8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


def raycast(block, cell_size, x0, y0, dx, dy, max_range):
    """March a ray through the grid until it enters a blocking cell.

    block: uint8 (h, w), nonzero cells block the ray.
    (x0, y0): origin in meters; (dx, dy): unit direction.
    Returns (hit, dist, col, row); dist is the range to the boundary of the
    first blocking cell, or max_range with hit=False.
    """
    h, w = block.shape
    c = int(math.floor(x0 / cell_size))
    r = int(math.floor(y0 / cell_size))
    if c < 0 or c >= w or r < 0 or r >= h:
        return False, max_range, -1, -1
    if block[r, c]:
        return True, 0.0, c, r

    inf = math.inf
    if dx > 0.0:
        step_c = 1
        t_max_x = ((c + 1) * cell_size - x0) / dx
        t_delta_x = cell_size / dx
    elif dx < 0.0:
        step_c = -1
        t_max_x = (c * cell_size - x0) / dx
        t_delta_x = -cell_size / dx
    else:
        step_c = 0
        t_max_x = inf
        t_delta_x = inf
    if dy > 0.0:
        step_r = 1
        t_max_y = ((r + 1) * cell_size - y0) / dy
        t_delta_y = cell_size / dy
    elif dy < 0.0:
        step_r = -1
        t_max_y = (r * cell_size - y0) / dy
        t_delta_y = -cell_size / dy
    else:
        step_r = 0
        t_max_y = inf
        t_delta_y = inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            c += step_c
        else:
            t = t_max_y
            t_max_y += t_delta_y
            r += step_r
        if t > max_range:
            return False, max_range, -1, -1
        if c < 0 or c >= w or r < 0 or r >= h:
            return False, max_range, -1, -1
        if block[r, c]:
            return True, t, c, r


def integrate_scan(belief, block, cell_size, x0, y0, dirs, max_range):
    """Mark cells traversed by each ray FREE and each hit cell OCCUPIED.

    belief is updated in place. block is the ground-truth occupancy the rays
    collide with. dirs: (n, 2) float64 unit directions.
    """
    h, w = belief.shape
    c0 = int(math.floor(x0 / cell_size))
    r0 = int(math.floor(y0 / cell_size))
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h:
        return
    belief[r0, c0] = FREE
    inf = math.inf
    for i in range(dirs.shape[0]):
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        c = c0
        r = r0
        if dx > 0.0:
            step_c = 1
            t_max_x = ((c + 1) * cell_size - x0) / dx
            t_delta_x = cell_size / dx
        elif dx < 0.0:
            step_c = -1
            t_max_x = (c * cell_size - x0) / dx
            t_delta_x = -cell_size / dx
        else:
            step_c = 0
            t_max_x = inf
            t_delta_x = inf
        if dy > 0.0:
            step_r = 1
            t_max_y = ((r + 1) * cell_size - y0) / dy
            t_delta_y = cell_size / dy
        elif dy < 0.0:
            step_r = -1
            t_max_y = (r * cell_size - y0) / dy
            t_delta_y = -cell_size / dy
        else:
            step_r = 0
            t_max_y = inf
            t_delta_y = inf
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                t_max_x += t_delta_x
                c += step_c
            else:
                t = t_max_y
                t_max_y += t_delta_y
                r += step_r
            if t > max_range:
                break
            if c < 0 or c >= w or r < 0 or r >= h:
                break
            if block[r, c]:
                belief[r, c] = OCCUPIED
                break
            belief[r, c] = FREE


def project_ray(belief, cell_size, x0, y0, dx, dy, max_range):
    """Project a detection ray against the belief grid.

    Returns (kind, dist, col, row): kind 1 = first OCCUPIED cell within
    range, kind 2 = first UNKNOWN cell (fallback when no OCCUPIED was hit),
    kind 0 = ray exits range through fully FREE known space.
    """
    h, w = belief.shape
    c = int(math.floor(x0 / cell_size))
    r = int(math.floor(y0 / cell_size))
    if c < 0 or c >= w or r < 0 or r >= h:
        return 0, max_range, -1, -1
    u_t = -1.0
    u_c = -1
    u_r = -1
    v = belief[r, c]
    if v == OCCUPIED:
        return 1, 0.0, c, r
    if v == UNKNOWN:
        u_t = 0.0
        u_c = c
        u_r = r

    inf = math.inf
    if dx > 0.0:
        step_c = 1
        t_max_x = ((c + 1) * cell_size - x0) / dx
        t_delta_x = cell_size / dx
    elif dx < 0.0:
        step_c = -1
        t_max_x = (c * cell_size - x0) / dx
        t_delta_x = -cell_size / dx
    else:
        step_c = 0
        t_max_x = inf
        t_delta_x = inf
    if dy > 0.0:
        step_r = 1
        t_max_y = ((r + 1) * cell_size - y0) / dy
        t_delta_y = cell_size / dy
    elif dy < 0.0:
        step_r = -1
        t_max_y = (r * cell_size - y0) / dy
        t_delta_y = -cell_size / dy
    else:
        step_r = 0
        t_max_y = inf
        t_delta_y = inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            c += step_c
        else:
            t = t_max_y
            t_max_y += t_delta_y
            r += step_r
        if t > max_range:
            break
        if c < 0 or c >= w or r < 0 or r >= h:
            break
        v = belief[r, c]
        if v == OCCUPIED:
            return 1, t, c, r
        if v == UNKNOWN and u_c < 0:
            u_t = t
            u_c = c
            u_r = r
    if u_c >= 0:
        return 2, u_t, u_c, u_r
    return 0, max_range, -1, -1


def los_clear(block, c0, r0, c1, r1):
    """Bresenham line of sight between cell centers, endpoints excluded."""
    dc = abs(c1 - c0)
    dr = abs(r1 - r0)
    sc = 1 if c1 > c0 else -1
    sr = 1 if r1 > r0 else -1
    err = dc - dr
    c = c0
    r = r0
    while True:
        if c == c1 and r == r1:
            return True
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        if c == c1 and r == r1:
            return True
        if block[r, c]:
            return False


def volumetric_gain(belief, c0, r0, radius_cells):
    """Count UNKNOWN cells within radius that have line of sight from (c0, r0).

    Line of sight passes through non-OCCUPIED belief cells only.
    """
    h, w = belief.shape
    rad = int(math.floor(radius_cells))
    r2 = radius_cells * radius_cells
    count = 0
    r_lo = max(0, r0 - rad)
    r_hi = min(h - 1, r0 + rad)
    c_lo = max(0, c0 - rad)
    c_hi = min(w - 1, c0 + rad)
    for r in range(r_lo, r_hi + 1):
        dr = r - r0
        for c in range(c_lo, c_hi + 1):
            if belief[r, c] != UNKNOWN:
                continue
            dc = c - c0
            if dc * dc + dr * dr > r2:
                continue
            if _los_not_occupied(belief, c0, r0, c, r):
                count += 1
    return count


def _los_not_occupied(belief, c0, r0, c1, r1):
    dc = abs(c1 - c0)
    dr = abs(r1 - r0)
    sc = 1 if c1 > c0 else -1
    sr = 1 if r1 > r0 else -1
    err = dc - dr
    c = c0
    r = r0
    while True:
        if c == c1 and r == r1:
            return True
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        if c == c1 and r == r1:
            return True
        if belief[r, c] == OCCUPIED:
            return False


def frontier_cells(belief):
    """FREE cells 4-adjacent to an UNKNOWN cell, row-major (n, 2) int32."""
    h, w = belief.shape
    out = []
    for r in range(h):
        for c in range(w):
            if belief[r, c] != FREE:
                continue
            if (
                (c > 0 and belief[r, c - 1] == UNKNOWN)
                or (c + 1 < w and belief[r, c + 1] == UNKNOWN)
                or (r > 0 and belief[r - 1, c] == UNKNOWN)
                or (r + 1 < h and belief[r + 1, c] == UNKNOWN)
            ):
                out.append((c, r))
    if not out:
        return np.empty((0, 2), dtype=np.int32)
    return np.array(out, dtype=np.int32)


def reachable(passable, c0, r0):
    """8-connected flood fill from (c0, r0); diagonal moves may not cut corners."""
    h, w = passable.shape
    mask = np.zeros((h, w), dtype=np.uint8)
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h or not passable[r0, c0]:
        return mask
    mask[r0, c0] = 1
    stack = [(c0, r0)]
    while stack:
        c, r = stack.pop()
        for dc, dr in _N8:
            nc = c + dc
            nr = r + dr
            if nc < 0 or nc >= w or nr < 0 or nr >= h:
                continue
            if mask[nr, nc] or not passable[nr, nc]:
                continue
            if dc != 0 and dr != 0:
                if not passable[r, nc] or not passable[nr, c]:
                    continue
            mask[nr, nc] = 1
            stack.append((nc, nr))
    return mask


def dijkstra_field(passable, c0, r0):
    """Single-source shortest paths over passable cells.

    Costs: straight step 1, diagonal step sqrt(2), tracked as integer step
    count pairs. Returns (ga, gb, parent) int32 (h, w) arrays: step counts
    and the flat index of each cell's predecessor (-1 for the source,
    -2 for unreached cells).
    """
    h, w = passable.shape
    ga = np.full((h, w), -1, dtype=np.int32)
    gb = np.full((h, w), -1, dtype=np.int32)
    parent = np.full((h, w), -2, dtype=np.int32)
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h or not passable[r0, c0]:
        return ga, gb, parent
    gf = np.full((h, w), math.inf, dtype=np.float64)
    done = np.zeros((h, w), dtype=np.uint8)
    ga[r0, c0] = 0
    gb[r0, c0] = 0
    gf[r0, c0] = 0.0
    parent[r0, c0] = -1
    heap = [(0.0, 0, r0 * w + c0)]
    while heap:
        f, b, idx = heapq.heappop(heap)
        r = idx // w
        c = idx - r * w
        if done[r, c]:
            continue
        done[r, c] = 1
        a0 = int(ga[r, c])
        b0 = int(gb[r, c])
        for dc, dr in _N8:
            nc = c + dc
            nr = r + dr
            if nc < 0 or nc >= w or nr < 0 or nr >= h:
                continue
            if done[nr, nc] or not passable[nr, nc]:
                continue
            if dc != 0 and dr != 0:
                if not passable[r, nc] or not passable[nr, c]:
                    continue
                na = a0
                nb = b0 + 1
            else:
                na = a0 + 1
                nb = b0
            nf = na + nb * SQRT2
            of = gf[nr, nc]
            if nf < of or (nf == of and nb < gb[nr, nc]):
                ga[nr, nc] = na
                gb[nr, nc] = nb
                gf[nr, nc] = nf
                parent[nr, nc] = r * w + c
                heapq.heappush(heap, (nf, nb, nr * w + nc))
    return ga, gb, parent


def astar_path(passable, c0, r0, c1, r1):
    """A* shortest path between cells; octile heuristic, integer cost pairs.

    Returns ((n, 2) int32 cells from start to goal, straight_steps,
    diag_steps) or None if the goal is unreachable.
    """
    h, w = passable.shape
    if not passable[r0, c0] or not passable[r1, c1]:
        return None
    if c0 == c1 and r0 == r1:
        return np.array([[c0, r0]], dtype=np.int32), 0, 0
    ga = np.full((h, w), -1, dtype=np.int32)
    gb = np.full((h, w), -1, dtype=np.int32)
    gf = np.full((h, w), math.inf, dtype=np.float64)
    parent = np.full((h, w), -2, dtype=np.int32)
    done = np.zeros((h, w), dtype=np.uint8)
    ga[r0, c0] = 0
    gb[r0, c0] = 0
    gf[r0, c0] = 0.0
    parent[r0, c0] = -1
    h0 = _octile(c0, r0, c1, r1)
    heap = [(h0, 0, r0 * w + c0)]
    while heap:
        f, b, idx = heapq.heappop(heap)
        r = idx // w
        c = idx - r * w
        if done[r, c]:
            continue
        done[r, c] = 1
        if c == c1 and r == r1:
            break
        a0 = int(ga[r, c])
        b0 = int(gb[r, c])
        for dc, dr in _N8:
            nc = c + dc
            nr = r + dr
            if nc < 0 or nc >= w or nr < 0 or nr >= h:
                continue
            if done[nr, nc] or not passable[nr, nc]:
                continue
            if dc != 0 and dr != 0:
                if not passable[r, nc] or not passable[nr, c]:
                    continue
                na = a0
                nb = b0 + 1
            else:
                na = a0 + 1
                nb = b0
            nf = na + nb * SQRT2
            of = gf[nr, nc]
            if nf < of or (nf == of and nb < gb[nr, nc]):
                ga[nr, nc] = na
                gb[nr, nc] = nb
                gf[nr, nc] = nf
                parent[nr, nc] = r * w + c
                nh = _octile(nc, nr, c1, r1)
                heapq.heappush(heap, (nf + nh, nb, nr * w + nc))
    if not done[r1, c1]:
        return None
    cells = []
    idx = r1 * w + c1
    while idx >= 0:
        r = idx // w
        c = idx - r * w
        cells.append((c, r))
        idx = int(parent[r, c])
    cells.reverse()
    return np.array(cells, dtype=np.int32), int(ga[r1, c1]), int(gb[r1, c1])


def _octile(c0, r0, c1, r1):
    dc = abs(c1 - c0)
    dr = abs(r1 - r0)
    if dc > dr:
        return (dc - dr) + dr * SQRT2
    return (dr - dc) + dc * SQRT2
