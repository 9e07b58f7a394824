# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid kernels.

Twin of _grid_py.py. Every float expression must mirror the pure-Python
reference exactly (same operations, same order); the build disables FMA
contraction for the same reason. Cell states: 0 unknown, 1 free, 2 occupied.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef int UNKNOWN = 0
cdef int FREE = 1
cdef int OCCUPIED = 2

cdef double SQRT2 = sqrt(2.0)
cdef double INF = float("inf")

cdef int[8] _N8_DC = [1, -1, 0, 0, 1, 1, -1, -1]
cdef int[8] _N8_DR = [0, 0, 1, -1, 1, -1, 1, -1]


def raycast(const unsigned char[:, ::1] block, double cell_size,
            double x0, double y0, double dx, double dy, double max_range):
    cdef Py_ssize_t h = block.shape[0]
    cdef Py_ssize_t w = block.shape[1]
    cdef Py_ssize_t c = <Py_ssize_t>floor(x0 / cell_size)
    cdef Py_ssize_t r = <Py_ssize_t>floor(y0 / cell_size)
    cdef int step_c, step_r
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t
    if c < 0 or c >= w or r < 0 or r >= h:
        return False, max_range, -1, -1
    if block[r, c]:
        return True, 0.0, c, r
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
        t_max_x = INF
        t_delta_x = INF
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
        t_max_y = INF
        t_delta_y = INF
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


def integrate_scan(unsigned char[:, ::1] belief, const unsigned char[:, ::1] block,
                   double cell_size, double x0, double y0,
                   const double[:, ::1] dirs, double max_range):
    cdef Py_ssize_t h = belief.shape[0]
    cdef Py_ssize_t w = belief.shape[1]
    cdef Py_ssize_t c0 = <Py_ssize_t>floor(x0 / cell_size)
    cdef Py_ssize_t r0 = <Py_ssize_t>floor(y0 / cell_size)
    cdef Py_ssize_t i, c, r
    cdef int step_c, step_r
    cdef double dx, dy, t_max_x, t_max_y, t_delta_x, t_delta_y, t
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h:
        return
    belief[r0, c0] = FREE
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
            t_max_x = INF
            t_delta_x = INF
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
            t_max_y = INF
            t_delta_y = INF
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


def project_ray(const unsigned char[:, ::1] belief, double cell_size,
                double x0, double y0, double dx, double dy, double max_range):
    cdef Py_ssize_t h = belief.shape[0]
    cdef Py_ssize_t w = belief.shape[1]
    cdef Py_ssize_t c = <Py_ssize_t>floor(x0 / cell_size)
    cdef Py_ssize_t r = <Py_ssize_t>floor(y0 / cell_size)
    cdef double u_t = -1.0
    cdef Py_ssize_t u_c = -1
    cdef Py_ssize_t u_r = -1
    cdef int step_c, step_r, v
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t
    if c < 0 or c >= w or r < 0 or r >= h:
        return 0, max_range, -1, -1
    v = belief[r, c]
    if v == OCCUPIED:
        return 1, 0.0, c, r
    if v == UNKNOWN:
        u_t = 0.0
        u_c = c
        u_r = r
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
        t_max_x = INF
        t_delta_x = INF
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
        t_max_y = INF
        t_delta_y = INF
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


cdef inline bint _los(const unsigned char[:, ::1] block, Py_ssize_t c0, Py_ssize_t r0,
                      Py_ssize_t c1, Py_ssize_t r1, int blocking_state) nogil:
    # blocking_state < 0: any nonzero cell blocks; else cells equal to it block.
    cdef Py_ssize_t dc = c1 - c0
    cdef Py_ssize_t dr = r1 - r0
    cdef Py_ssize_t sc = 1 if c1 > c0 else -1
    cdef Py_ssize_t sr = 1 if r1 > r0 else -1
    cdef Py_ssize_t err, e2, c, r
    if dc < 0:
        dc = -dc
    if dr < 0:
        dr = -dr
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
        if blocking_state < 0:
            if block[r, c]:
                return False
        elif block[r, c] == blocking_state:
            return False


def los_clear(const unsigned char[:, ::1] block, int c0, int r0, int c1, int r1):
    return bool(_los(block, c0, r0, c1, r1, -1))


def volumetric_gain(const unsigned char[:, ::1] belief, int c0, int r0, double radius_cells):
    cdef Py_ssize_t h = belief.shape[0]
    cdef Py_ssize_t w = belief.shape[1]
    cdef Py_ssize_t rad = <Py_ssize_t>floor(radius_cells)
    cdef double r2 = radius_cells * radius_cells
    cdef Py_ssize_t count = 0
    cdef Py_ssize_t r_lo = r0 - rad
    cdef Py_ssize_t r_hi = r0 + rad
    cdef Py_ssize_t c_lo = c0 - rad
    cdef Py_ssize_t c_hi = c0 + rad
    cdef Py_ssize_t r, c, dc, dr
    if r_lo < 0:
        r_lo = 0
    if c_lo < 0:
        c_lo = 0
    if r_hi > h - 1:
        r_hi = h - 1
    if c_hi > w - 1:
        c_hi = w - 1
    with nogil:
        for r in range(r_lo, r_hi + 1):
            dr = r - r0
            for c in range(c_lo, c_hi + 1):
                if belief[r, c] != UNKNOWN:
                    continue
                dc = c - c0
                if dc * dc + dr * dr > r2:
                    continue
                if _los(belief, c0, r0, c, r, OCCUPIED):
                    count += 1
    return count


def frontier_cells(const unsigned char[:, ::1] belief):
    cdef Py_ssize_t h = belief.shape[0]
    cdef Py_ssize_t w = belief.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] buf = np.empty((h * w, 2), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] bv = buf
    cdef Py_ssize_t n = 0
    cdef Py_ssize_t r, c
    for r in range(h):
        for c in range(w):
            if belief[r, c] != FREE:
                continue
            if ((c > 0 and belief[r, c - 1] == UNKNOWN)
                    or (c + 1 < w and belief[r, c + 1] == UNKNOWN)
                    or (r > 0 and belief[r - 1, c] == UNKNOWN)
                    or (r + 1 < h and belief[r + 1, c] == UNKNOWN)):
                bv[n, 0] = <cnp.int32_t>c
                bv[n, 1] = <cnp.int32_t>r
                n += 1
    return buf[:n].copy()


def reachable(const unsigned char[:, ::1] passable, int c0, int r0):
    cdef Py_ssize_t h = passable.shape[0]
    cdef Py_ssize_t w = passable.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mask = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] mv = mask
    cdef Py_ssize_t* stack
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t idx, c, r, nc, nr
    cdef int k, dc, dr
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h or not passable[r0, c0]:
        return mask
    stack = <Py_ssize_t*>malloc(h * w * sizeof(Py_ssize_t))
    if stack == NULL:
        raise MemoryError()
    mv[r0, c0] = 1
    stack[top] = r0 * w + c0
    top += 1
    while top > 0:
        top -= 1
        idx = stack[top]
        r = idx // w
        c = idx - r * w
        for k in range(8):
            dc = _N8_DC[k]
            dr = _N8_DR[k]
            nc = c + dc
            nr = r + dr
            if nc < 0 or nc >= w or nr < 0 or nr >= h:
                continue
            if mv[nr, nc] or not passable[nr, nc]:
                continue
            if dc != 0 and dr != 0:
                if not passable[r, nc] or not passable[nr, c]:
                    continue
            mv[nr, nc] = 1
            stack[top] = nr * w + nc
            top += 1
    free(stack)
    return mask


cdef struct Heap:
    double* f
    cnp.int32_t* b
    cnp.int32_t* idx
    Py_ssize_t n
    Py_ssize_t cap


cdef inline bint _heap_less(Heap* hp, Py_ssize_t i, Py_ssize_t j) nogil:
    if hp.f[i] != hp.f[j]:
        return hp.f[i] < hp.f[j]
    if hp.b[i] != hp.b[j]:
        return hp.b[i] < hp.b[j]
    return hp.idx[i] < hp.idx[j]


cdef inline void _heap_swap(Heap* hp, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef double tf = hp.f[i]
    cdef cnp.int32_t tb = hp.b[i]
    cdef cnp.int32_t ti = hp.idx[i]
    hp.f[i] = hp.f[j]
    hp.b[i] = hp.b[j]
    hp.idx[i] = hp.idx[j]
    hp.f[j] = tf
    hp.b[j] = tb
    hp.idx[j] = ti


cdef int _heap_push(Heap* hp, double f, cnp.int32_t b, cnp.int32_t idx) nogil:
    cdef Py_ssize_t i, p
    cdef double* nf
    cdef cnp.int32_t* nb
    cdef cnp.int32_t* ni
    if hp.n == hp.cap:
        hp.cap *= 2
        nf = <double*>malloc(hp.cap * sizeof(double))
        nb = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
        ni = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
        if nf == NULL or nb == NULL or ni == NULL:
            return -1
        for i in range(hp.n):
            nf[i] = hp.f[i]
            nb[i] = hp.b[i]
            ni[i] = hp.idx[i]
        free(hp.f)
        free(hp.b)
        free(hp.idx)
        hp.f = nf
        hp.b = nb
        hp.idx = ni
    i = hp.n
    hp.f[i] = f
    hp.b[i] = b
    hp.idx[i] = idx
    hp.n += 1
    while i > 0:
        p = (i - 1) // 2
        if _heap_less(hp, i, p):
            _heap_swap(hp, i, p)
            i = p
        else:
            break
    return 0


cdef void _heap_pop(Heap* hp) nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t l, rr, m
    hp.n -= 1
    if hp.n == 0:
        return
    _heap_swap(hp, 0, hp.n)
    while True:
        l = 2 * i + 1
        rr = l + 1
        m = i
        if l < hp.n and _heap_less(hp, l, m):
            m = l
        if rr < hp.n and _heap_less(hp, rr, m):
            m = rr
        if m == i:
            break
        _heap_swap(hp, i, m)
        i = m


def dijkstra_field(const unsigned char[:, ::1] passable, int c0, int r0):
    cdef Py_ssize_t h = passable.shape[0]
    cdef Py_ssize_t w = passable.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] ga = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] gb = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] parent = np.full((h, w), -2, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] gav = ga
    cdef cnp.int32_t[:, ::1] gbv = gb
    cdef cnp.int32_t[:, ::1] pv = parent
    if c0 < 0 or c0 >= w or r0 < 0 or r0 >= h or not passable[r0, c0]:
        return ga, gb, parent
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gf = np.full((h, w), INF, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] gfv = gf
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] done = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] dv = done
    cdef Heap hp
    cdef Py_ssize_t c, r, nc, nr, idx
    cdef int k, dc, dr
    cdef cnp.int32_t a0, b0, na, nb
    cdef double nf, of
    cdef int fail = 0
    hp.cap = 1024
    hp.n = 0
    hp.f = <double*>malloc(hp.cap * sizeof(double))
    hp.b = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
    hp.idx = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
    if hp.f == NULL or hp.b == NULL or hp.idx == NULL:
        raise MemoryError()
    gav[r0, c0] = 0
    gbv[r0, c0] = 0
    gfv[r0, c0] = 0.0
    pv[r0, c0] = -1
    with nogil:
        _heap_push(&hp, 0.0, 0, <cnp.int32_t>(r0 * w + c0))
        while hp.n > 0:
            idx = hp.idx[0]
            _heap_pop(&hp)
            r = idx // w
            c = idx - r * w
            if dv[r, c]:
                continue
            dv[r, c] = 1
            a0 = gav[r, c]
            b0 = gbv[r, c]
            for k in range(8):
                dc = _N8_DC[k]
                dr = _N8_DR[k]
                nc = c + dc
                nr = r + dr
                if nc < 0 or nc >= w or nr < 0 or nr >= h:
                    continue
                if dv[nr, nc] or not passable[nr, nc]:
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
                of = gfv[nr, nc]
                if nf < of or (nf == of and nb < gbv[nr, nc]):
                    gav[nr, nc] = na
                    gbv[nr, nc] = nb
                    gfv[nr, nc] = nf
                    pv[nr, nc] = <cnp.int32_t>(r * w + c)
                    if _heap_push(&hp, nf, nb, <cnp.int32_t>(nr * w + nc)) < 0:
                        fail = 1
                        break
            if fail:
                break
    free(hp.f)
    free(hp.b)
    free(hp.idx)
    if fail:
        raise MemoryError()
    return ga, gb, parent


def astar_path(const unsigned char[:, ::1] passable, int c0, int r0, int c1, int r1):
    cdef Py_ssize_t h = passable.shape[0]
    cdef Py_ssize_t w = passable.shape[1]
    if not passable[r0, c0] or not passable[r1, c1]:
        return None
    if c0 == c1 and r0 == r1:
        return np.array([[c0, r0]], dtype=np.int32), 0, 0
    cdef cnp.ndarray[cnp.int32_t, ndim=2] ga = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] gb = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] parent = np.full((h, w), -2, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gf = np.full((h, w), INF, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] done = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.int32_t[:, ::1] gav = ga
    cdef cnp.int32_t[:, ::1] gbv = gb
    cdef cnp.int32_t[:, ::1] pv = parent
    cdef cnp.float64_t[:, ::1] gfv = gf
    cdef cnp.uint8_t[:, ::1] dv = done
    cdef Heap hp
    cdef Py_ssize_t c, r, nc, nr, idx
    cdef int k, dc, dr
    cdef cnp.int32_t a0, b0, na, nb
    cdef double nf, of, nh, h0
    cdef int fail = 0
    hp.cap = 1024
    hp.n = 0
    hp.f = <double*>malloc(hp.cap * sizeof(double))
    hp.b = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
    hp.idx = <cnp.int32_t*>malloc(hp.cap * sizeof(cnp.int32_t))
    if hp.f == NULL or hp.b == NULL or hp.idx == NULL:
        raise MemoryError()
    gav[r0, c0] = 0
    gbv[r0, c0] = 0
    gfv[r0, c0] = 0.0
    pv[r0, c0] = -1
    h0 = _octile(c0, r0, c1, r1)
    with nogil:
        _heap_push(&hp, h0, 0, <cnp.int32_t>(r0 * w + c0))
        while hp.n > 0:
            idx = hp.idx[0]
            _heap_pop(&hp)
            r = idx // w
            c = idx - r * w
            if dv[r, c]:
                continue
            dv[r, c] = 1
            if c == c1 and r == r1:
                break
            a0 = gav[r, c]
            b0 = gbv[r, c]
            for k in range(8):
                dc = _N8_DC[k]
                dr = _N8_DR[k]
                nc = c + dc
                nr = r + dr
                if nc < 0 or nc >= w or nr < 0 or nr >= h:
                    continue
                if dv[nr, nc] or not passable[nr, nc]:
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
                of = gfv[nr, nc]
                if nf < of or (nf == of and nb < gbv[nr, nc]):
                    gav[nr, nc] = na
                    gbv[nr, nc] = nb
                    gfv[nr, nc] = nf
                    pv[nr, nc] = <cnp.int32_t>(r * w + c)
                    nh = _octile(nc, nr, c1, r1)
                    if _heap_push(&hp, nf + nh, nb, <cnp.int32_t>(nr * w + nc)) < 0:
                        fail = 1
                        break
            if fail:
                break
    free(hp.f)
    free(hp.b)
    free(hp.idx)
    if fail:
        raise MemoryError()
    if not done[r1, c1]:
        return None
    cells = []
    cdef Py_ssize_t cur = r1 * w + c1
    while cur >= 0:
        r = cur // w
        c = cur - r * w
        cells.append((c, r))
        cur = pv[r, c]
    cells.reverse()
    return np.array(cells, dtype=np.int32), int(ga[r1, c1]), int(gb[r1, c1])


cdef inline double _octile(Py_ssize_t c0, Py_ssize_t r0, Py_ssize_t c1, Py_ssize_t r1) nogil:
    cdef Py_ssize_t dc = c1 - c0
    cdef Py_ssize_t dr = r1 - r0
    if dc < 0:
        dc = -dc
    if dr < 0:
        dr = -dr
    if dc > dr:
        return (dc - dr) + dr * SQRT2
    return (dr - dc) + dc * SQRT2
