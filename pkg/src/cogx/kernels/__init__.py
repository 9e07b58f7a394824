"""Grid kernels with a compiled core and a pure-Python fallback.

The compiled extension (_grid_core, Cython) is preferred; the pure-Python
twin (_grid_py) is selected when the extension is unavailable or when
COGX_PURE_PYTHON=1 is set. Both produce bit-identical results; see
tests/test_kernel_parity.py and benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import os

from cogx.kernels import _grid_py

UNKNOWN = _grid_py.UNKNOWN
FREE = _grid_py.FREE
OCCUPIED = _grid_py.OCCUPIED
SQRT2 = _grid_py.SQRT2

try:
    from cogx.kernels import _grid_core
except ImportError:
    _grid_core = None

if _grid_core is not None and os.environ.get("COGX_PURE_PYTHON", "") != "1":
    _impl = _grid_core
else:
    _impl = _grid_py


def backend_name() -> str:
    return "compiled" if _impl is _grid_core else "pure"


def compiled_available() -> bool:
    return _grid_core is not None


def set_backend(name: str) -> None:
    """Switch kernel backend ("compiled" or "pure"). Mainly for tests."""
    global _impl
    if name == "compiled":
        if _grid_core is None:
            raise RuntimeError("compiled kernel extension is not built")
        _impl = _grid_core
    elif name == "pure":
        _impl = _grid_py
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")


def raycast(block, cell_size, x0, y0, dx, dy, max_range):
    return _impl.raycast(block, cell_size, x0, y0, dx, dy, max_range)


def integrate_scan(belief, block, cell_size, x0, y0, dirs, max_range):
    return _impl.integrate_scan(belief, block, cell_size, x0, y0, dirs, max_range)


def project_ray(belief, cell_size, x0, y0, dx, dy, max_range):
    return _impl.project_ray(belief, cell_size, x0, y0, dx, dy, max_range)


def los_clear(block, c0, r0, c1, r1):
    return _impl.los_clear(block, c0, r0, c1, r1)


def volumetric_gain(belief, c0, r0, radius_cells):
    return _impl.volumetric_gain(belief, c0, r0, radius_cells)


def frontier_cells(belief):
    return _impl.frontier_cells(belief)


def reachable(passable, c0, r0):
    return _impl.reachable(passable, c0, r0)


def dijkstra_field(passable, c0, r0):
    return _impl.dijkstra_field(passable, c0, r0)


def astar_path(passable, c0, r0, c1, r1):
    return _impl.astar_path(passable, c0, r0, c1, r1)
