import os

import numpy as np
import pytest

from cogx.world import environment_from_dict

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURE_DIR, name)


def env_from_text(text, objects=(), start=(1.125, 1.125, 0.0), tasks=(),
                  cell_size=0.25, name="inline", rooms=(), low_chars=("o",),
                  confusion=None):
    """Build an environment from an ASCII map: '#' wall, 'o' low wall,
    '.' free. Row 0 of the string is grid row 0 (y grows downward in the
    string)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    width = len(lines[0])
    height = len(lines)
    walls = []
    low = []
    for r, ln in enumerate(lines):
        assert len(ln) == width, "ragged map"
        for c, ch in enumerate(ln):
            if ch == "#":
                walls.append([c, r])
            elif ch in low_chars:
                low.append([c, r])
    d = {
        "name": name,
        "cell_size": cell_size,
        "grid": {"width": width, "height": height},
        "walls": walls,
        "low_walls": low,
        "rooms": list(rooms),
        "objects": list(objects),
        "start": {"x": start[0], "y": start[1], "heading": start[2]},
        "tasks": list(tasks),
    }
    if confusion:
        d["detector_confusion"] = confusion
    return environment_from_dict(d)


@pytest.fixture
def box_env():
    """10x10 m empty room with perimeter walls."""
    n = 40
    rows = ["#" * n] + ["#" + "." * (n - 2) + "#" for _ in range(n - 2)] + ["#" * n]
    return env_from_text("\n".join(rows), start=(5.125, 5.125, 0.0))


def random_belief_grid(rng, width=30, height=30, cell_size=0.25):
    """Random tri-state belief grid for oracle comparisons."""
    from cogx.mapping import OccupancyGrid
    g = OccupancyGrid(width, height, cell_size)
    g.cells = rng.integers(0, 3, size=(height, width)).astype(np.uint8)
    return g
