"""Regenerate the bundled environment files under src/cogx/data/envs.

Run from the repo root:  python tools/make_envs.py

Layouts are authored in meters on a 0.25 m grid. The script self-checks
connectivity, object placement, and task reachability before writing, and
prints an ASCII rendering of each map.
"""

from __future__ import annotations

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cogx import kernels  # noqa: E402
from cogx.harness import direct_path_length  # noqa: E402
from cogx.world import environment_from_dict  # noqa: E402

CELL = 0.25
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "cogx", "data", "envs")


class Builder:
    def __init__(self, name: str, width: int, height: int):
        self.name = name
        self.width = width
        self.height = height
        self.solid = np.zeros((height, width), dtype=np.uint8)  # full-height walls
        self.low = np.zeros((height, width), dtype=np.uint8)    # see-over obstacles
        self.rooms = []
        self.objects = []
        self.tasks = []
        self.start_d = None
        self.confusion = {}

    # --- geometry in meters -> cells ---------------------------------------
    def _i(self, v: float) -> int:
        return int(round(v / CELL))

    def perimeter(self):
        self.solid[0, :] = 1
        self.solid[-1, :] = 1
        self.solid[:, 0] = 1
        self.solid[:, -1] = 1

    def hwall(self, y: float, x0: float, x1: float, doors=(), low=False):
        r = self._i(y)
        grid = self.low if low else self.solid
        grid[r, self._i(x0):self._i(x1)] = 1
        for d0, d1 in doors:
            grid[r, self._i(d0):self._i(d1)] = 0
            self.solid[r, self._i(d0):self._i(d1)] = 0

    def vwall(self, x: float, y0: float, y1: float, doors=(), low=False):
        c = self._i(x)
        grid = self.low if low else self.solid
        grid[self._i(y0):self._i(y1), c] = 1
        for d0, d1 in doors:
            grid[self._i(d0):self._i(d1), c] = 0
            self.solid[self._i(d0):self._i(d1), c] = 0

    def block(self, x0: float, y0: float, x1: float, y1: float, low=False):
        grid = self.low if low else self.solid
        grid[self._i(y0):self._i(y1), self._i(x0):self._i(x1)] = 1

    def room(self, label: str, x0: float, y0: float, x1: float, y1: float):
        self.rooms.append({"label": label,
                           "rect": [self._i(x0), self._i(y0), self._i(x1), self._i(y1)]})

    def obj(self, oid: str, cls: str, x: float, y: float, room: str | None = None):
        """Add an object, snapped to the nearest free cell that touches an
        obstacle (detection rays should land on a surface right behind it)."""
        blocked = (self.solid | self.low).astype(bool)
        c0, r0 = self._i(x - CELL / 2), self._i(y - CELL / 2)

        def ok(c, r):
            if not (0 <= c < self.width and 0 <= r < self.height) or blocked[r, c]:
                return False
            return any(
                0 <= c + dc < self.width and 0 <= r + dr < self.height
                and blocked[r + dr, c + dc]
                for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1))
            )

        candidates = []
        for rad in range(5):
            for dr in range(-rad, rad + 1):
                for dc in range(-rad, rad + 1):
                    if max(abs(dc), abs(dr)) != rad:
                        continue
                    if ok(c0 + dc, r0 + dr):
                        candidates.append((dc * dc + dr * dr, r0 + dr, c0 + dc))
            if candidates:
                break
        if not candidates:
            raise AssertionError(f"{self.name}: nowhere to place object {oid} near "
                                 f"({x}, {y})")
        _, r, c = min(candidates)
        self.objects.append({
            "id": oid, "class": cls,
            "x": (c + 0.5) * CELL, "y": (r + 0.5) * CELL, "room": room,
        })

    def start(self, x: float, y: float, heading: float = 0.0):
        self.start_d = {"x": x, "y": y, "heading": heading}

    def task(self, tid: str, query: str, target_class: str, target_id=None,
             radius: float = 2.0):
        t = {"id": tid, "query": query, "target_class": target_class,
             "success_radius": radius}
        if target_id:
            t["target_id"] = target_id
        self.tasks.append(t)

    def confuse(self, cls: str, as_cls: str, p: float):
        self.confusion[cls] = [as_cls, p]

    # --- output --------------------------------------------------------------
    def _runs(self, mask: np.ndarray):
        runs = []
        for r in range(self.height):
            c = 0
            while c < self.width:
                if mask[r, c]:
                    c0 = c
                    while c < self.width and mask[r, c]:
                        c += 1
                    runs.append([r, c0, c])
                else:
                    c += 1
        return runs

    def to_dict(self) -> dict:
        solid_only = (self.solid & ~self.low).astype(np.uint8)
        return {
            "name": self.name,
            "cell_size": CELL,
            "grid": {"width": self.width, "height": self.height},
            "wall_runs": self._runs(solid_only),
            "low_wall_runs": self._runs(self.low),
            "rooms": self.rooms,
            "objects": self.objects,
            "start": self.start_d,
            "tasks": self.tasks,
            "detector_confusion": self.confusion,
        }

    def render(self) -> str:
        env = environment_from_dict(self.to_dict())
        chars = np.full((self.height, self.width), ".", dtype="<U1")
        chars[env.blocking.astype(bool)] = "#"
        chars[env.low.astype(bool)] = "o"
        for o in env.objects:
            c, r = env.cell_of(o.x, o.y)
            chars[r, c] = "*"
        c, r = env.cell_of(env.start.x, env.start.y)
        chars[r, c] = "S"
        return "\n".join("".join(row) for row in chars[::-1])

    def check(self) -> None:
        env = environment_from_dict(self.to_dict())
        free = (env.blocking == 0).astype(np.uint8)
        sc, sr = env.cell_of(env.start.x, env.start.y)
        reach = kernels.reachable(free, sc, sr)
        n_free = int(free.sum())
        n_reach = int(reach.sum())
        if n_reach != n_free:
            raise AssertionError(
                f"{self.name}: {n_free - n_reach} free cells unreachable from start"
            )
        for o in env.objects:
            c, r = env.cell_of(o.x, o.y)
            adjacent = any(
                env.in_bounds(c + dc, r + dr) and env.blocking[r + dr, c + dc]
                for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1))
            )
            if not adjacent:
                raise AssertionError(
                    f"{self.name}: object {o.id} not 4-adjacent to any obstacle"
                )
        for t in env.tasks:
            sub = env.for_task(t)
            d = direct_path_length(sub, t)
            if not math.isfinite(d):
                raise AssertionError(f"{self.name}: task {t.id} target unreachable")
            print(f"  {self.name}/{t.id}: direct path {d:.1f} m")
        print(f"  {self.name}: area {env.area_m2:.1f} m2, "
              f"{n_free} free cells, all reachable")


def build_office1() -> Builder:
    # 88 x 104 cells = 22 m x 26 m = 572 m2
    b = Builder("office1", 88, 104)
    b.perimeter()

    # lobby (y 0-8) | storage/office_b/office_c band (y 8.25-15) |
    # corridor (y 15.25-18) | kitchen/office_a band (y 18.25-26)
    b.hwall(8.0, 0, 22, doors=[(9.0, 11.0), (16.0, 17.5)])
    b.hwall(15.0, 0, 22, doors=[(3.0, 4.5), (10.0, 11.5), (18.0, 19.5)])
    b.hwall(18.0, 0, 22, doors=[(4.0, 5.5), (13.0, 14.5)])
    b.vwall(7.0, 8.25, 15.0)
    b.vwall(14.0, 8.25, 15.0)
    b.vwall(8.0, 18.25, 26.0)

    b.room("lobby", 0, 0, 22, 8.0)
    b.room("storage room", 0, 8.0, 7.0, 15.25)
    b.room("office b", 7.25, 8.0, 14.0, 15.25)
    b.room("office c", 14.25, 8.0, 22, 15.25)
    b.room("corridor", 0, 15.25, 22, 18.0)
    b.room("kitchen", 0, 18.0, 8.0, 26)
    b.room("office a", 8.25, 18.0, 22, 26)

    # furniture: desks and sofas are low (cameras see over), shelves are tall
    b.block(1.0, 0.5, 3.0, 1.5, low=True)        # lobby sofa
    b.block(18.0, 20.0, 20.0, 21.0, low=True)    # office_a desk
    b.block(9.0, 10.0, 11.0, 11.0, low=True)     # office_b desk
    b.block(17.0, 10.0, 19.0, 11.0, low=True)    # office_c desk
    b.block(1.0, 9.0, 1.5, 13.0)                 # storage shelving
    b.block(1.0, 24.5, 3.5, 25.5)                # kitchen counter

    b.obj("fe1", "fire extinguisher", 3.125, 7.625, room="lobby")
    b.obj("fe2", "fire extinguisher", 0.625, 22.125, room="kitchen")
    b.obj("fe3", "fire extinguisher", 21.375, 16.625, room="corridor")
    b.obj("sofa1", "sofa", 2.125, 1.875, room="lobby")
    b.obj("desk_a", "desk", 19.125, 19.625, room="office a")
    b.obj("chair_a", "chair", 18.375, 21.375, room="office a")
    b.obj("desk_b", "desk", 10.125, 9.625, room="office b")
    b.obj("chair_b", "chair", 11.375, 10.375, room="office b")
    b.obj("desk_c", "desk", 18.125, 11.375, room="office c")
    b.obj("shelf_s", "shelf", 1.875, 11.125, room="storage room")
    b.obj("sink_k", "sink", 2.125, 24.125, room="kitchen")
    b.obj("plant1", "plant", 0.625, 5.125, room="lobby")

    b.start(11.125, 2.125, math.pi / 2)
    q = "Go find the fire extinguisher"
    b.task("FE1", q, "fire extinguisher", target_id="fe1")
    b.task("FE2", q, "fire extinguisher", target_id="fe2")
    b.task("FE3", q, "fire extinguisher", target_id="fe3")
    return b


def build_office2() -> Builder:
    # 160 x 145 cells = 40 m x 36.25 m = 1450 m2
    b = Builder("office2", 160, 145)
    b.perimeter()

    # entrance hall (y 0-8) | left wing meeting rooms, central cubicle farm |
    # lounge/kitchen/storage along the top
    b.hwall(8.0, 0, 40, doors=[(7.0, 9.0), (26.0, 28.0)])
    b.vwall(14.0, 8.25, 26.0, doors=[(11.0, 12.5), (20.0, 21.5)])
    b.hwall(17.0, 0, 14.0, doors=[(5.0, 6.5)])
    b.hwall(26.0, 0, 40, doors=[(6.0, 8.0), (20.0, 22.0), (33.0, 35.0)])
    b.vwall(16.0, 26.25, 36.25, doors=[(30.0, 31.5)])
    b.vwall(28.0, 26.25, 36.25, doors=[(32.0, 33.5)])

    b.room("entrance hall", 0, 0, 40, 8.0)
    b.room("meeting room a", 0, 8.0, 14.0, 17.0)
    b.room("meeting room b", 0, 17.25, 14.0, 26.0)
    b.room("cubicle area", 14.25, 8.0, 40, 26.0)
    b.room("lounge", 0, 26.0, 16.0, 36.25)
    b.room("kitchen", 16.25, 26.0, 28.0, 36.25)
    b.room("storage room", 28.25, 26.0, 40, 36.25)

    # cubicle farm: low partition walls with aisle openings
    for i, cx in enumerate((20.0, 26.0, 32.0)):
        for j, cy in enumerate((10.0, 16.0, 21.0)):
            # each cubicle: 4 m wide, 3.5 m deep, opening on the south side
            b.hwall(cy + 3.5, cx, cx + 4.0, low=True)
            b.vwall(cx, cy, cy + 3.5, low=True)
            b.vwall(cx + 4.0, cy, cy + 3.5, low=True)
            b.hwall(cy, cx, cx + 4.0, doors=[(cx + 1.25, cx + 2.75)], low=True)

    # furniture
    b.block(3.0, 30.0, 5.0, 31.0, low=True)      # lounge sofa
    b.block(7.0, 30.0, 8.0, 31.0, low=True)      # lounge coffee table slab
    b.block(20.0, 32.0, 23.0, 33.0, low=True)    # kitchen table
    b.block(5.0, 12.0, 8.0, 13.0, low=True)      # meeting_a table
    b.block(5.0, 21.0, 8.0, 22.0, low=True)      # meeting_b table
    b.block(30.0, 28.0, 30.5, 34.0)              # storage shelving
    # desks inside the cubicles (low, see-over)
    b.block(21.0, 12.0, 23.0, 12.75, low=True)
    b.block(27.0, 18.0, 29.0, 18.75, low=True)
    b.block(33.0, 23.0, 35.0, 23.75, low=True)

    b.obj("oc", "office chair", 27.625, 18.875, room="cubicle area")
    b.obj("ct", "coffee table", 7.375, 29.625, room="lounge")
    b.obj("sofa_l", "sofa", 4.125, 29.625, room="lounge")
    b.obj("table_k", "table", 21.375, 31.625, room="kitchen")
    b.obj("table_ma", "table", 6.125, 13.375, room="meeting room a")
    b.obj("table_mb", "table", 6.125, 20.625, room="meeting room b")
    b.obj("chair_ma", "chair", 5.375, 11.625, room="meeting room a")
    b.obj("chair_mb", "chair", 7.875, 22.375, room="meeting room b")
    b.obj("chair_k", "chair", 22.625, 33.375, room="kitchen")
    b.obj("desk_c1", "desk", 21.625, 13.125, room="cubicle area")
    b.obj("desk_c3", "desk", 33.625, 22.625, room="cubicle area")
    b.obj("shelf_st", "shelf", 30.875, 30.125, room="storage room")
    b.obj("plant_e", "plant", 1.375, 0.625, room="entrance hall")
    b.obj("sink_k2", "sink", 27.625, 35.375, room="kitchen")

    b.start(4.125, 2.125, math.pi / 2)
    b.task("OC", "Go to the office chair", "office chair")
    b.task("CT", "Go find the coffee table", "coffee table")
    b.confuse("chair", "office chair", 0.05)
    b.confuse("table", "coffee table", 0.05)
    return b


def build_school() -> Builder:
    # 176 x 117 cells = 44 m x 29.25 m = 1287 m2
    b = Builder("school", 176, 117)
    b.perimeter()

    # hallway spine (y 12-17); classrooms interleaved with semantically dead
    # rooms above, library/gym/cafeteria below
    b.hwall(12.0, 0, 44, doors=[(6.0, 8.0), (20.0, 22.0), (36.0, 38.0)])
    b.hwall(17.0, 0, 44, doors=[(3.5, 5.5), (12.0, 14.0), (20.5, 22.5),
                                (28.5, 30.5), (37.5, 39.5)])
    b.vwall(9.0, 17.25, 29.25)
    b.vwall(17.0, 17.25, 29.25)
    b.vwall(26.0, 17.25, 29.25)
    b.vwall(33.0, 17.25, 29.25)
    b.vwall(14.0, 0, 12.0, doors=[(5.0, 7.0)])
    b.vwall(30.0, 0, 12.0, doors=[(5.0, 7.0)])

    b.room("hallway", 0, 12.0, 44, 17.25)
    b.room("classroom a", 0, 17.25, 9.0, 29.25)
    b.room("music room", 9.25, 17.25, 17.0, 29.25)
    b.room("classroom b", 17.25, 17.25, 26.0, 29.25)
    b.room("supply room", 26.25, 17.25, 33.0, 29.25)
    b.room("classroom c", 33.25, 17.25, 44, 29.25)
    b.room("library", 0, 0, 14.0, 12.0)
    b.room("gym", 14.25, 0, 30.0, 12.0)
    b.room("cafeteria", 30.25, 0, 44, 12.0)

    # library shelving (tall) and classroom desks (low)
    b.block(1.0, 1.0, 7.0, 1.5)
    b.block(1.0, 4.0, 7.0, 4.5)
    b.block(10.0, 1.0, 10.5, 6.0)
    for x0 in (1.0, 18.0, 35.0):
        b.block(x0 + 1.0, 20.0, x0 + 3.0, 20.75, low=True)
        b.block(x0 + 4.5, 23.0, x0 + 6.5, 23.75, low=True)
    b.block(10.5, 26.0, 13.5, 27.0, low=True)    # piano in the music room
    b.block(27.0, 19.0, 27.5, 24.0)              # supply room shelving
    b.block(31.0, 25.0, 31.5, 29.0)
    b.block(34.0, 2.0, 40.0, 3.0, low=True)      # cafeteria tables
    b.block(34.0, 6.0, 40.0, 7.0, low=True)
    b.block(20.0, 4.0, 24.0, 5.0, low=True)      # gym bleacher

    b.obj("we", "whiteboard eraser", 38.375, 28.625, room="classroom c")
    b.obj("wb_a", "whiteboard", 4.125, 28.625, room="classroom a")
    b.obj("wb_b", "whiteboard", 21.375, 28.625, room="classroom b")
    b.obj("wb_c", "whiteboard", 39.625, 28.625, room="classroom c")
    b.obj("bs", "bookshelf", 4.125, 1.875, room="library")
    b.obj("shelf_b", "shelf", 10.875, 4.125, room="library")
    b.obj("shelf_s1", "shelf", 27.875, 21.125, room="supply room")
    b.obj("shelf_s2", "shelf", 30.625, 26.875, room="supply room")
    b.obj("piano_m", "piano", 12.125, 25.625, room="music room")
    b.obj("desk_ca", "desk", 2.625, 19.625, room="classroom a")
    b.obj("desk_cb", "desk", 19.625, 19.625, room="classroom b")
    b.obj("desk_cc", "desk", 36.625, 19.625, room="classroom c")
    b.obj("table_caf", "table", 36.125, 3.375, room="cafeteria")
    b.obj("bench_g", "bench", 21.625, 3.375, room="gym")

    b.start(2.125, 14.625, 0.0)
    b.task("WE", "Go find the whiteboard eraser", "whiteboard eraser")
    b.task("BS", "Go to the bookshelf", "bookshelf")
    b.confuse("whiteboard", "whiteboard eraser", 0.05)
    b.confuse("shelf", "bookshelf", 0.05)
    return b


AFFINITY_DEFAULT = {
    "cues": {
        "whiteboard": {"whiteboard eraser": 0.9},
        "desk": {"whiteboard eraser": 0.5, "office chair": 0.7},
        "chair": {"office chair": 0.5},
        "sofa": {"coffee table": 0.9},
        "table": {"coffee table": 0.45},
        "shelf": {"bookshelf": 0.6},
        "sink": {"fire extinguisher": 0.3},
    },
    "rooms": {},
}

AFFINITY_ENVS = {
    "office1": {
        "cues": {},
        "rooms": {
            "kitchen": {"fire extinguisher": 0.5},
            "corridor": {"fire extinguisher": 0.5},
            "lobby": {"fire extinguisher": 0.4},
            "storage room": {"fire extinguisher": 0.3},
        },
    },
    "office2": {
        "cues": {},
        "rooms": {
            "lounge": {"coffee table": 0.9},
            "cubicle area": {"office chair": 0.85},
            "meeting room a": {"office chair": 0.35, "coffee table": 0.2},
            "meeting room b": {"office chair": 0.35, "coffee table": 0.2},
            "kitchen": {"coffee table": 0.3},
        },
    },
    "school": {
        "cues": {},
        "rooms": {
            "classroom a": {"whiteboard eraser": 0.8},
            "classroom b": {"whiteboard eraser": 0.8},
            "classroom c": {"whiteboard eraser": 0.8},
            "music room": {"whiteboard eraser": 0.1},
            "supply room": {"whiteboard eraser": 0.2, "bookshelf": 0.3},
            "library": {"bookshelf": 0.9, "whiteboard eraser": 0.15},
            "hallway": {"fire extinguisher": 0.5},
        },
    },
}


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for build in (build_office1, build_office2, build_school):
        b = build()
        b.check()
        path = os.path.join(OUT_DIR, f"{b.name}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(b.to_dict(), f, indent=1)
            f.write("\n")
        print(f"wrote {path}")
        if "--render" in sys.argv:
            print(b.render())
    with open(os.path.join(OUT_DIR, "affinity_default.json"), "w") as f:
        json.dump(AFFINITY_DEFAULT, f, indent=1)
        f.write("\n")
    for name, table in AFFINITY_ENVS.items():
        with open(os.path.join(OUT_DIR, f"affinity_{name}.json"), "w") as f:
            json.dump(table, f, indent=1)
            f.write("\n")
    print("wrote affinity tables")


if __name__ == "__main__":
    main()
