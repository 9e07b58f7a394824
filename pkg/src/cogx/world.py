"""Static environment model and simulation primitives.

The world is a 2D cell grid (row-major, cell [col, row] spans
[col*cell_size, (col+1)*cell_size) x [row*cell_size, (row+1)*cell_size)).
Walls are occupied cells. "Low" walls block motion and lidar but cameras
see over them, which is what lets detection rays and projection rays
disagree. All serialized points carry z=0.0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from cogx import kernels
from cogx.errors import ParseError, ValidationError

DEFAULT_CELL_SIZE = 0.25
DEFAULT_SUCCESS_RADIUS = 2.0
DEFAULT_SECONDS_PER_STEP = 0.5

# (yaw offset, fov, max range): front, left, right. 100 degree cones leave
# the rear blind, which the reasoners are allowed to exploit.
CAMERA_FOV = math.radians(100.0)
CAMERA_RANGE = 6.0
DEFAULT_CAMERAS = (
    (0.0, CAMERA_FOV, CAMERA_RANGE),
    (math.pi / 2.0, CAMERA_FOV, CAMERA_RANGE),
    (-math.pi / 2.0, CAMERA_FOV, CAMERA_RANGE),
)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass
class Pose:
    x: float
    y: float
    heading: float = 0.0


@dataclass
class Task:
    id: str
    query: str
    target_class: str
    success_radius: float = DEFAULT_SUCCESS_RADIUS
    target_id: str | None = None


@dataclass
class SimClock:
    step: int = 0
    seconds_per_step: float = DEFAULT_SECONDS_PER_STEP

    @property
    def seconds(self) -> float:
        return self.step * self.seconds_per_step

    def tick(self) -> None:
        self.step += 1


@dataclass
class Room:
    label: str
    rect: tuple[int, int, int, int]  # (c0, r0, c1, r1), exclusive upper bounds


@dataclass
class WorldObject:
    id: str
    cls: str
    x: float
    y: float
    room_label: str | None = None


@dataclass
class RayHit:
    hit: bool
    distance: float
    cell: tuple[int, int] | None


@dataclass
class EnvironmentSpec:
    name: str
    cell_size: float
    width: int
    height: int
    blocking: np.ndarray          # uint8 (h, w), walls including low walls
    low: np.ndarray               # uint8 (h, w), cells cameras see over
    rooms: list[Room]
    objects: list[WorldObject]
    start: Pose
    tasks: list[Task]
    # detector sibling confusion shipped with the environment:
    # class -> (confused-as class, probability)
    detector_confusion: dict = field(default_factory=dict)

    camera_blocking: np.ndarray = field(init=False)

    def __post_init__(self):
        self.camera_blocking = np.where(self.low != 0, 0, self.blocking).astype(np.uint8)

    @property
    def area_m2(self) -> float:
        return self.width * self.height * self.cell_size * self.cell_size

    def in_bounds(self, c: int, r: int) -> bool:
        return 0 <= c < self.width and 0 <= r < self.height

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.cell_size)), int(math.floor(y / self.cell_size))

    def cell_center(self, c: int, r: int) -> tuple[float, float]:
        return (c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size

    def is_occupied(self, c: int, r: int) -> bool:
        return bool(self.blocking[r, c])

    def room_label_at(self, x: float, y: float) -> str | None:
        c, r = self.cell_of(x, y)
        for room in self.rooms:
            c0, r0, c1, r1 = room.rect
            if c0 <= c < c1 and r0 <= r < r1:
                return room.label
        return None

    def task_by_id(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise ValidationError(f"unknown task id: {task_id!r}")

    def for_task(self, task: Task) -> "EnvironmentSpec":
        """World as seen during one task: competing instances of the target
        class are removed when the task pins a specific object id."""
        if task.target_id is None:
            return self
        objects = [
            o for o in self.objects
            if o.cls != task.target_class or o.id == task.target_id
        ]
        env = replace(self, objects=objects)
        return env

    def target_object(self, task: Task) -> WorldObject:
        matches = [o for o in self.objects if o.cls == task.target_class]
        if task.target_id is not None:
            matches = [o for o in matches if o.id == task.target_id]
        if len(matches) != 1:
            raise ValidationError(
                f"task {task.id!r}: expected exactly one target instance, found {len(matches)}"
            )
        return matches[0]


def _cells_from_spec(d: dict, pairs_key: str, runs_key: str, width: int, height: int,
                     out: np.ndarray) -> None:
    for c, r in d.get(pairs_key, []):
        if not (0 <= c < width and 0 <= r < height):
            raise ValidationError(f"{pairs_key}: cell ({c}, {r}) out of bounds")
        out[r, c] = 1
    for r, c0, c1 in d.get(runs_key, []):
        if not (0 <= r < height and 0 <= c0 <= c1 <= width):
            raise ValidationError(f"{runs_key}: run ({r}, {c0}, {c1}) out of bounds")
        out[r, c0:c1] = 1


def environment_from_dict(d: dict) -> EnvironmentSpec:
    """Build and validate an EnvironmentSpec from parsed JSON."""
    try:
        name = d["name"]
        cell_size = float(d["cell_size"])
        width = int(d["grid"]["width"])
        height = int(d["grid"]["height"])
        start_d = d["start"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"environment file missing required key: {e}") from e
    if cell_size <= 0 or width <= 0 or height <= 0:
        raise ValidationError("grid: cell_size, width and height must be positive")

    blocking = np.zeros((height, width), dtype=np.uint8)
    low = np.zeros((height, width), dtype=np.uint8)
    _cells_from_spec(d, "walls", "wall_runs", width, height, blocking)
    _cells_from_spec(d, "low_walls", "low_wall_runs", width, height, low)
    blocking |= low

    rooms = []
    for rd in d.get("rooms", []):
        c0, r0, c1, r1 = (int(v) for v in rd["rect"])
        if not (0 <= c0 <= c1 <= width and 0 <= r0 <= r1 <= height):
            raise ValidationError(f"room {rd['label']!r}: rect out of grid bounds")
        rooms.append(Room(label=rd["label"], rect=(c0, r0, c1, r1)))

    objects = []
    seen_ids = set()
    for od in d.get("objects", []):
        obj = WorldObject(
            id=od["id"], cls=od["class"], x=float(od["x"]), y=float(od["y"]),
            room_label=od.get("room"),
        )
        if obj.id in seen_ids:
            raise ValidationError(f"object id {obj.id!r} is duplicated")
        seen_ids.add(obj.id)
        objects.append(obj)

    start = Pose(float(start_d["x"]), float(start_d["y"]), float(start_d.get("heading", 0.0)))
    if not (-math.pi < start.heading <= math.pi):
        raise ValidationError("start: heading must lie in (-pi, pi]")

    tasks = []
    for td in d.get("tasks", []):
        task = Task(
            id=td["id"], query=td["query"], target_class=td["target_class"],
            success_radius=float(td.get("success_radius", DEFAULT_SUCCESS_RADIUS)),
            target_id=td.get("target_id"),
        )
        if task.success_radius <= 0:
            raise ValidationError(f"task {task.id!r}: success_radius must be positive")
        if not task.target_class:
            raise ValidationError(f"task {task.id!r}: target_class must be nonempty")
        tasks.append(task)

    confusion = {}
    for cls, pair in d.get("detector_confusion", {}).items():
        confusion[cls] = (str(pair[0]), float(pair[1]))
        if not (0.0 <= confusion[cls][1] <= 1.0):
            raise ValidationError(f"detector_confusion[{cls!r}]: probability out of [0, 1]")

    env = EnvironmentSpec(
        name=name, cell_size=cell_size, width=width, height=height,
        blocking=blocking, low=low, rooms=rooms, objects=objects,
        start=start, tasks=tasks, detector_confusion=confusion,
    )
    _validate(env)
    return env


def _validate(env: EnvironmentSpec) -> None:
    for obj in env.objects:
        c, r = env.cell_of(obj.x, obj.y)
        if not env.in_bounds(c, r):
            raise ValidationError(f"object {obj.id!r}: position outside the grid")
        if env.is_occupied(c, r):
            raise ValidationError(f"object {obj.id!r}: position lies in an occupied cell")
    c, r = env.cell_of(env.start.x, env.start.y)
    if not env.in_bounds(c, r):
        raise ValidationError("start: position outside the grid")
    if env.is_occupied(c, r):
        raise ValidationError("start: position lies in an occupied cell")
    classes = {o.cls for o in env.objects}
    ids = {o.id: o for o in env.objects}
    for task in env.tasks:
        if task.target_class not in classes:
            raise ValidationError(
                f"task {task.id!r}: target class {task.target_class!r} not among objects"
            )
        if task.target_id is not None:
            obj = ids.get(task.target_id)
            if obj is None or obj.cls != task.target_class:
                raise ValidationError(
                    f"task {task.id!r}: target_id {task.target_id!r} does not name an "
                    f"object of class {task.target_class!r}"
                )
        else:
            n = sum(1 for o in env.objects if o.cls == task.target_class)
            if n != 1:
                raise ValidationError(
                    f"task {task.id!r}: {n} objects of class {task.target_class!r} "
                    "but no target_id to disambiguate"
                )


def load_environment(path) -> EnvironmentSpec:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ParseError(f"cannot read environment file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed environment file {path}: {e}") from e
    return environment_from_dict(data)


def raycast(env: EnvironmentSpec, origin: tuple[float, float], angle: float,
            max_range: float) -> RayHit:
    """Range to the first occupied cell boundary along the ray, if any."""
    c, r = env.cell_of(origin[0], origin[1])
    assert env.in_bounds(c, r) and not env.is_occupied(c, r), "raycast origin must be free"
    hit, dist, hc, hr = kernels.raycast(
        env.blocking, env.cell_size, origin[0], origin[1],
        math.cos(angle), math.sin(angle), max_range,
    )
    return RayHit(bool(hit), dist, (hc, hr) if hit else None)


class Path:
    """Polyline with an arc-length cursor.

    advance() moves the cursor by exactly one speed increment, crossing
    corners by arc length. last_ds/last_crossed describe the most recent
    advance for trajectory accounting.
    """

    def __init__(self, waypoints: list[tuple[float, float]], cost: float | None = None,
                 cost_pair: tuple[int, int] | None = None):
        self.waypoints = [(float(x), float(y)) for x, y in waypoints]
        self.seg_len: list[float] = []
        self.cum: list[float] = [0.0]
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            dx = x1 - x0
            dy = y1 - y0
            L = math.sqrt(dx * dx + dy * dy)
            self.seg_len.append(L)
            self.cum.append(self.cum[-1] + L)
        self.total_length = self.cum[-1]
        # length reported by the planner: arc length unless overridden
        self.length = self.total_length if cost is None else cost
        self.cost_pair = cost_pair
        self.s = 0.0
        self._seg = 0
        self.last_ds = 0.0
        self.last_crossed: list[tuple[float, float]] = []

    @property
    def done(self) -> bool:
        return self.s >= self.total_length

    def point_at(self, s: float) -> tuple[float, float, int]:
        """Position at arc length s plus the segment index it falls on."""
        if not self.seg_len:
            x, y = self.waypoints[0] if self.waypoints else (0.0, 0.0)
            return x, y, 0
        s = min(max(s, 0.0), self.total_length)
        i = self._seg
        while i + 1 < len(self.seg_len) and s > self.cum[i + 1]:
            i += 1
        while i > 0 and s < self.cum[i]:
            i -= 1
        x0, y0 = self.waypoints[i]
        x1, y1 = self.waypoints[i + 1]
        L = self.seg_len[i]
        t = 0.0 if L == 0.0 else (s - self.cum[i]) / L
        return x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, i

    def heading_of_segment(self, i: int) -> float:
        x0, y0 = self.waypoints[i]
        x1, y1 = self.waypoints[i + 1]
        return math.atan2(y1 - y0, x1 - x0)

    def advance(self, speed: float) -> tuple[float, float, float] | None:
        """Move the cursor speed meters; returns (x, y, heading) or None at end."""
        self.last_ds = 0.0
        self.last_crossed = []
        if not self.seg_len or self.done:
            return None
        s0 = self.s
        s1 = min(s0 + speed, self.total_length)
        for j in range(self._seg + 1, len(self.waypoints) - 1):
            if s0 < self.cum[j] <= s1:
                self.last_crossed.append(self.waypoints[j])
        x, y, seg = self.point_at(s1)
        self.s = s1
        self._seg = seg
        self.last_ds = s1 - s0
        # heading follows the segment just traveled when stopping on a corner
        if s1 == self.cum[seg] and seg > 0:
            heading = self.heading_of_segment(seg - 1)
        else:
            heading = self.heading_of_segment(seg)
        return x, y, heading


def advance_along(env: EnvironmentSpec, pose: Pose, path: Path, speed: float,
                  clock: SimClock) -> Pose:
    """Advance exactly speed meters of arc per call; the clock always ticks."""
    clock.tick()
    step = path.advance(speed)
    if step is None:
        return pose
    x, y, heading = step
    return Pose(x, y, heading)


def visible_from(env: EnvironmentSpec, pose: Pose, x: float, y: float,
                 cameras=DEFAULT_CAMERAS) -> bool:
    """True when (x, y) is inside some camera cone with unobstructed sight.

    Camera line of sight ignores low walls.
    """
    dx = x - pose.x
    dy = y - pose.y
    dist = math.sqrt(dx * dx + dy * dy)
    bearing = wrap_angle(math.atan2(dy, dx) - pose.heading)
    in_cone = False
    for yaw, fov, max_range in cameras:
        if dist <= max_range and abs(wrap_angle(bearing - yaw)) <= fov / 2.0:
            in_cone = True
            break
    if not in_cone:
        return False
    c0, r0 = env.cell_of(pose.x, pose.y)
    c1, r1 = env.cell_of(x, y)
    if not env.in_bounds(c1, r1):
        return False
    return bool(kernels.los_clear(env.camera_blocking, c0, r0, c1, r1))


def check_success(env: EnvironmentSpec, pose: Pose, task: Task,
                  detections_history=None, cameras=DEFAULT_CAMERAS) -> bool:
    """Found = physically within the success radius AND observable right now.

    Belief state (detections_history) deliberately plays no part; the
    argument is accepted for interface compatibility.
    """
    obj = env.target_object(task)
    dx = obj.x - pose.x
    dy = obj.y - pose.y
    if math.sqrt(dx * dx + dy * dy) > task.success_radius:
        return False
    return visible_from(env, pose, obj.x, obj.y, cameras)
