"""Synthetic open-vocabulary detection, raycast projection, and fusion.

Detection tests visibility against ground truth (cameras see over low
walls); projection rays are cast against the *belief* grid. A mapped
obstacle between the robot and the object therefore yields a fused point
that falls short of the true object, on the occluder.

RNG draw order per frame is fixed: for every candidate object in
environment order (accept, confusion, confidence, bearing jitter), then the
false-positive count and per-false-positive draws. Changing noise
parameters never changes the number of draws, only their use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from cogx import kernels
from cogx.errors import NoSurface
from cogx.mapping import OccupancyGrid
from cogx.world import (
    CAMERA_FOV,
    CAMERA_RANGE,
    EnvironmentSpec,
    Pose,
    wrap_angle,
)

CLUSTER_RADIUS = 1.5   # meters: association gate for fusion
FUSE_WINDOW = 15       # observations kept per object point


@dataclass
class Camera:
    name: str
    yaw: float
    fov: float
    max_range: float


@dataclass
class CameraRig:
    cameras: list[Camera] = field(default_factory=lambda: [
        Camera("FRONT", 0.0, CAMERA_FOV, CAMERA_RANGE),
        Camera("LEFT", math.pi / 2.0, CAMERA_FOV, CAMERA_RANGE),
        Camera("RIGHT", -math.pi / 2.0, CAMERA_FOV, CAMERA_RANGE),
    ])

    def as_tuples(self):
        return tuple((c.yaw, c.fov, c.max_range) for c in self.cameras)


@dataclass
class NoiseModel:
    p0: float = 0.9
    false_positive_rate: float = 0.05  # expected spurious detections per frame
    bearing_sigma: float = math.radians(2.0)
    confusion: dict = field(default_factory=dict)  # class -> (class, prob)
    conf_true: tuple[float, float] = (0.55, 0.95)
    conf_false: tuple[float, float] = (0.3, 0.7)
    range_falloff: bool = True  # detection probability decays with distance

    def detect_prob(self, distance: float, max_range: float) -> float:
        if not self.range_falloff:
            return self.p0 if distance <= max_range else 0.0
        frac = 1.0 - distance / max_range
        if frac < 0.0:
            frac = 0.0
        elif frac > 1.0:
            frac = 1.0
        return self.p0 * frac

    @classmethod
    def disabled(cls) -> "NoiseModel":
        """Perfect detector: always fires in range, no noise of any kind."""
        return cls(p0=1.0, false_positive_rate=0.0, bearing_sigma=0.0,
                   confusion={}, conf_true=(0.9, 0.9), conf_false=(0.5, 0.5),
                   range_falloff=False)


@dataclass
class Detection:
    cls: str
    confidence: float
    bearing: float  # robot frame, radians
    frame_step: int


@dataclass
class ObjectPoint:
    """Fused semantic landmark with its recent observation window."""
    id: int
    x: float
    y: float
    cls: str
    confidence: float
    z: float = 0.0
    observation_count: int = 1
    last_obs_step: int = 0
    observations: list = field(default_factory=list, repr=False, compare=False)


def sense_objects(env: EnvironmentSpec, pose: Pose, rig: CameraRig,
                  noise: NoiseModel, active_labels: list[str], rng,
                  step: int = 0) -> list[Detection]:
    """One detector frame: true objects with noise, then false positives."""
    assert active_labels, "active_labels must be nonempty"
    detections = []
    pc, pr = env.cell_of(pose.x, pose.y)
    for obj in env.objects:
        if obj.cls not in active_labels:
            continue
        dx = obj.x - pose.x
        dy = obj.y - pose.y
        dist = math.sqrt(dx * dx + dy * dy)
        bearing = wrap_angle(math.atan2(dy, dx) - pose.heading)
        cam = None
        for candidate in rig.cameras:
            if dist <= candidate.max_range and \
                    abs(wrap_angle(bearing - candidate.yaw)) <= candidate.fov / 2.0:
                cam = candidate
                break
        if cam is None:
            continue
        oc, orr = env.cell_of(obj.x, obj.y)
        if not kernels.los_clear(env.camera_blocking, pc, pr, oc, orr):
            continue
        u = rng.random()
        v = rng.random()
        conf = rng.uniform(noise.conf_true[0], noise.conf_true[1])
        jitter = rng.normal(0.0, 1.0) * noise.bearing_sigma
        if u >= noise.detect_prob(dist, cam.max_range):
            continue
        cls = obj.cls
        row = noise.confusion.get(cls)
        if row is not None and v < row[1]:
            cls = row[0]
        detections.append(Detection(
            cls=cls, confidence=float(conf),
            bearing=wrap_angle(bearing + jitter), frame_step=step,
        ))
    n_fp = int(rng.poisson(noise.false_positive_rate)) if noise.false_positive_rate > 0 else 0
    for _ in range(n_fp):
        cam = rig.cameras[int(rng.integers(0, len(rig.cameras)))]
        off = rng.uniform(-cam.fov / 2.0, cam.fov / 2.0)
        cls = active_labels[int(rng.integers(0, len(active_labels)))]
        conf = rng.uniform(noise.conf_false[0], noise.conf_false[1])
        detections.append(Detection(
            cls=cls, confidence=float(conf),
            bearing=wrap_angle(cam.yaw + off), frame_step=step,
        ))
    return detections


def project_detection(grid: OccupancyGrid, env: EnvironmentSpec, pose: Pose,
                      det: Detection, max_range: float = CAMERA_RANGE) -> tuple[float, float]:
    """Cast the detection ray against the belief grid.

    First OCCUPIED cell wins; if none within range, the first UNKNOWN cell
    is used. A ray through fully known free space raises NoSurface.
    """
    angle = pose.heading + det.bearing
    dx = math.cos(angle)
    dy = math.sin(angle)
    kind, t, c, r = kernels.project_ray(
        grid.cells, grid.cell_size, pose.x, pose.y, dx, dy, max_range
    )
    if kind == 0:
        raise NoSurface(f"detection ray for {det.cls!r} found no surface in range")
    return (pose.x + dx * t, pose.y + dy * t)


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    pairs = sorted(zip(values, weights), key=lambda p: p[0])
    total = 0.0
    for _, w in pairs:
        total += w
    half = total * 0.5
    cum = 0.0
    for v, w in pairs:
        cum += w
        if cum >= half:
            return v
    return pairs[-1][0]


def fuse_object_points(store: list[ObjectPoint], candidate: tuple[float, float],
                       cls: str, confidence: float, step: int = 0,
                       cluster_radius: float = CLUSTER_RADIUS,
                       window: int = FUSE_WINDOW) -> ObjectPoint:
    """Associate a projected detection into the store (mutated in place).

    Position is the per-coordinate weighted median of the last `window`
    observations, weighted by confidence; fused confidence is the maximum
    ever observed.
    """
    assert 0.0 < confidence <= 1.0
    x, y = candidate
    best = None
    best_d = None
    for p in store:
        if p.cls != cls:
            continue
        d = math.sqrt((p.x - x) ** 2 + (p.y - y) ** 2)
        if d <= cluster_radius and (best_d is None or d < best_d):
            best = p
            best_d = d
    if best is None:
        point = ObjectPoint(
            id=len(store) + 1, x=x, y=y, cls=cls, confidence=confidence,
            observation_count=1, last_obs_step=step,
            observations=[(x, y, confidence)],
        )
        store.append(point)
        return point
    best.observations.append((x, y, confidence))
    if len(best.observations) > window:
        del best.observations[: len(best.observations) - window]
    xs = [o[0] for o in best.observations]
    ys = [o[1] for o in best.observations]
    ws = [o[2] for o in best.observations]
    best.x = weighted_median(xs, ws)
    best.y = weighted_median(ys, ws)
    if confidence > best.confidence:
        best.confidence = confidence
    best.observation_count += 1
    best.last_obs_step = step
    return best
