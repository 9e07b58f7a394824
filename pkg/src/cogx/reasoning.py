"""Decision layer: reasoner contract, volumetric-gain baseline (VEFEP),
deterministic scripted-semantic reasoner, state compression, and the
bounded memory window.

Both built-in reasoners are pure functions of (context, grid, params):
repeated calls return identical choices. Selection runs one shortest-path
sweep from the robot and scores candidates on top of it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from cogx import kernels
from cogx.errors import NoCandidates
from cogx.explore_graph import (
    KIND_FRONTIER,
    KIND_OBJECT,
    GraphPoint,
    PathField,
)
from cogx.mapping import OccupancyGrid
from cogx.world import Path, Pose, Task

MEMORY_CAPACITY = 10
COMPRESS_MIN_WORDS = 50
COMPRESS_MAX_WORDS = 100
REVISIT_RADIUS = 3.0     # meters: a remembered stop this close counts as a revisit
CUE_RADIUS = 4.0         # meters: object points this close to a candidate are cues
DISCREDIT_VISITS = 2     # visits near a detection before it is treated as false
ROOM_SATIATION_VISITS = 3  # stops inside a room before its prior stops pulling
MIN_TARGET_OBSERVATIONS = 2  # frames before scripted trusts a target detection
SINGLE_OBS_CONFIDENCE = 0.85  # a lone detection this confident is trusted anyway
VEFEP_REACH_TOL = 1.0    # meters: a target point this close counts as reached
MIN_AFFINITY_VG = 15     # unknown cells a viewpoint must reveal to keep its pull
PROBE_RADIUS = 6.0       # meters: how far from an unreached detection probing reaches
PROBE_RECENCY_STEPS = 0  # probe only while the detection keeps re-appearing
GAIN_VERTEX_SPACING = 1.0

_FILLER = (
    "The search continues for the target across unexplored regions of the "
    "environment while the map keeps growing."
).split()


@dataclass
class DecisionContext:
    """Everything one decision round can see."""
    task: Task
    pose: Pose
    sim_seconds: float
    candidate_points: list[GraphPoint]
    object_points: list
    description: str
    memory: "MemoryWindow"
    total_calls: int = 0
    interrupt_note: str = ""
    active_labels: list[str] = field(default_factory=list)
    env: object = None
    last_decision_step: int = -1
    # every realized leg-end position so far (whole episode, not just the
    # memory window): the substrate for "already searched there" reasoning
    visited: list[tuple[float, float]] = field(default_factory=list)

    def candidate_by_id(self, point_id: int) -> GraphPoint:
        for p in self.candidate_points:
            if p.id == point_id:
                return p
        raise KeyError(point_id)


@dataclass
class ReasonerChoice:
    point_id: int
    environment_description: str
    justification: str


@dataclass
class StateRecord:
    call_index: int
    pose: tuple[float, float]
    chosen: tuple[float, float]
    chosen_kind: str
    compressed_text: str
    sim_seconds: float


class MemoryWindow:
    """Bounded record log; eviction is strictly oldest-first."""

    def __init__(self, capacity: int = MEMORY_CAPACITY):
        self.capacity = capacity
        self.records: list[StateRecord] = []

    def push(self, record: StateRecord) -> None:
        self.records.append(record)
        if len(self.records) > self.capacity:
            del self.records[: len(self.records) - self.capacity]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def push_memory(window: MemoryWindow, record: StateRecord) -> MemoryWindow:
    window.push(record)
    return window


@dataclass
class AffinityTable:
    """Deterministic stand-in for LLM world knowledge: how strongly a seen
    object class or a room label suggests each target class."""
    cues: dict = field(default_factory=dict)    # cue class -> {target: score}
    rooms: dict = field(default_factory=dict)   # room label -> {target: score}

    def cue_score(self, cue_cls: str, target: str) -> float:
        return float(self.cues.get(cue_cls, {}).get(target, 0.0))

    def room_score(self, label, target: str) -> float:
        if label is None:
            return 0.0
        return float(self.rooms.get(label, {}).get(target, 0.0))

    def top_labels(self, target: str, k: int = 5) -> list[str]:
        """Detector label list: the target first, then the strongest cues."""
        scored = [
            (cue, score.get(target, 0.0)) for cue, score in self.cues.items()
            if cue != target and score.get(target, 0.0) > 0.0
        ]
        scored.sort(key=lambda cs: (-cs[1], cs[0]))
        return [target] + [cue for cue, _ in scored[: k - 1]]

    @classmethod
    def from_dict(cls, d: dict) -> "AffinityTable":
        return cls(cues=d.get("cues", {}), rooms=d.get("rooms", {}))

    @classmethod
    def load(cls, path) -> "AffinityTable":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def merged_with(self, other: "AffinityTable") -> "AffinityTable":
        cues = {k: dict(v) for k, v in self.cues.items()}
        for k, v in other.cues.items():
            cues.setdefault(k, {}).update(v)
        rooms = {k: dict(v) for k, v in self.rooms.items()}
        for k, v in other.rooms.items():
            rooms.setdefault(k, {}).update(v)
        return AffinityTable(cues=cues, rooms=rooms)


@dataclass
class GainParams:
    lam: float = 0.5          # 1/m decay along the path
    sensor_range: float = 8.0


@dataclass
class ScriptWeights:
    alpha: float = 1.0   # semantic affinity
    beta: float = 0.6    # novelty
    gamma: float = 0.4   # normalized path gain
    delta: float = 0.8   # revisit penalty


def volumetric_gain(grid: OccupancyGrid, vertex: tuple[float, float],
                    sensor_range: float) -> int:
    """Unknown cells within range of the vertex with belief line of sight."""
    c, r = grid.cell_of(vertex[0], vertex[1])
    return int(kernels.volumetric_gain(grid.cells, c, r, sensor_range / grid.cell_size))


def path_gain(grid: OccupancyGrid, waypoints: list[tuple[float, float]],
              lam: float, sensor_range: float, vg_cache: dict | None = None) -> float:
    """Decayed sum of per-vertex volumetric gain along a path.

    Vertices are sampled every GAIN_VERTEX_SPACING meters of arc length,
    endpoint included.
    """
    if not waypoints:
        raise ValueError("path_gain needs a nonempty path")
    path = Path(waypoints)
    ss = [0.0]
    s = GAIN_VERTEX_SPACING
    while s < path.total_length:
        ss.append(s)
        s += GAIN_VERTEX_SPACING
    if path.total_length > 0.0:
        ss.append(path.total_length)
    total = 0.0
    radius_cells = sensor_range / grid.cell_size
    for s in ss:
        x, y, _ = path.point_at(s)
        cell = grid.cell_of(x, y)
        if vg_cache is not None and cell in vg_cache:
            vg = vg_cache[cell]
        else:
            vg = int(kernels.volumetric_gain(grid.cells, cell[0], cell[1], radius_cells))
            if vg_cache is not None:
                vg_cache[cell] = vg
        total += vg * math.exp(-lam * s)
    return total


def _candidate_paths(ctx: DecisionContext, grid: OccupancyGrid,
                     points: list[GraphPoint], field_: PathField):
    """(point, waypoints, cost) for each point reachable via the field."""
    out = []
    for p in points:
        cell = field_.nearest_reached(p.x, p.y)
        if cell is None:
            continue
        out.append((p, field_.waypoints_to(*cell), field_.cost_to(*cell)))
    return out


def vefep_select(ctx: DecisionContext, grid: OccupancyGrid,
                 params: GainParams | None = None) -> ReasonerChoice:
    """Volumetric-gain frontier baseline with a vision shortcut.

    Goes straight to a detected target-class point while detections keep
    refreshing it; once the projection goes stale it veers away and resumes
    chasing decayed path gain over frontier candidates.
    """
    if not ctx.candidate_points:
        raise NoCandidates("decision round offered no candidates")
    params = params or GainParams()
    target = ctx.task.target_class

    # chase a detected target while observations keep refreshing it, unless
    # the robot is already standing on it (then it veers away this round)
    fresh = [
        p for p in ctx.candidate_points
        if p.kind == KIND_OBJECT and p.label == target
        and p.source is not None and p.source.last_obs_step > ctx.last_decision_step
        and math.sqrt((p.x - ctx.pose.x) ** 2 + (p.y - ctx.pose.y) ** 2) > VEFEP_REACH_TOL
    ]
    if fresh:
        best = sorted(fresh, key=lambda p: (-(p.confidence or 0.0), p.id))[0]
        return ReasonerChoice(
            point_id=best.id,
            environment_description=ctx.description,
            justification=(
                f"Detected {target} candidate point {best.id} "
                f"(confidence {best.confidence:.2f}); navigating to it."
            ),
        )

    pool = [p for p in ctx.candidate_points if p.kind == KIND_FRONTIER]
    if not pool:
        pool = ctx.candidate_points
    field_ = PathField(grid, ctx.pose)
    routed = _candidate_paths(ctx, grid, pool, field_)
    if not routed:
        best = min(ctx.candidate_points, key=lambda p: p.id)
        return ReasonerChoice(
            point_id=best.id, environment_description=ctx.description,
            justification=f"No candidate is currently routable; holding at point {best.id}.",
        )
    cache: dict = {}
    scored = []
    for p, waypoints, cost in routed:
        gain = path_gain(grid, waypoints, params.lam, params.sensor_range, cache)
        scored.append((-gain, cost, p.id, gain))
    scored.sort()
    _, cost, pid, gain = scored[0]
    return ReasonerChoice(
        point_id=pid,
        environment_description=ctx.description,
        justification=(
            f"Selected point {pid}: exploration gain {gain:.1f} "
            f"over a {cost:.1f} m path."
        ),
    )


def _near_count(point_xy: tuple[float, float], positions,
                radius: float = REVISIT_RADIUS) -> int:
    hits = 0
    for x, y in positions:
        d = math.sqrt((x - point_xy[0]) ** 2 + (y - point_xy[1]) ** 2)
        if d <= radius:
            hits += 1
    return hits


def _discredited(point_xy: tuple[float, float], ctx: DecisionContext) -> bool:
    """A detection is treated as false once the robot stood within the
    success radius of it DISCREDIT_VISITS times without the episode ending:
    had the target really been there, standing that close would have
    finished the task. Checked against recent memory and against every stop
    of the episode."""
    radius = ctx.task.success_radius
    recent = _near_count(point_xy, (rec.pose for rec in ctx.memory), radius)
    if recent >= DISCREDIT_VISITS:
        return True
    return _near_count(point_xy, ctx.visited, radius) >= DISCREDIT_VISITS


def _revisit_factor(point: GraphPoint, memory: MemoryWindow) -> float:
    m = len(memory)
    if m == 0:
        return 0.0
    worst = 0.0
    for j, rec in enumerate(memory, start=1):
        d = math.sqrt((rec.chosen[0] - point.x) ** 2 + (rec.chosen[1] - point.y) ** 2)
        if d <= REVISIT_RADIUS:
            worst = max(worst, j / m)
    return worst


def scripted_select(ctx: DecisionContext, grid: OccupancyGrid,
                    affinity: AffinityTable,
                    weights: ScriptWeights | None = None,
                    gain_params: GainParams | None = None) -> ReasonerChoice:
    """Deterministic semantic/temporal analog of the language reasoner.

    A detected target is approached until memory shows the area was already
    visited twice without success, after which the detection is treated as
    an error and exploration resumes.
    """
    if not ctx.candidate_points:
        raise NoCandidates("decision round offered no candidates")
    weights = weights or ScriptWeights()
    gain_params = gain_params or GainParams()
    target = ctx.task.target_class

    believed = [
        p for p in ctx.candidate_points
        if p.kind == KIND_OBJECT and p.label == target
        and (p.source is None
             or p.source.observation_count >= MIN_TARGET_OBSERVATIONS
             or p.source.confidence >= SINGLE_OBS_CONFIDENCE)
        and not _discredited((p.x, p.y), ctx)
    ]
    if believed:
        best = sorted(believed, key=lambda p: (-(p.confidence or 0.0), p.id))[0]
        return ReasonerChoice(
            point_id=best.id,
            environment_description=ctx.description,
            justification=(
                f"A detected {target} at point {best.id} "
                f"(confidence {best.confidence:.2f}) is still unverified; going there."
            ),
        )

    # probe rule: a target detection that was approached without success yet
    # is STILL being observed right now usually sits behind an occluder;
    # open up the map closest to it before falling back to plain exploration
    probes = [
        op for op in ctx.object_points
        if op.cls == target
        and op.observation_count >= MIN_TARGET_OBSERVATIONS
        and op.last_obs_step > ctx.last_decision_step - PROBE_RECENCY_STEPS
        and _discredited((op.x, op.y), ctx)
    ]
    if probes:
        probes.sort(key=lambda op: (-op.last_obs_step, op.id))
        frontiers = [p for p in ctx.candidate_points if p.kind == KIND_FRONTIER]
        for op in probes:
            near = sorted(
                (math.sqrt((p.x - op.x) ** 2 + (p.y - op.y) ** 2), p.id, p)
                for p in frontiers
            )
            for dist, _pid, p in near:
                if dist > PROBE_RADIUS:
                    break
                # a frontier the robot already stood at twice will not open
                # up further; stop hammering it
                if _near_count((p.x, p.y), ctx.visited,
                               ctx.task.success_radius) >= DISCREDIT_VISITS:
                    continue
                return ReasonerChoice(
                    point_id=p.id,
                    environment_description=ctx.description,
                    justification=(
                        f"A {target} detection nearby was never reached; "
                        f"probing the unexplored space around it via point {p.id}."
                    ),
                )

    field_ = PathField(grid, ctx.pose)
    routed = _candidate_paths(ctx, grid, ctx.candidate_points, field_)
    if not routed:
        best = min(ctx.candidate_points, key=lambda p: p.id)
        return ReasonerChoice(
            point_id=best.id, environment_description=ctx.description,
            justification=f"No candidate is currently routable; holding at point {best.id}.",
        )

    # cues must be corroborated (single-frame detections are mostly false
    # positives) and satiate once the robot has already inspected them from
    # success-radius range
    cues = [
        op for op in ctx.object_points
        if op.observation_count >= MIN_TARGET_OBSERVATIONS
        and _near_count((op.x, op.y), ctx.visited,
                        ctx.task.success_radius) < DISCREDIT_VISITS
        and not (op.cls == target and _discredited((op.x, op.y), ctx))
    ]
    # room satiation: enough stops inside a room exhaust its prior
    if ctx.env is not None:
        visited_rooms = [ctx.env.room_label_at(x, y) for x, y in ctx.visited]
        room_visits: dict = {}
        for label in visited_rooms:
            room_visits[label] = room_visits.get(label, 0) + 1
    else:
        room_visits = {}

    cache: dict = {}
    gains = {}
    for p, waypoints, _cost in routed:
        gains[p.id] = path_gain(grid, waypoints, gain_params.lam,
                                gain_params.sensor_range, cache)
    gmax = max(gains.values()) if gains else 0.0
    radius_cells = gain_params.sensor_range / grid.cell_size

    best_key = None
    best_p = None
    best_terms = None
    for p, _waypoints, _cost in routed:
        # semantic pull only toward viewpoints that still reveal unseen
        # space; a prior on a fully mapped area has been exhausted
        cell = grid.cell_of(p.x, p.y)
        if cell in cache:
            vg_here = cache[cell]
        else:
            vg_here = int(kernels.volumetric_gain(grid.cells, cell[0], cell[1],
                                                  radius_cells))
            cache[cell] = vg_here
        aff = 0.0
        cue_cls = None
        if vg_here >= MIN_AFFINITY_VG:
            for op in cues:
                d = math.sqrt((op.x - p.x) ** 2 + (op.y - p.y) ** 2)
                if d <= CUE_RADIUS:
                    s = affinity.cue_score(op.cls, target)
                    if op.cls == target:
                        # an undisproved target detection is the strongest
                        # possible cue: probe the unseen space around it
                        s = 1.0
                    if s > aff:
                        aff = s
                        cue_cls = op.cls
            if ctx.env is not None:
                label = ctx.env.room_label_at(p.x, p.y)
                if room_visits.get(label, 0) < ROOM_SATIATION_VISITS:
                    s = affinity.room_score(label, target)
                    if s > aff:
                        aff = s
                        cue_cls = None
        gain_norm = gains[p.id] / gmax if gmax > 0 else 0.0
        revisit = _revisit_factor(p, ctx.memory)
        score = (weights.alpha * aff + weights.beta * (1.0 if p.is_new else 0.0)
                 + weights.gamma * gain_norm - weights.delta * revisit)
        key = (-score, p.id)
        if best_key is None or key < best_key:
            best_key = key
            best_p = p
            best_terms = {
                "affinity": weights.alpha * aff,
                "novelty": weights.beta * (1.0 if p.is_new else 0.0),
                "gain": weights.gamma * gain_norm,
                "cue": cue_cls,
            }
    reason = _dominant_reason(best_terms, target)
    return ReasonerChoice(
        point_id=best_p.id,
        environment_description=ctx.description,
        justification=f"Point {best_p.id} looks best because {reason}.",
    )


def _dominant_reason(terms: dict, target: str) -> str:
    ranked = sorted(
        (("affinity", terms["affinity"]), ("novelty", terms["novelty"]),
         ("gain", terms["gain"])),
        key=lambda kv: -kv[1],
    )
    name, value = ranked[0]
    if value <= 0.0:
        return "no cue stands out and it carries the lowest number"
    if name == "affinity":
        if terms.get("cue"):
            return f"a nearby {terms['cue']} suggests the {target} is likely close"
        return f"its room is a likely place for the {target}"
    if name == "novelty":
        return "it is newly discovered and opens unexplored ground"
    return "it offers the widest view of unmapped space"


def clamp_words(text: str, lo: int = COMPRESS_MIN_WORDS,
                hi: int = COMPRESS_MAX_WORDS) -> str:
    """Force a word count into [lo, hi] by truncation or filler padding."""
    words = text.split()
    if len(words) > hi:
        words = words[:hi]
    i = 0
    while len(words) < lo:
        words.append(_FILLER[i % len(_FILLER)])
        i += 1
    return " ".join(words)


def compress_state(choice: ReasonerChoice, chosen: GraphPoint, pose: Pose,
                   call_index: int, sim_seconds: float = 0.0) -> StateRecord:
    """Fixed-template compression of one decision into a 50-100 word record."""
    text = (
        f"Call {call_index} at {sim_seconds:.0f} seconds: the robot stood at "
        f"({pose.x:.1f}, {pose.y:.1f}) and committed to {chosen.kind} point "
        f"{chosen.id} at ({chosen.x:.1f}, {chosen.y:.1f}). {choice.justification} "
        f"Environment: {choice.environment_description}"
    )
    return StateRecord(
        call_index=call_index,
        pose=(pose.x, pose.y),
        chosen=(chosen.x, chosen.y),
        chosen_kind=chosen.kind,
        compressed_text=clamp_words(text),
        sim_seconds=sim_seconds,
    )


class ScriptedReasoner:
    """Affinity-driven deterministic reasoner."""

    name = "scripted"

    def __init__(self, affinity: AffinityTable,
                 weights: ScriptWeights | None = None,
                 gain_params: GainParams | None = None):
        self.affinity = affinity
        self.weights = weights or ScriptWeights()
        self.gain_params = gain_params or GainParams()

    def active_labels(self, task: Task, description: str) -> list[str]:
        return self.affinity.top_labels(task.target_class)

    def select(self, ctx: DecisionContext, grid: OccupancyGrid) -> ReasonerChoice:
        return scripted_select(ctx, grid, self.affinity, self.weights, self.gain_params)

    def compress(self, ctx: DecisionContext, choice: ReasonerChoice,
                 chosen: GraphPoint, pose: Pose, call_index: int,
                 sim_seconds: float) -> StateRecord:
        return compress_state(choice, chosen, pose, call_index, sim_seconds)


class VefepReasoner:
    """Volumetric-gain frontier baseline; labels shared with scripted."""

    name = "vefep"

    def __init__(self, affinity: AffinityTable, gain_params: GainParams | None = None):
        self.affinity = affinity
        self.gain_params = gain_params or GainParams()

    def active_labels(self, task: Task, description: str) -> list[str]:
        return self.affinity.top_labels(task.target_class)

    def select(self, ctx: DecisionContext, grid: OccupancyGrid) -> ReasonerChoice:
        return vefep_select(ctx, grid, self.gain_params)

    def compress(self, ctx: DecisionContext, choice: ReasonerChoice,
                 chosen: GraphPoint, pose: Pose, call_index: int,
                 sim_seconds: float) -> StateRecord:
        return compress_state(choice, chosen, pose, call_index, sim_seconds)
