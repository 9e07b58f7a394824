"""Episode loop, multi-trial runner, statistics, and artifact emission.

An episode is fully determined by its config: one RNG per episode, split
into named streams (sampling, noise, sparsify) so extra draws in one
subsystem never perturb the others. Trials run with seed = base_seed + i
and results are emitted in seed order regardless of execution order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from cogx import kernels
from cogx.errors import IoError, NoCandidates, NoSurface, Unreachable, ValidationError
from cogx.explore_graph import (
    DEFAULT_MIN_CLUSTER,
    DEFAULT_NEW_THRESHOLD,
    DEFAULT_SAMPLES,
    KIND_OBJECT,
    GraphPoint,
    SparsifyParams,
    label_new,
    gaussian_sparsify,
    plan_path,
    renumber,
    sample_graph_points,
)
from cogx.llm_bridge import HttpBackend, LLMReasoner, MockBackend, generate_descriptions
from cogx.mapping import LidarModel, OccupancyGrid, integrate_scan
from cogx.perception import (
    CameraRig,
    NoiseModel,
    fuse_object_points,
    project_detection,
    sense_objects,
)
from cogx.reasoning import (
    MEMORY_CAPACITY,
    AffinityTable,
    DecisionContext,
    GainParams,
    MemoryWindow,
    ScriptWeights,
    ScriptedReasoner,
    VefepReasoner,
    push_memory,
)
from cogx.world import (
    EnvironmentSpec,
    Path,
    Pose,
    SimClock,
    Task,
    advance_along,
    check_success,
    load_environment,
)

DEFAULT_MAX_STEPS = 5400      # 45 simulated minutes at 0.5 s/step
DEFAULT_REPLAN_INTERVAL = 40  # steps before a stuck leg forces a new decision
DEFAULT_SPEED = 0.5           # meters per step
DEFAULT_TRIALS = 15
DWELL_STEPS = 4               # sensing frames spent pausing at each waypoint
RESULT_SCHEMA = 1

BUNDLED_ENVS = ("office1", "office2", "school")

INTERRUPT_STUCK = (
    "Navigation was interrupted: the robot did not reach the last waypoint "
    "within its replanning budget and stopped early."
)
INTERRUPT_UNREACHABLE = (
    "The last chosen waypoint was unreachable; choose a different area."
)


def bundled_env_path(name: str):
    return resources.files("cogx").joinpath(f"data/envs/{name}.json")


def resolve_env_path(spec: str):
    """Accept a filesystem path or the name of a bundled environment."""
    if os.path.exists(spec):
        return spec
    if spec in BUNDLED_ENVS:
        return str(bundled_env_path(spec))
    return spec


def load_affinity(env_name: str) -> AffinityTable:
    base = AffinityTable.from_dict(json.loads(
        resources.files("cogx").joinpath("data/envs/affinity_default.json")
        .read_text(encoding="utf-8")
    ))
    specific = resources.files("cogx").joinpath(f"data/envs/affinity_{env_name}.json")
    if specific.is_file():
        base = base.merged_with(AffinityTable.from_dict(
            json.loads(specific.read_text(encoding="utf-8"))
        ))
    return base


@dataclass
class EpisodeConfig:
    env_path: str
    task_id: str
    reasoner: str = "scripted"    # scripted | vefep | llm
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    replan_interval: int = DEFAULT_REPLAN_INTERVAL
    speed: float = DEFAULT_SPEED
    seconds_per_step: float = 0.5
    samples: int = DEFAULT_SAMPLES
    new_threshold: float = DEFAULT_NEW_THRESHOLD
    min_cluster_size: int = DEFAULT_MIN_CLUSTER
    memory_capacity: int = MEMORY_CAPACITY
    sparsify: SparsifyParams = field(default_factory=SparsifyParams)
    noise: NoiseModel | None = None   # None: defaults + the env's confusion map
    weights: ScriptWeights = field(default_factory=ScriptWeights)
    gain: GainParams = field(default_factory=GainParams)
    lidar: LidarModel = field(default_factory=LidarModel)
    addendum: str = "a"
    live: bool = False
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_api_key: str = ""
    trace: bool = False


@dataclass
class EpisodeResult:
    env: str
    task: str
    reasoner: str
    seed: int
    success: bool
    timeout: bool
    steps: int
    decision_count: int
    path_length: float
    direct_path: float
    trajectory: list
    decisions: list
    schema: int = RESULT_SCHEMA

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeResult":
        return cls(**d)

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "EpisodeResult":
        d = json.loads(line)
        d["trajectory"] = [list(p) for p in d["trajectory"]]
        return cls.from_dict(d)


@dataclass
class TrialSummary:
    n: int
    successes: int
    timeouts: int
    success_rate: float
    mean_path: float | None
    median_path: float | None
    q1_path: float | None
    q3_path: float | None


def episode_rngs(seed: int):
    """Named substreams: (sampling, noise, sparsify)."""
    return tuple(np.random.default_rng([seed, k]) for k in range(3))


def enforce_labels(labels: list[str], target: str) -> list[str]:
    out = [target]
    for lab in labels:
        if lab and lab != target and lab not in out:
            out.append(lab)
    return out[:5]


def direct_path_length(env: EnvironmentSpec, task: Task) -> float:
    """Shortest grid path from start to the closest pose that could count as
    success (within radius of the target with camera line of sight),
    measured on the uninflated ground-truth grid."""
    passable = (env.blocking == 0).astype(np.uint8)
    sc, sr = env.cell_of(env.start.x, env.start.y)
    ga, gb, _ = kernels.dijkstra_field(passable, sc, sr)
    obj = env.target_object(task)
    oc, orr = env.cell_of(obj.x, obj.y)
    pad = env.cell_size * math.sqrt(2.0) / 2.0
    radius = task.success_radius + pad
    rad_cells = int(math.ceil(radius / env.cell_size)) + 1
    best = math.inf
    for r in range(max(0, orr - rad_cells), min(env.height, orr + rad_cells + 1)):
        for c in range(max(0, oc - rad_cells), min(env.width, oc + rad_cells + 1)):
            if ga[r, c] < 0:
                continue
            x, y = env.cell_center(c, r)
            if math.sqrt((x - obj.x) ** 2 + (y - obj.y) ** 2) > radius:
                continue
            if not kernels.los_clear(env.camera_blocking, c, r, oc, orr):
                continue
            cost = (int(ga[r, c]) + int(gb[r, c]) * kernels.SQRT2) * env.cell_size
            if cost < best:
                best = cost
    return best


def build_reasoner(config: EpisodeConfig, env: EnvironmentSpec, task: Task):
    affinity = load_affinity(env.name)
    if config.reasoner == "scripted":
        return ScriptedReasoner(affinity, config.weights, config.gain)
    if config.reasoner == "vefep":
        return VefepReasoner(affinity, config.gain)
    if config.reasoner == "llm":
        if config.live:
            endpoint = config.llm_endpoint or os.environ.get("COGX_LLM_BASE_URL", "")
            api_key = config.llm_api_key or os.environ.get("COGX_LLM_API_KEY", "")
            if not endpoint:
                raise ValidationError("live LLM runs need an endpoint "
                                      "(--endpoint or COGX_LLM_BASE_URL)")
            backend = HttpBackend(endpoint, config.llm_model or "gpt-3.5-turbo-0125",
                                  api_key or None)
        else:
            backend = MockBackend(labels=affinity.top_labels(task.target_class))
        return LLMReasoner(backend, affinity, config.weights, config.gain,
                           addendum=config.addendum)
    raise ValidationError(f"unknown reasoner {config.reasoner!r}")


def run_episode(config: EpisodeConfig, env: EnvironmentSpec | None = None) -> EpisodeResult:
    if env is None:
        env = load_environment(resolve_env_path(config.env_path))
    task = env.task_by_id(config.task_id)
    world_env = env.for_task(task)
    noise = config.noise
    if noise is None:
        noise = NoiseModel(confusion=dict(world_env.detector_confusion))

    rng_sample, rng_noise, rng_sparsify = episode_rngs(config.seed)
    grid = OccupancyGrid.for_env(world_env)
    clock = SimClock(0, config.seconds_per_step)
    pose = Pose(world_env.start.x, world_env.start.y, world_env.start.heading)
    rig = CameraRig()
    cams = rig.as_tuples()
    reasoner = build_reasoner(config, world_env, task)
    memory = MemoryWindow(config.memory_capacity)
    store = []
    prior_offered: list[tuple[float, float]] = []
    decisions = []
    trace = {"detections": []} if config.trace else None

    direct = direct_path_length(world_env, task)
    trajectory = [(pose.x, pose.y)]
    visited: list[tuple[float, float]] = []
    path_length = 0.0
    active_labels = None
    interrupt_note = ""
    call_index = 0
    last_decision_step = -1
    success = check_success(world_env, pose, task, None, cams)

    def traj_push(pt):
        if trajectory[-1] != pt:
            trajectory.append(pt)

    def sense_frame():
        dets = sense_objects(world_env, pose, rig, noise, active_labels,
                             rng_noise, step=clock.step)
        for det in dets:
            try:
                cand = project_detection(grid, world_env, pose, det)
            except NoSurface:
                continue
            point = fuse_object_points(store, cand, det.cls, det.confidence,
                                       step=clock.step)
            if trace is not None:
                trace["detections"].append({
                    "step": clock.step, "class": det.cls,
                    "conf": det.confidence, "bearing": det.bearing,
                    "projected": {"x": cand[0], "y": cand[1], "z": 0.0},
                    "fused_id": point.id,
                })

    while not success and clock.step < config.max_steps:
        integrate_scan(grid, world_env, pose, config.lidar)
        description = generate_descriptions(world_env, pose, rig)
        if active_labels is None:
            active_labels = enforce_labels(
                reasoner.active_labels(task, description), task.target_class
            )
        sense_frame()  # the decision sees what is visible right now

        # a fresh scan can inflate the robot's surroundings shut; escape by
        # sampling and planning without obstacle inflation for this round
        escape = False
        try:
            points = sample_graph_points(
                grid, pose, rng_sample, config.samples, config.min_cluster_size
            )
        except NoCandidates:
            escape = True
            try:
                points = sample_graph_points(
                    grid, pose, rng_sample, config.samples,
                    config.min_cluster_size, inflate=0,
                )
            except NoCandidates:
                clock.tick()
                continue
        points = gaussian_sparsify(points, pose, rng_sparsify, config.sparsify)
        label_new(points, prior_offered, config.new_threshold)
        for op in store:
            if op.cls == task.target_class:
                d = math.sqrt((op.x - pose.x) ** 2 + (op.y - pose.y) ** 2)
                points.append(GraphPoint(
                    id=0, x=op.x, y=op.y, kind=KIND_OBJECT, label=op.cls,
                    confidence=op.confidence, distance=d, source=op,
                ))
        renumber(points)
        prior_offered.extend((p.x, p.y) for p in points)

        ctx = DecisionContext(
            task=task, pose=Pose(pose.x, pose.y, pose.heading),
            sim_seconds=clock.seconds, candidate_points=points,
            object_points=list(store), description=description, memory=memory,
            total_calls=call_index, interrupt_note=interrupt_note,
            active_labels=active_labels, env=world_env,
            last_decision_step=last_decision_step, visited=list(visited),
        )
        last_decision_step = clock.step
        choice = reasoner.select(ctx, grid)
        chosen = ctx.candidate_by_id(choice.point_id)
        interrupt_note = ""

        # final approaches to detected objects hug obstacles (the planner
        # gets as close as it can); exploration legs keep clearance
        approach = chosen.kind == KIND_OBJECT
        try:
            path = plan_path(grid, pose, (chosen.x, chosen.y),
                             inflate=0 if (escape or approach) else 1)
        except Unreachable:
            path = Path([])
            interrupt_note = INTERRUPT_UNREACHABLE
            if chosen.source is not None and chosen.source in store:
                store.remove(chosen.source)

        leg_steps = 0
        dwell = 0
        while clock.step < config.max_steps:
            pose = advance_along(world_env, pose, path, config.speed, clock)
            leg_steps += 1
            path_length += path.last_ds
            for corner in path.last_crossed:
                traj_push(corner)
            sense_frame()
            if check_success(world_env, pose, task, None, cams):
                success = True
                break
            if path.done:
                # look-around pause at the waypoint: a few extra sensing
                # frames before asking for the next decision
                if dwell >= DWELL_STEPS:
                    break
                dwell += 1
            elif leg_steps >= config.replan_interval:
                interrupt_note = INTERRUPT_STUCK
                break
        traj_push((pose.x, pose.y))
        visited.append((pose.x, pose.y))

        call_index += 1
        record = reasoner.compress(ctx, choice, chosen, pose, call_index,
                                   clock.seconds)
        push_memory(memory, record)
        decisions.append({
            "call": call_index,
            "reasoner": reasoner.name,
            "point_id": chosen.id,
            "point": {"x": chosen.x, "y": chosen.y, "z": 0.0,
                      "kind": chosen.kind, "new": chosen.is_new},
            "justification": choice.justification,
            "description": choice.environment_description,
            "memory_len": len(memory),
            "fallback": bool(getattr(reasoner, "last_fallback", False)),
        })

    result = EpisodeResult(
        env=env.name, task=task.id, reasoner=config.reasoner, seed=config.seed,
        success=bool(success), timeout=not bool(success), steps=clock.step,
        decision_count=call_index, path_length=path_length, direct_path=direct,
        trajectory=[list(p) for p in trajectory], decisions=decisions,
    )
    if trace is not None:
        result.detections = trace["detections"]  # trace only; not serialized
    return result


def _episode_worker(config: EpisodeConfig) -> EpisodeResult:
    return run_episode(config)


def run_trials(config: EpisodeConfig, n_trials: int = DEFAULT_TRIALS,
               env: EnvironmentSpec | None = None,
               workers: int = 1) -> tuple[TrialSummary, list[EpisodeResult]]:
    """Independent episodes with seeds base..base+n-1, reported in seed order."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    configs = [replace(config, seed=config.seed + i) for i in range(n_trials)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_episode_worker, configs))
    else:
        results = [run_episode(c, env=env) for c in configs]
    results.sort(key=lambda r: r.seed)
    return summarize(results), results


def summarize(results: list[EpisodeResult]) -> TrialSummary:
    n = len(results)
    successes = sum(1 for r in results if r.success)
    timeouts = sum(1 for r in results if r.timeout)
    paths = [r.path_length for r in results if r.success]
    if paths:
        arr = np.asarray(paths, dtype=np.float64)
        mean = float(arr.mean())
        median = float(np.percentile(arr, 50))
        q1 = float(np.percentile(arr, 25))
        q3 = float(np.percentile(arr, 75))
    else:
        mean = median = q1 = q3 = None
    return TrialSummary(
        n=n, successes=successes, timeouts=timeouts,
        success_rate=successes / n if n else 0.0,
        mean_path=mean, median_path=median, q1_path=q1, q3_path=q3,
    )


def compare_reasoners(env_specs: list[str], reasoners: list[str],
                      n_trials: int = DEFAULT_TRIALS, base_seed: int = 0,
                      task_filter: list[str] | None = None,
                      max_steps: int = DEFAULT_MAX_STEPS,
                      workers: int = 1) -> list[dict]:
    """Per-task comparison rows across environments and reasoners."""
    rows = []
    for env_spec in env_specs:
        env = load_environment(resolve_env_path(env_spec))
        for task in env.tasks:
            if task_filter and task.id not in task_filter:
                continue
            direct = direct_path_length(env.for_task(task), task)
            for reasoner in reasoners:
                config = EpisodeConfig(
                    env_path=str(resolve_env_path(env_spec)), task_id=task.id,
                    reasoner=reasoner, seed=base_seed, max_steps=max_steps,
                )
                summary, results = run_trials(config, n_trials, env=env,
                                              workers=workers)
                rows.append({
                    "env": env.name, "task": task.id, "reasoner": reasoner,
                    "direct_path": direct, "n": summary.n,
                    "successes": summary.successes, "timeouts": summary.timeouts,
                    "success_rate": summary.success_rate,
                    "mean_path": summary.mean_path,
                    "median_path": summary.median_path,
                    "q1_path": summary.q1_path, "q3_path": summary.q3_path,
                    "results": results,
                })
    return rows


# --- artifact emission -----------------------------------------------------

SUMMARY_FIELDS = ["env", "task", "reasoner", "direct_path", "n", "successes",
                  "timeouts", "success_rate", "mean_path", "median_path",
                  "q1_path", "q3_path"]


def write_jsonl(results: list[EpisodeResult], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            for r in results:
                f.write(r.to_json_line())
                f.write("\n")
    except OSError as e:
        raise IoError(str(e)) from e


def read_jsonl(path) -> list[EpisodeResult]:
    with open(path, "r", encoding="utf-8") as f:
        return [EpisodeResult.from_json_line(line) for line in f if line.strip()]


def write_summary_csv(rows: list[dict], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS, extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise IoError(str(e)) from e


def render_episode_svg(env: EnvironmentSpec, result: EpisodeResult,
                       scale: float = 24.0) -> str:
    """Walls, trajectory, objects, and chosen waypoints as deterministic SVG."""
    w_px = env.width * env.cell_size * scale
    h_px = env.height * env.cell_size * scale
    s = env.cell_size * scale

    def px(x):
        return f"{x * scale:.1f}"

    def py(y):
        # y axis flips so +y points up in the image
        return f"{h_px - y * scale:.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px:.0f}" '
        f'height="{h_px:.0f}" viewBox="0 0 {w_px:.1f} {h_px:.1f}">',
        f'<rect width="{w_px:.1f}" height="{h_px:.1f}" fill="white"/>',
    ]
    for r in range(env.height):
        c = 0
        while c < env.width:
            if env.blocking[r, c]:
                low = bool(env.low[r, c])
                c1 = c
                while (c1 + 1 < env.width and env.blocking[r, c1 + 1]
                       and bool(env.low[r, c1 + 1]) == low):
                    c1 += 1
                color = "#999999" if low else "#222222"
                x0 = c * env.cell_size * scale
                y0 = h_px - (r + 1) * env.cell_size * scale
                parts.append(
                    f'<rect x="{x0:.1f}" y="{y0:.1f}" '
                    f'width="{(c1 - c + 1) * s:.1f}" height="{s:.1f}" '
                    f'fill="{color}"/>'
                )
                c = c1 + 1
            else:
                c += 1
    for obj in env.objects:
        parts.append(
            f'<circle cx="{px(obj.x)}" cy="{py(obj.y)}" r="{0.3 * scale:.1f}" '
            f'fill="#3366cc"><title>{obj.cls}</title></circle>'
        )
    if len(result.trajectory) >= 2:
        pts = " ".join(f"{px(x)},{py(y)}" for x, y in result.trajectory)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#cc2222" '
            f'stroke-width="{0.08 * scale:.1f}"/>'
        )
    for dec in result.decisions:
        x, y = dec["point"]["x"], dec["point"]["y"]
        r_px = 0.18 * scale
        parts.append(
            f'<g stroke="#22aa22" stroke-width="{0.06 * scale:.1f}">'
            f'<line x1="{float(px(x)) - r_px:.1f}" y1="{float(py(y)) - r_px:.1f}" '
            f'x2="{float(px(x)) + r_px:.1f}" y2="{float(py(y)) + r_px:.1f}"/>'
            f'<line x1="{float(px(x)) - r_px:.1f}" y1="{float(py(y)) + r_px:.1f}" '
            f'x2="{float(px(x)) + r_px:.1f}" y2="{float(py(y)) - r_px:.1f}"/></g>'
        )
    sx, sy = result.trajectory[0]
    parts.append(
        f'<circle cx="{px(sx)}" cy="{py(sy)}" r="{0.25 * scale:.1f}" '
        f'fill="none" stroke="#cc2222" stroke-width="{0.06 * scale:.1f}"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_outputs(results: list[EpisodeResult], out_dir,
                 formats=("jsonl", "csv", "svg"),
                 env_lookup: dict[str, EnvironmentSpec] | None = None,
                 summary_rows: list[dict] | None = None) -> list[str]:
    """Write episode artifacts; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        if "jsonl" in formats:
            path = os.path.join(out_dir, "results.jsonl")
            write_jsonl(results, path)
            written.append(path)
        if "csv" in formats:
            rows = summary_rows
            if rows is None:
                rows = _group_summary_rows(results)
            path = os.path.join(out_dir, "summary.csv")
            write_summary_csv(rows, path)
            written.append(path)
        if "svg" in formats and env_lookup:
            for r in results:
                env = env_lookup.get(r.env)
                if env is None:
                    continue
                path = os.path.join(
                    out_dir, f"episode_{r.env}_{r.task}_{r.reasoner}_{r.seed}.svg"
                )
                with open(path, "w", encoding="utf-8") as f:
                    f.write(render_episode_svg(env.for_task(env.task_by_id(r.task)), r))
                written.append(path)
    except OSError as e:
        raise IoError(str(e)) from e
    return written


def _group_summary_rows(results: list[EpisodeResult]) -> list[dict]:
    groups: dict[tuple, list[EpisodeResult]] = {}
    for r in results:
        groups.setdefault((r.env, r.task, r.reasoner), []).append(r)
    rows = []
    for (env, task, reasoner), rs in sorted(groups.items()):
        s = summarize(rs)
        rows.append({
            "env": env, "task": task, "reasoner": reasoner,
            "direct_path": rs[0].direct_path, "n": s.n,
            "successes": s.successes, "timeouts": s.timeouts,
            "success_rate": s.success_rate, "mean_path": s.mean_path,
            "median_path": s.median_path, "q1_path": s.q1_path,
            "q3_path": s.q3_path,
        })
    return rows
