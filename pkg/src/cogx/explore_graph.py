"""Candidate waypoint generation and grid path planning.

Each decision round produces a numbered list of candidate points: uniformly
sampled reachable free cells (thinned by a Gaussian of distance from the
robot), one point per frontier cluster, plus any detected target objects the
harness appends. The serialized form of that list is consumed verbatim by
the LLM bridge, so its format is pinned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from cogx import kernels
from cogx.errors import NoCandidates, Unreachable
from cogx.mapping import FREE, OCCUPIED, OccupancyGrid, frontier_cells_ordered
from cogx.world import Path, Pose

KIND_GRAPH = "graph"
KIND_FRONTIER = "frontier"
KIND_OBJECT = "object"

DEFAULT_SAMPLES = 200
DEFAULT_MIN_CLUSTER = 3
DEFAULT_NEW_THRESHOLD = 3.0
OBSTACLE_INFLATION = 1  # cells, applied in planning only
UNREACHABLE_SLACK = 3.0  # meters: how far from the goal a fallback cell may be


@dataclass
class GraphPoint:
    """One numbered candidate: graph, frontier, or object point."""
    id: int
    x: float
    y: float
    kind: str
    z: float = 0.0
    is_new: bool = False
    distance: float = 0.0
    label: str | None = None
    confidence: float | None = None
    source: object = field(default=None, repr=False, compare=False)  # backing ObjectPoint

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class SparsifyParams:
    sigma: float = 6.0
    floor_prob: float = 0.05
    local_radius: float = 0.0  # points closer than this always survive

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not (0.0 < self.floor_prob <= 1.0):
            raise ValueError("floor_prob must lie in (0, 1]")


class KDTree:
    """2D nearest-neighbor index over prior-round point positions."""

    def __init__(self, positions):
        self._pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        self._tree = cKDTree(self._pts) if len(self._pts) else None

    def __len__(self) -> int:
        return len(self._pts)

    def nearest_distance(self, x: float, y: float) -> float:
        if self._tree is None:
            return math.inf
        d, _ = self._tree.query((x, y))
        return float(d)


def planning_mask(grid: OccupancyGrid, force_free: tuple[int, int] | None = None,
                  inflate: int = OBSTACLE_INFLATION) -> np.ndarray:
    """Passable cells for planning: FREE, minus an inflation ring around
    OCCUPIED cells. The robot's own cell may be forced passable."""
    occ = grid.cells == OCCUPIED
    inflated = occ.copy()
    for _ in range(inflate):
        grown = inflated.copy()
        grown[1:, :] |= inflated[:-1, :]
        grown[:-1, :] |= inflated[1:, :]
        grown[:, 1:] |= inflated[:, :-1]
        grown[:, :-1] |= inflated[:, 1:]
        grown[1:, 1:] |= inflated[:-1, :-1]
        grown[1:, :-1] |= inflated[:-1, 1:]
        grown[:-1, 1:] |= inflated[1:, :-1]
        grown[:-1, :-1] |= inflated[1:, 1:]
        inflated = grown
    passable = ((grid.cells == FREE) & ~inflated).astype(np.uint8)
    if force_free is not None:
        c, r = force_free
        passable[r, c] = 1
    return passable


def frontier_clusters(grid: OccupancyGrid, min_size: int = DEFAULT_MIN_CLUSTER):
    """8-connected frontier components of at least min_size cells, in
    row-major discovery order."""
    cells = frontier_cells_ordered(grid)
    remaining = set(cells)
    clusters = []
    for seed in cells:
        if seed not in remaining:
            continue
        comp = [seed]
        remaining.discard(seed)
        stack = [seed]
        while stack:
            c, r = stack.pop()
            for dc in (-1, 0, 1):
                for dr in (-1, 0, 1):
                    n = (c + dc, r + dr)
                    if n in remaining:
                        remaining.discard(n)
                        comp.append(n)
                        stack.append(n)
        if len(comp) >= min_size:
            clusters.append(comp)
    return clusters


def _cluster_point(grid: OccupancyGrid, comp) -> tuple[float, float]:
    """Cluster centroid snapped to the member cell nearest to it."""
    cx = sum(c for c, _ in comp) / len(comp)
    cy = sum(r for _, r in comp) / len(comp)
    best = None
    best_key = None
    for c, r in comp:
        d2 = (c - cx) ** 2 + (r - cy) ** 2
        key = (d2, r, c)
        if best_key is None or key < best_key:
            best_key = key
            best = (c, r)
    return grid.cell_center(best[0], best[1])


def sample_graph_points(grid: OccupancyGrid, pose: Pose, rng,
                        samples: int = DEFAULT_SAMPLES,
                        min_cluster_size: int = DEFAULT_MIN_CLUSTER,
                        inflate: int = OBSTACLE_INFLATION) -> list[GraphPoint]:
    """Uniform candidates over the reachable free component plus one
    frontier point per cluster. Ids are contiguous from 1."""
    rc, rr = grid.cell_of(pose.x, pose.y)
    passable = planning_mask(grid, force_free=(rc, rr), inflate=inflate)
    reach = kernels.reachable(passable, rc, rr)
    flat = np.flatnonzero(reach)
    robot_idx = rr * grid.width + rc
    flat = flat[flat != robot_idx]
    if len(flat) == 0:
        raise NoCandidates("no reachable free cell beyond the robot's own")

    draws = rng.integers(0, len(flat), size=samples)
    seen = set()
    points = []
    for d in draws:
        idx = int(flat[d])
        if idx in seen:
            continue
        seen.add(idx)
        r, c = divmod(idx, grid.width)
        x, y = grid.cell_center(c, r)
        points.append(GraphPoint(
            id=0, x=x, y=y, kind=KIND_GRAPH,
            distance=math.sqrt((x - pose.x) ** 2 + (y - pose.y) ** 2),
        ))
    for comp in frontier_clusters(grid, min_cluster_size):
        x, y = _cluster_point(grid, comp)
        points.append(GraphPoint(
            id=0, x=x, y=y, kind=KIND_FRONTIER,
            distance=math.sqrt((x - pose.x) ** 2 + (y - pose.y) ** 2),
        ))
    renumber(points)
    return points


def renumber(points: list[GraphPoint]) -> None:
    for i, p in enumerate(points):
        p.id = i + 1


def gaussian_sparsify(points: list[GraphPoint], pose: Pose, rng,
                      params: SparsifyParams) -> list[GraphPoint]:
    """Thin graph points by distance; frontier and object points survive."""
    kept = []
    denom = 2.0 * params.sigma * params.sigma
    for p in points:
        if p.kind != KIND_GRAPH:
            kept.append(p)
            continue
        d = p.distance
        if params.local_radius > 0.0 and d <= params.local_radius:
            kept.append(p)
            continue
        keep_p = max(params.floor_prob, math.exp(-(d * d) / denom))
        if rng.random() < keep_p:
            kept.append(p)
    renumber(kept)
    return kept


def label_new(points: list[GraphPoint], prior_positions, threshold: float) -> list[GraphPoint]:
    """Mark points farther than threshold from every previously offered point."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    tree = prior_positions if isinstance(prior_positions, KDTree) else KDTree(prior_positions)
    for p in points:
        p.is_new = tree.nearest_distance(p.x, p.y) > threshold
    return points


def serialize_candidates(points: list[GraphPoint]) -> str:
    """The numbered list fed into prompts. Format is pinned byte-for-byte."""
    lines = []
    for p in points:
        label = p.label if p.label is not None else "-"
        conf = f"{p.confidence:.2f}" if p.confidence is not None else "-"
        lines.append(
            f"{p.id}) kind={p.kind} label={label} new={1 if p.is_new else 0} "
            f"x={p.x:.2f} y={p.y:.2f} z=0.0 dist={p.distance:.2f} conf={conf}"
        )
    return "\n".join(lines)


class PathField:
    """Shortest-path tree from the robot cell, shared by one decision round."""

    def __init__(self, grid: OccupancyGrid, pose: Pose):
        self.grid = grid
        self.cell_size = grid.cell_size
        self.start = grid.cell_of(pose.x, pose.y)
        self.pose = pose
        self.passable = planning_mask(grid, force_free=self.start)
        self.ga, self.gb, self.parent = kernels.dijkstra_field(
            self.passable, self.start[0], self.start[1]
        )

    def reached(self, c: int, r: int) -> bool:
        return self.ga[r, c] >= 0

    def cost_to(self, c: int, r: int) -> float:
        if not self.reached(c, r):
            return math.inf
        return (int(self.ga[r, c]) + int(self.gb[r, c]) * kernels.SQRT2) * self.cell_size

    def nearest_reached(self, x: float, y: float,
                        max_radius: float = UNREACHABLE_SLACK) -> tuple[int, int] | None:
        """Reached cell nearest to (x, y), or None beyond max_radius."""
        c, r = self.grid.cell_of(x, y)
        if 0 <= c < self.grid.width and 0 <= r < self.grid.height and self.reached(c, r):
            return (c, r)
        reached = self.ga >= 0
        if not reached.any():
            return None
        rs, cs = np.nonzero(reached)
        xs = (cs + 0.5) * self.cell_size
        ys = (rs + 0.5) * self.cell_size
        d2 = (xs - x) ** 2 + (ys - y) ** 2
        i = int(np.argmin(d2))
        if math.sqrt(float(d2[i])) > max_radius:
            return None
        return (int(cs[i]), int(rs[i]))

    def cells_to(self, c: int, r: int) -> list[tuple[int, int]]:
        cells = []
        idx = r * self.grid.width + c
        while idx >= 0:
            rr, cc = divmod(idx, self.grid.width)
            cells.append((cc, rr))
            idx = int(self.parent[rr, cc])
        cells.reverse()
        return cells

    def waypoints_to(self, c: int, r: int) -> list[tuple[float, float]]:
        cells = self.cells_to(c, r)
        pts = [(self.pose.x, self.pose.y)]
        for cc, rr in cells[1:]:
            pts.append(self.grid.cell_center(cc, rr))
        return pts


def plan_path(grid: OccupancyGrid, pose: Pose, to: tuple[float, float],
              inflate: int = OBSTACLE_INFLATION) -> Path:
    """Optimal 8-connected path from the robot pose toward a position.

    Unreachable goals are redirected to the nearest reachable free cell
    within UNREACHABLE_SLACK meters.
    """
    rc, rr = grid.cell_of(pose.x, pose.y)
    passable = planning_mask(grid, force_free=(rc, rr), inflate=inflate)
    gc, gr = grid.cell_of(to[0], to[1])
    in_bounds = 0 <= gc < grid.width and 0 <= gr < grid.height

    if (gc, gr) == (rc, rr):
        return Path([], cost=0.0, cost_pair=(0, 0))

    result = None
    if in_bounds and passable[gr, gc]:
        result = kernels.astar_path(passable, rc, rr, gc, gr)
    if result is None:
        reach = kernels.reachable(passable, rc, rr)
        rs, cs = np.nonzero(reach)
        if len(rs) == 0:
            raise Unreachable(f"no reachable free cell near ({to[0]:.2f}, {to[1]:.2f})")
        xs = (cs + 0.5) * grid.cell_size
        ys = (rs + 0.5) * grid.cell_size
        d2 = (xs - to[0]) ** 2 + (ys - to[1]) ** 2
        i = int(np.argmin(d2))
        if math.sqrt(float(d2[i])) > UNREACHABLE_SLACK:
            raise Unreachable(
                f"no reachable free cell within {UNREACHABLE_SLACK} m of "
                f"({to[0]:.2f}, {to[1]:.2f})"
            )
        gc, gr = int(cs[i]), int(rs[i])
        if (gc, gr) == (rc, rr):
            return Path([], cost=0.0, cost_pair=(0, 0))
        result = kernels.astar_path(passable, rc, rr, gc, gr)
        if result is None:
            raise Unreachable("fallback goal cell unexpectedly unreachable")

    cells, a, b = result
    waypoints = [(pose.x, pose.y)]
    for cc, rr2 in cells[1:]:
        waypoints.append(grid.cell_center(int(cc), int(rr2)))
    path = Path(waypoints, cost_pair=(a, b))
    return path
