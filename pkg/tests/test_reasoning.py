import math

import numpy as np
import pytest

from cogx.errors import NoCandidates
from cogx.explore_graph import KIND_FRONTIER, KIND_GRAPH, KIND_OBJECT, GraphPoint
from cogx.mapping import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from cogx.perception import ObjectPoint
from cogx.reasoning import (
    AffinityTable,
    DecisionContext,
    GainParams,
    MemoryWindow,
    ReasonerChoice,
    ScriptWeights,
    StateRecord,
    clamp_words,
    compress_state,
    path_gain,
    push_memory,
    scripted_select,
    vefep_select,
    volumetric_gain,
)
from cogx.world import Pose, Task

from conftest import env_from_text


def open_grid(n=40, cell=0.25):
    g = OccupancyGrid(n, n, cell)
    g.cells[:, :] = FREE
    g.cells[0, :] = OCCUPIED
    g.cells[-1, :] = OCCUPIED
    g.cells[:, 0] = OCCUPIED
    g.cells[:, -1] = OCCUPIED
    return g


def make_ctx(grid, candidates, task=None, pose=None, object_points=(),
             memory=None, env=None, visited=(), last_decision_step=-1):
    return DecisionContext(
        task=task or Task(id="T", query="find the box", target_class="box"),
        pose=pose or Pose(2.0, 2.0, 0.0),
        sim_seconds=0.0,
        candidate_points=list(candidates),
        object_points=list(object_points),
        description="a test room",
        memory=memory or MemoryWindow(),
        env=env,
        visited=list(visited),
        last_decision_step=last_decision_step,
    )


def los_unknown_count_oracle(cells, c0, r0, radius_cells):
    """Exhaustive enumeration with an independent Bresenham visibility walk."""
    h, w = cells.shape
    count = 0
    for r in range(h):
        for c in range(w):
            if cells[r, c] != UNKNOWN:
                continue
            if (c - c0) ** 2 + (r - r0) ** 2 > radius_cells ** 2:
                continue
            if bresenham_clear(cells, c0, r0, c, r):
                count += 1
    return count


def bresenham_clear(cells, c0, r0, c1, r1):
    dc, dr = abs(c1 - c0), abs(r1 - r0)
    sc = 1 if c1 > c0 else -1
    sr = 1 if r1 > r0 else -1
    err = dc - dr
    c, r = c0, r0
    while True:
        if (c, r) == (c1, r1):
            return True
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        if (c, r) == (c1, r1):
            return True
        if cells[r, c] == OCCUPIED:
            return False


class TestVolumetricGain:
    def test_fully_known_grid_zero(self):
        g = open_grid()
        assert volumetric_gain(g, (3.0, 3.0), 8.0) == 0

    def test_unknown_patch_matches_enumeration(self):
        rng = np.random.default_rng(88)
        for _ in range(20):
            g = OccupancyGrid(30, 30, 0.25)
            g.cells = rng.integers(0, 3, size=(30, 30)).astype(np.uint8)
            c0, r0 = int(rng.integers(2, 28)), int(rng.integers(2, 28))
            g.cells[r0, c0] = FREE
            want = los_unknown_count_oracle(g.cells, c0, r0, 8.0 / 0.25)
            got = volumetric_gain(g, g.cell_center(c0, r0), 8.0)
            assert got == want

    def test_centered_unknown_square(self):
        g = OccupancyGrid(21, 21, 0.25)
        g.cells[:, :] = UNKNOWN
        g.cells[10, 10] = FREE
        # whole 21x21 patch is unknown; everything within range has LOS
        want = los_unknown_count_oracle(g.cells, 10, 10, 8.0 / 0.25)
        assert volumetric_gain(g, g.cell_center(10, 10), 8.0) == want
        assert want == 21 * 21 - 1

    def test_wall_reduces_gain(self):
        g = OccupancyGrid(31, 31, 0.25)
        g.cells[:, :] = UNKNOWN
        g.cells[10:21, 10:21] = FREE
        open_gain = volumetric_gain(g, g.cell_center(15, 15), 5.0)
        g2 = g.copy()
        g2.cells[12, 10:21] = OCCUPIED  # wall across the northern view
        walled = volumetric_gain(g2, g2.cell_center(15, 15), 5.0)
        assert walled < open_gain


class TestPathGain:
    def test_lambda_zero_plain_sum(self):
        g = OccupancyGrid(40, 40, 0.25)
        g.cells[:, :] = UNKNOWN
        g.cells[5:25, 5:25] = FREE
        waypoints = [g.cell_center(10, 10), g.cell_center(18, 10)]
        got = path_gain(g, waypoints, 0.0, 4.0)
        # with no decay the result is the plain sum over sampled vertices
        from cogx.world import Path
        p = Path(waypoints)
        ss = [0.0]
        s = 1.0
        while s < p.total_length:
            ss.append(s)
            s += 1.0
        ss.append(p.total_length)
        want = 0.0
        for s in ss:
            x, y, _ = p.point_at(s)
            want += volumetric_gain(g, (x, y), 4.0)
        assert got == want

    def test_single_vertex(self):
        g = OccupancyGrid(30, 30, 0.25)
        g.cells[:, :] = UNKNOWN
        g.cells[15, 15] = FREE
        v = g.cell_center(15, 15)
        assert path_gain(g, [v], 0.5, 4.0) == volumetric_gain(g, v, 4.0)

    def test_hand_computed_decay(self):
        # vertices 1 m apart with hand-planted gains 5, 2, 0; sensor range
        # 0.6 m keeps each cluster visible from exactly one vertex
        g = OccupancyGrid(60, 60, 0.25)
        g.cells[:, :] = FREE
        a = (20, 30)
        b = (24, 30)
        c = (28, 30)
        for cc, rr in [(20, 31), (20, 29), (19, 30), (19, 31), (19, 29)]:
            g.cells[rr, cc] = UNKNOWN
        for cc, rr in [(24, 29), (25, 29)]:
            g.cells[rr, cc] = UNKNOWN
        ga = volumetric_gain(g, g.cell_center(*a), 0.6)
        gb = volumetric_gain(g, g.cell_center(*b), 0.6)
        gc = volumetric_gain(g, g.cell_center(*c), 0.6)
        assert (ga, gb, gc) == (5, 2, 0)
        waypoints = [g.cell_center(*a), g.cell_center(*b), g.cell_center(*c)]
        got = path_gain(g, waypoints, 0.5, 0.6)
        want = 5.0 + 2.0 * math.exp(-0.5) + 0.0 * math.exp(-1.0)
        assert got == pytest.approx(want, rel=1e-12)


class TestVefepSelect:
    def test_single_candidate(self):
        g = open_grid()
        pts = [GraphPoint(id=1, x=5.0, y=5.0, kind=KIND_GRAPH)]
        choice = vefep_select(make_ctx(g, pts), g)
        assert choice.point_id == 1

    def test_prefers_bigger_unknown_region(self):
        # frontier A borders a large unknown region, frontier B a small one
        g = OccupancyGrid(60, 40, 0.25)
        g.cells[:, :] = UNKNOWN
        g.cells[18:22, 2:40] = FREE  # known corridor
        g.cells[10:30, 40:60] = UNKNOWN  # large unknown zone to the east
        g.cells[5:7, 10:13] = UNKNOWN
        pts = [
            GraphPoint(id=1, x=(41 + 0.5) * 0.25, y=(20 + 0.5) * 0.25, kind=KIND_FRONTIER),
            GraphPoint(id=2, x=(10 + 0.5) * 0.25, y=(18 + 0.5) * 0.25, kind=KIND_FRONTIER),
        ]
        ctx = make_ctx(g, pts, pose=Pose((20 + 0.5) * 0.25, (20 + 0.5) * 0.25, 0.0))
        choice = vefep_select(ctx, g)
        gains = {}
        for p in pts:
            cell = g.cell_of(p.x, p.y)
            gains[p.id] = los_unknown_count_oracle(g.cells, cell[0], cell[1], 8.0 / 0.25)
        assert gains[1] > gains[2]
        assert choice.point_id == 1

    def test_object_shortcut_when_fresh(self):
        g = open_grid()
        op = ObjectPoint(id=1, x=5.0, y=5.0, cls="box", confidence=0.9,
                         last_obs_step=100)
        pts = [
            GraphPoint(id=1, x=3.0, y=3.0, kind=KIND_FRONTIER),
            GraphPoint(id=2, x=5.0, y=5.0, kind=KIND_OBJECT, label="box",
                       confidence=0.9, source=op),
        ]
        ctx = make_ctx(g, pts, object_points=[op], last_decision_step=50)
        assert vefep_select(ctx, g).point_id == 2

    def test_object_ignored_when_stale_or_reached(self):
        g = open_grid()
        op = ObjectPoint(id=1, x=5.0, y=5.0, cls="box", confidence=0.9,
                         last_obs_step=10)
        pts = [
            GraphPoint(id=1, x=3.0, y=3.0, kind=KIND_FRONTIER),
            GraphPoint(id=2, x=5.0, y=5.0, kind=KIND_OBJECT, label="box",
                       confidence=0.9, source=op),
        ]
        # stale: no observation since the previous decision
        ctx = make_ctx(g, pts, object_points=[op], last_decision_step=50)
        assert vefep_select(ctx, g).point_id == 1
        # fresh but the robot is already standing on it
        op.last_obs_step = 100
        ctx = make_ctx(g, pts, object_points=[op], pose=Pose(5.2, 5.0, 0.0),
                       last_decision_step=50)
        assert vefep_select(ctx, g).point_id == 1

    def test_no_candidates(self):
        g = open_grid()
        with pytest.raises(NoCandidates):
            vefep_select(make_ctx(g, []), g)

    def test_pure_given_inputs(self):
        g = open_grid()
        g.cells[20:30, 20:30] = UNKNOWN
        pts = [GraphPoint(id=i, x=1.0 + i, y=1.0 + i, kind=KIND_FRONTIER)
               for i in range(1, 4)]
        ctx = make_ctx(g, pts)
        a = vefep_select(ctx, g)
        b = vefep_select(ctx, g)
        assert a == b


class TestScriptedSelect:
    def affinity(self):
        return AffinityTable(
            cues={"whiteboard": {"whiteboard eraser": 0.9}},
            rooms={"classroom": {"whiteboard eraser": 0.9}},
        )

    def test_semantic_room_pull(self):
        env = env_from_text(
            "\n".join(["#" * 42] + ["#" + "." * 40 + "#" for _ in range(20)] + ["#" * 42]),
            rooms=[{"label": "classroom", "rect": [1, 1, 20, 21]},
                   {"label": "hallway", "rect": [20, 1, 41, 21]}],
            objects=[{"id": "e", "class": "whiteboard eraser", "x": 2.125, "y": 1.125}],
            start=(8.125, 2.125, 0.0),
            tasks=[{"id": "WE", "query": "find the whiteboard eraser",
                    "target_class": "whiteboard eraser"}],
        )
        g = OccupancyGrid.for_env(env)
        g.cells[:] = np.where(env.blocking, OCCUPIED, FREE)
        g.cells[1:5, 1:5] = UNKNOWN   # unseen pocket inside the classroom
        g.cells[15:19, 36:40] = UNKNOWN  # unseen pocket in the hallway
        task = env.tasks[0]
        pts = [
            GraphPoint(id=1, x=2.125, y=2.125, kind=KIND_GRAPH, distance=6.0),
            GraphPoint(id=2, x=9.325, y=4.125, kind=KIND_GRAPH, distance=2.4),
        ]
        ctx = make_ctx(g, pts, task=task, pose=Pose(8.125, 2.125, 0.0), env=env)
        choice = scripted_select(ctx, g, self.affinity())
        assert choice.point_id == 1
        assert "likely place" in choice.justification

    def test_discredited_object_not_rechased(self):
        g = open_grid()
        task = Task(id="T", query="q", target_class="box")
        op = ObjectPoint(id=1, x=5.0, y=5.0, cls="box", confidence=0.9,
                         observation_count=5, last_obs_step=90)
        pts = [
            GraphPoint(id=1, x=2.5, y=2.0, kind=KIND_GRAPH),
            GraphPoint(id=2, x=5.0, y=5.0, kind=KIND_OBJECT, label="box",
                       confidence=0.9, source=op),
        ]
        memory = MemoryWindow()
        for k in (1, 2):
            push_memory(memory, StateRecord(
                call_index=k, pose=(5.0, 5.1), chosen=(5.0, 5.0),
                chosen_kind=KIND_OBJECT, compressed_text="x " * 50,
                sim_seconds=float(k)))
        ctx = make_ctx(g, pts, task=task, object_points=[op], memory=memory,
                       visited=[(5.0, 5.1), (5.0, 5.05)], last_decision_step=80)
        choice = scripted_select(ctx, g, self.affinity())
        assert choice.point_id != 2

    def test_believed_object_chased(self):
        g = open_grid()
        task = Task(id="T", query="q", target_class="box")
        op = ObjectPoint(id=1, x=5.0, y=5.0, cls="box", confidence=0.9,
                         observation_count=3, last_obs_step=90)
        pts = [
            GraphPoint(id=1, x=2.5, y=2.0, kind=KIND_GRAPH),
            GraphPoint(id=2, x=5.0, y=5.0, kind=KIND_OBJECT, label="box",
                       confidence=0.9, source=op),
        ]
        ctx = make_ctx(g, pts, task=task, object_points=[op])
        assert scripted_select(ctx, g, self.affinity()).point_id == 2

    def test_all_equal_lowest_id(self):
        g = open_grid()
        pts = [GraphPoint(id=i, x=2.0 + i * 0.5, y=6.0, kind=KIND_GRAPH)
               for i in range(1, 5)]
        choice = scripted_select(make_ctx(g, pts), g, AffinityTable())
        assert choice.point_id == 1

    def test_scale_invariance_of_argmax(self):
        g = open_grid()
        g.cells[25:35, 25:35] = UNKNOWN
        pts = [GraphPoint(id=i, x=1.0 + i * 0.7, y=4.0, kind=KIND_GRAPH,
                          is_new=(i % 2 == 0)) for i in range(1, 8)]
        base = scripted_select(make_ctx(g, pts), g, AffinityTable(),
                               ScriptWeights(1.0, 0.6, 0.4, 0.8))
        scaled = scripted_select(make_ctx(g, pts), g, AffinityTable(),
                                 ScriptWeights(3.0, 1.8, 1.2, 2.4))
        assert base.point_id == scaled.point_id

    def test_anti_looping_prefers_far_point(self):
        g = open_grid()
        memory = MemoryWindow()
        for k in range(1, 6):
            push_memory(memory, StateRecord(
                call_index=k, pose=(3.0, 3.0), chosen=(3.0, 3.0),
                chosen_kind=KIND_GRAPH, compressed_text="m " * 50,
                sim_seconds=float(k)))
        pts = [
            GraphPoint(id=1, x=3.2, y=3.0, kind=KIND_GRAPH),  # near past stops
            GraphPoint(id=2, x=8.0, y=8.0, kind=KIND_GRAPH),  # far away
        ]
        ctx = make_ctx(g, pts, memory=memory, pose=Pose(3.0, 3.0, 0.0))
        choice = scripted_select(ctx, g, AffinityTable(),
                                 ScriptWeights(1.0, 0.0, 0.0, 0.8))
        assert choice.point_id == 2

    def test_returns_valid_id_always(self):
        rng = np.random.default_rng(6)
        g = open_grid()
        g.cells[10:25, 10:25] = UNKNOWN
        for _ in range(30):
            ids = list(range(1, int(rng.integers(2, 12))))
            pts = [GraphPoint(id=i, x=float(rng.uniform(1, 9)),
                              y=float(rng.uniform(1, 9)), kind=KIND_GRAPH,
                              is_new=bool(rng.integers(0, 2))) for i in ids]
            choice = scripted_select(make_ctx(g, pts), g, AffinityTable())
            assert choice.point_id in ids


class TestCompressAndMemory:
    def test_word_bounds(self):
        choice = ReasonerChoice(point_id=3, environment_description="d",
                                justification="short")
        chosen = GraphPoint(id=3, x=1.0, y=2.0, kind=KIND_GRAPH)
        rec = compress_state(choice, chosen, Pose(0, 0, 0), 1, 12.5)
        n = len(rec.compressed_text.split())
        assert 50 <= n <= 100

    def test_long_input_truncated(self):
        choice = ReasonerChoice(point_id=1, environment_description="word " * 300,
                                justification="because " * 100)
        chosen = GraphPoint(id=1, x=0.0, y=0.0, kind=KIND_FRONTIER)
        rec = compress_state(choice, chosen, Pose(0, 0, 0), 2, 1.0)
        assert len(rec.compressed_text.split()) == 100

    def test_deterministic(self):
        choice = ReasonerChoice(point_id=2, environment_description="room",
                                justification="why not")
        chosen = GraphPoint(id=2, x=1.5, y=1.5, kind=KIND_GRAPH)
        a = compress_state(choice, chosen, Pose(1, 1, 0), 4, 9.0)
        b = compress_state(choice, chosen, Pose(1, 1, 0), 4, 9.0)
        assert a == b

    def test_clamp_words(self):
        assert len(clamp_words("one two three").split()) == 50
        assert len(clamp_words("w " * 500).split()) == 100
        mid = "word " * 75
        assert clamp_words(mid).strip() == mid.strip()

    def test_window_eviction(self):
        w = MemoryWindow(capacity=10)
        records = [StateRecord(call_index=i, pose=(0, 0), chosen=(0, 0),
                               chosen_kind=KIND_GRAPH, compressed_text="t",
                               sim_seconds=float(i)) for i in range(1, 12)]
        for r in records:
            push_memory(w, r)
        assert len(w) == 10
        assert [r.call_index for r in w] == list(range(2, 12))

    def test_thousand_pushes_match_reference_deque(self):
        from collections import deque
        ref = deque(maxlen=10)
        w = MemoryWindow(capacity=10)
        for i in range(1000):
            rec = StateRecord(call_index=i, pose=(0, 0), chosen=(0, 0),
                              chosen_kind=KIND_GRAPH, compressed_text="t",
                              sim_seconds=float(i))
            push_memory(w, rec)
            ref.append(rec)
            assert len(w) <= 10
        assert list(w) == list(ref)

    def test_push_into_empty(self):
        w = MemoryWindow()
        push_memory(w, StateRecord(call_index=1, pose=(0, 0), chosen=(0, 0),
                                   chosen_kind=KIND_GRAPH, compressed_text="t",
                                   sim_seconds=0.0))
        assert len(w) == 1


class TestAffinityTable:
    def test_scores(self):
        t = AffinityTable(cues={"desk": {"eraser": 0.5}},
                          rooms={"lab": {"eraser": 0.7}})
        assert t.cue_score("desk", "eraser") == 0.5
        assert t.cue_score("desk", "chair") == 0.0
        assert t.room_score("lab", "eraser") == 0.7
        assert t.room_score(None, "eraser") == 0.0

    def test_top_labels_target_first(self):
        t = AffinityTable(cues={
            "desk": {"eraser": 0.5},
            "whiteboard": {"eraser": 0.9},
            "plant": {"eraser": 0.0},
            "chair": {"eraser": 0.5},
        })
        labels = t.top_labels("eraser")
        assert labels[0] == "eraser"
        assert labels[1] == "whiteboard"
        assert set(labels[2:]) == {"chair", "desk"}
        assert len(labels) <= 5

    def test_merge(self):
        a = AffinityTable(cues={"desk": {"eraser": 0.5}}, rooms={"lab": {"x": 0.1}})
        b = AffinityTable(cues={"desk": {"chair": 0.2}}, rooms={})
        m = a.merged_with(b)
        assert m.cue_score("desk", "eraser") == 0.5
        assert m.cue_score("desk", "chair") == 0.2
