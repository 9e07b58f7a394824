import math

import numpy as np
import pytest

from cogx.errors import NoSurface
from cogx.mapping import FREE, OCCUPIED, UNKNOWN, LidarModel, OccupancyGrid, integrate_scan
from cogx.perception import (
    CameraRig,
    NoiseModel,
    ObjectPoint,
    fuse_object_points,
    project_detection,
    sense_objects,
    weighted_median,
)
from cogx.world import Pose, load_environment

from conftest import env_from_text, fixture_path


def simple_env():
    rows = ["#" * 40] + ["#" + "." * 38 + "#" for _ in range(30)] + ["#" * 40]
    return env_from_text(
        "\n".join(rows),
        objects=[{"id": "t", "class": "box", "x": 3.125, "y": 2.125}],
        start=(2.125, 2.125, 0.0),
        tasks=[{"id": "T", "query": "find the box", "target_class": "box"}],
    )


class TestSenseObjects:
    def test_perfect_detector_single_clean_detection(self):
        env = simple_env()
        rng = np.random.default_rng(0)
        dets = sense_objects(env, Pose(2.125, 2.125, 0.0), CameraRig(),
                             NoiseModel.disabled(), ["box"], rng)
        assert len(dets) == 1
        assert dets[0].cls == "box"
        assert dets[0].bearing == pytest.approx(0.0, abs=1e-12)
        assert 0 < dets[0].confidence <= 1

    def test_rear_blind_spot(self):
        env = simple_env()
        rng = np.random.default_rng(0)
        # object 1 m behind the robot: no rear camera, no detection
        dets = sense_objects(env, Pose(4.125, 2.125, 0.0), CameraRig(),
                             NoiseModel.disabled(), ["box"], rng)
        assert dets == []

    def test_inactive_label_ignored(self):
        env = simple_env()
        rng = np.random.default_rng(0)
        dets = sense_objects(env, Pose(2.125, 2.125, 0.0), CameraRig(),
                             NoiseModel.disabled(), ["chair"], rng)
        assert dets == []

    def test_reproducible_with_same_rng_state(self):
        env = simple_env()
        noise = NoiseModel(false_positive_rate=0.5)
        out = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            frames = []
            for step in range(30):
                frames.append(sense_objects(env, Pose(2.125, 2.125, 0.0),
                                            CameraRig(), noise, ["box", "chair"],
                                            rng, step=step))
            out.append(frames)
        assert out[0] == out[1]

    def test_los_blocked_no_detection(self):
        env = env_from_text(
            "\n".join([
                "############",
                "#..........#",
                "#....#.....#",
                "#....#.....#",
                "#....#.....#",
                "#..........#",
                "############",
            ]),
            objects=[{"id": "t", "class": "box", "x": 1.55, "y": 0.875}],
            start=(2.375, 0.875, math.pi),
            tasks=[{"id": "T", "query": "q", "target_class": "box"}],
        )
        # wall column between robot and object
        env.objects[0].x = 0.875
        rng = np.random.default_rng(1)
        dets = sense_objects(env, Pose(2.375, 0.875, math.pi), CameraRig(),
                             NoiseModel.disabled(), ["box"], rng)
        assert dets == []


class TestProjectDetection:
    def test_wall_mounted_object_accurate(self):
        env = simple_env()
        # object lives against the east wall; belief fully mapped
        env.objects[0].x = 9.625
        env.objects[0].y = 2.125
        grid = OccupancyGrid.for_env(env)
        grid.cells[:] = np.where(env.blocking, OCCUPIED, FREE)
        pose = Pose(6.125, 2.125, 0.0)
        rng = np.random.default_rng(0)
        dets = sense_objects(env, pose, CameraRig(), NoiseModel.disabled(),
                             ["box"], rng)
        assert len(dets) == 1
        x, y = project_detection(grid, env, pose, dets[0])
        assert math.hypot(x - env.objects[0].x, y - env.objects[0].y) <= 2 * env.cell_size

    def test_unknown_fallback(self):
        env = simple_env()
        grid = OccupancyGrid.for_env(env)
        # only a small known disk around the robot; the rest unknown
        grid.cells[5:12, 5:12] = FREE
        pose = Pose(2.125, 2.125, 0.0)
        from cogx.perception import Detection
        det = Detection(cls="box", confidence=0.8, bearing=0.0, frame_step=0)
        x, y = project_detection(grid, env, pose, det)
        # first unknown cell east of the known block starts at col 12
        assert x == pytest.approx(12 * env.cell_size)
        assert abs(y - 2.125) < env.cell_size

    def test_no_surface(self):
        env = simple_env()
        grid = OccupancyGrid.for_env(env)
        grid.cells[:, :] = FREE  # everything known free: nothing to hit
        from cogx.perception import Detection
        det = Detection(cls="box", confidence=0.8, bearing=0.0, frame_step=0)
        with pytest.raises(NoSurface):
            project_detection(grid, env, Pose(2.125, 2.125, 0.0), det, max_range=3.0)


def median_oracle(values, weights):
    """Smallest value whose cumulative weight reaches half the total,
    scanning a sorted copy."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    total = sum(weights)
    cum = 0.0
    for i in order:
        cum += weights[i]
        if cum >= total / 2:
            return values[i]
    return values[order[-1]]


class TestWeightedMedian:
    def test_equal_weights_median(self):
        assert weighted_median([0.0, 10.0, 20.0], [1.0, 1.0, 1.0]) == 10.0

    def test_random_multisets_match_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(1, 16))
            values = [float(v) for v in rng.integers(0, 8, size=n)]  # ties likely
            weights = [float(w) for w in rng.uniform(0.05, 1.0, size=n)]
            assert weighted_median(values, weights) == median_oracle(values, weights)

    def test_within_hull(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            values = list(rng.normal(0, 5, size=n))
            weights = list(rng.uniform(0.1, 1.0, size=n))
            m = weighted_median(values, weights)
            assert min(values) <= m <= max(values)


class TestFuseObjectPoints:
    def test_single_observation(self):
        store = []
        p = fuse_object_points(store, (1.0, 2.0), "box", 0.7)
        assert store == [p]
        assert (p.x, p.y, p.observation_count) == (1.0, 2.0, 1)

    def test_median_fusion(self):
        store = []
        for x in (0.0, 10.0, 20.0):
            fuse_object_points(store, (x, 0.0), "box", 0.5, cluster_radius=50.0)
        assert len(store) == 1
        assert store[0].x == 10.0

    def test_association_by_class_and_distance(self):
        store = []
        fuse_object_points(store, (0.0, 0.0), "box", 0.5)
        fuse_object_points(store, (0.5, 0.0), "box", 0.6)     # same cluster
        fuse_object_points(store, (10.0, 0.0), "box", 0.6)    # far: new point
        fuse_object_points(store, (0.1, 0.0), "chair", 0.6)   # class differs
        assert len(store) == 3
        assert store[0].observation_count == 2

    def test_confidence_is_max_observed(self):
        store = []
        fuse_object_points(store, (0.0, 0.0), "box", 0.9)
        fuse_object_points(store, (0.1, 0.0), "box", 0.4)
        assert store[0].confidence == 0.9

    def test_window_limits_observations(self):
        store = []
        for i in range(25):
            fuse_object_points(store, (float(i % 2) * 0.1, 0.0), "box", 0.5)
        assert len(store[0].observations) == 15
        assert store[0].observation_count == 25

    def test_convergence_with_clean_detections(self):
        # perfect detector on a wall-mounted object: fused point within one
        # cell of truth after 3+ observations, and it never drifts away
        env = simple_env()
        env.objects[0].x = 9.625
        env.objects[0].y = 3.625
        grid = OccupancyGrid.for_env(env)
        grid.cells[:] = np.where(env.blocking, OCCUPIED, FREE)
        rng = np.random.default_rng(3)
        store = []
        pose = Pose(6.125, 3.625, 0.0)
        for step in range(10):
            for det in sense_objects(env, pose, CameraRig(), NoiseModel.disabled(),
                                     ["box"], rng, step=step):
                p = fuse_object_points(store, project_detection(grid, env, pose, det),
                                       det.cls, det.confidence, step=step)
            if step >= 3:
                d = math.hypot(p.x - env.objects[0].x, p.y - env.objects[0].y)
                assert d <= env.cell_size


def test_halfwall_projection_falls_short_ten_seeds():
    """Occlusion shortfall: cameras see the target over a mapped half wall,
    the projection ray lands on the half wall instead, every seed."""
    env = load_environment(fixture_path("halfwall.json"))
    obj = env.objects[0]
    rig = CameraRig()
    lidar = LidarModel()
    for seed in range(10):
        rng = np.random.default_rng([seed, 1])
        grid = OccupancyGrid.for_env(env)
        pose = Pose(env.start.x, env.start.y, env.start.heading)
        integrate_scan(grid, env, pose, lidar)
        store = []
        noise = NoiseModel(confusion={})
        for step in range(40):
            for det in sense_objects(env, pose, rig, noise, ["office chair"],
                                     rng, step=step):
                cand = project_detection(grid, env, pose, det)
                fuse_object_points(store, cand, det.cls, det.confidence, step=step)
        best = max(store, key=lambda p: p.observation_count)
        c, r = env.cell_of(best.x + 1e-9, best.y)
        assert best.observation_count >= 3
        assert bool(env.low[r, c])
        assert math.hypot(best.x - obj.x, best.y - obj.y) >= 1.0
