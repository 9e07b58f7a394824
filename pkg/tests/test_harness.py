import json
import math
import os

import numpy as np
import pytest

from cogx.harness import (
    EpisodeConfig,
    EpisodeResult,
    TrialSummary,
    bundled_env_path,
    compare_reasoners,
    direct_path_length,
    emit_outputs,
    enforce_labels,
    load_affinity,
    read_jsonl,
    render_episode_svg,
    resolve_env_path,
    run_episode,
    run_trials,
    summarize,
    write_jsonl,
)
from cogx.perception import NoiseModel
from cogx.world import load_environment

from conftest import env_from_text, fixture_path


def trivial_env_dict_path(tmp_path):
    """Tiny room, target 3 m ahead of the start, in plain view."""
    d = {
        "name": "trivial",
        "cell_size": 0.25,
        "grid": {"width": 32, "height": 16},
        "wall_runs": ([[0, 0, 32], [15, 0, 32]]
                      + [[r, 0, 1] for r in range(1, 15)]
                      + [[r, 31, 32] for r in range(1, 15)]
                      + [[r, 18, 19] for r in range(6, 10)]),
        "rooms": [{"label": "room", "rect": [0, 0, 32, 16]}],
        "objects": [{"id": "t", "class": "box", "x": 4.375, "y": 2.125}],
        "start": {"x": 1.375, "y": 2.125, "heading": 0.0},
        "tasks": [{"id": "T", "query": "Go find the box", "target_class": "box",
                   "success_radius": 2.0}],
    }
    p = tmp_path / "trivial.json"
    p.write_text(json.dumps(d))
    return str(p)


class TestRunEpisode:
    def test_trivial_scripted_near_direct(self, tmp_path):
        path = trivial_env_dict_path(tmp_path)
        config = EpisodeConfig(env_path=path, task_id="T", reasoner="scripted",
                               seed=1, max_steps=600,
                               noise=NoiseModel.disabled())
        r = run_episode(config)
        assert r.success
        assert r.path_length <= r.direct_path + 2 * 0.25 + 1e-9

    def test_max_steps_one_times_out(self, tmp_path):
        path = trivial_env_dict_path(tmp_path)
        config = EpisodeConfig(env_path=path, task_id="T", reasoner="scripted",
                               seed=1, max_steps=1)
        r = run_episode(config)
        assert r.timeout and not r.success
        assert r.steps == 1

    def test_same_seed_byte_identical(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=5, max_steps=500)
        a = run_episode(config)
        b = run_episode(config)
        assert a.to_json_line() == b.to_json_line()

    def test_success_xor_timeout(self):
        for seed in range(3):
            config = EpisodeConfig(env_path="office1", task_id="FE1",
                                   reasoner="scripted", seed=seed, max_steps=300)
            r = run_episode(config)
            assert r.success != r.timeout

    def test_trajectory_arc_matches_path_length(self):
        config = EpisodeConfig(env_path="office1", task_id="FE2",
                               reasoner="scripted", seed=2, max_steps=1500)
        r = run_episode(config)
        arc = 0.0
        for (x0, y0), (x1, y1) in zip(r.trajectory, r.trajectory[1:]):
            arc += math.hypot(x1 - x0, y1 - y0)
        assert arc == pytest.approx(r.path_length, rel=1e-6)

    def test_memory_and_labels_protocol(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=0, max_steps=800)
        r = run_episode(config)
        assert all(d["memory_len"] <= 10 for d in r.decisions)

    def test_llm_mock_runs_and_is_deterministic(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="llm", seed=4, max_steps=400)
        a = run_episode(config)
        b = run_episode(config)
        assert a.to_json_line() == b.to_json_line()
        assert a.decision_count >= 1

    def test_vefep_runs(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="vefep", seed=0, max_steps=2000)
        r = run_episode(config)
        assert r.success


class TestDirectPath:
    def test_bundled_direct_paths_finite(self):
        for name in ("office1", "office2", "school"):
            env = load_environment(resolve_env_path(name))
            for task in env.tasks:
                d = direct_path_length(env.for_task(task), task)
                assert math.isfinite(d) and d > 0

    def test_straight_line_case(self, tmp_path):
        path = trivial_env_dict_path(tmp_path)
        env = load_environment(path)
        task = env.tasks[0]
        d = direct_path_length(env, task)
        # target 3 m ahead with radius 2: about one meter of travel
        assert d <= 1.5


class TestRunTrials:
    def test_seed_sequence_and_order(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=100, max_steps=300)
        summary, results = run_trials(config, 4)
        assert [r.seed for r in results] == [100, 101, 102, 103]
        assert summary.n == 4

    def test_single_trial_summary(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=0, max_steps=600)
        summary, results = run_trials(config, 1)
        r = results[0]
        if r.success:
            assert summary.mean_path == r.path_length
            assert summary.median_path == r.path_length
        assert summary.n == 1

    def test_parallel_equals_sequential(self):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=40, max_steps=400)
        _, seq = run_trials(config, 4, workers=1)
        _, par = run_trials(config, 4, workers=2)
        assert [r.to_json_line() for r in seq] == [r.to_json_line() for r in par]

    def test_default_trials_is_fifteen(self):
        from cogx.harness import DEFAULT_TRIALS
        assert DEFAULT_TRIALS == 15


class TestSummarize:
    def test_matches_reference_statistics(self):
        # fixed fixture of results with known statistics
        def result(seed, success, path):
            return EpisodeResult(
                env="e", task="t", reasoner="r", seed=seed, success=success,
                timeout=not success, steps=10, decision_count=2,
                path_length=path, direct_path=1.0, trajectory=[[0, 0]],
                decisions=[],
            )
        paths = [12.0, 7.0, 31.0, 18.0, 25.0]
        results = [result(i, True, p) for i, p in enumerate(paths)]
        results.append(result(99, False, 999.0))
        s = summarize(results)
        assert s.n == 6
        assert s.successes == 5 and s.timeouts == 1
        assert s.success_rate == 5 / 6
        arr = np.array(paths)
        assert s.mean_path == float(arr.mean())
        assert s.median_path == float(np.percentile(arr, 50))
        assert s.q1_path == float(np.percentile(arr, 25))
        assert s.q3_path == float(np.percentile(arr, 75))
        assert s.q1_path <= s.median_path <= s.q3_path

    def test_no_successes(self):
        r = EpisodeResult(env="e", task="t", reasoner="r", seed=0, success=False,
                          timeout=True, steps=1, decision_count=0,
                          path_length=0.0, direct_path=1.0, trajectory=[[0, 0]],
                          decisions=[])
        s = summarize([r])
        assert s.mean_path is None and s.success_rate == 0.0


class TestEmitOutputs:
    def make_results(self, n=2):
        config = EpisodeConfig(env_path="office1", task_id="FE1",
                               reasoner="scripted", seed=0, max_steps=300)
        _, results = run_trials(config, n)
        return results

    def test_jsonl_round_trip(self, tmp_path):
        results = self.make_results()
        p = tmp_path / "results.jsonl"
        write_jsonl(results, p)
        back = read_jsonl(p)
        assert [r.to_dict() for r in back] == [r.to_dict() for r in results]

    def test_empty_csv_has_header(self, tmp_path):
        emit_outputs([], tmp_path, formats=("csv",))
        text = (tmp_path / "summary.csv").read_text()
        assert text.startswith("env,task,reasoner,")
        assert len(text.strip().splitlines()) == 1

    def test_svg_written_and_stable(self, tmp_path):
        results = self.make_results(1)
        env = load_environment(resolve_env_path("office1"))
        svg1 = render_episode_svg(env, results[0])
        svg2 = render_episode_svg(env, results[0])
        assert svg1 == svg2
        assert svg1.startswith("<svg")
        written = emit_outputs(results, tmp_path, formats=("jsonl", "csv", "svg"),
                               env_lookup={"office1": env})
        svgs = [w for w in written if w.endswith(".svg")]
        assert len(svgs) == 1
        assert os.path.getsize(svgs[0]) > 500


class TestCompareReasoners:
    def test_structure(self):
        rows = compare_reasoners(["office1"], ["scripted"], n_trials=2,
                                 base_seed=0, task_filter=["FE1"], max_steps=300)
        assert len(rows) == 1
        row = rows[0]
        assert row["env"] == "office1" and row["task"] == "FE1"
        assert row["n"] == 2
        assert "direct_path" in row and "timeouts" in row


class TestHelpers:
    def test_enforce_labels(self):
        assert enforce_labels(["a", "b", "box", "c", "d", "e"], "box") == \
            ["box", "a", "b", "c", "d"]
        assert enforce_labels([], "box") == ["box"]
        assert enforce_labels(["box", "box"], "box") == ["box"]

    def test_load_affinity_merges_env_table(self):
        t = load_affinity("school")
        assert t.cue_score("whiteboard", "whiteboard eraser") == 0.9
        assert t.rooms["classroom a"]["whiteboard eraser"] == 0.8

    def test_resolve_env_path(self):
        assert str(bundled_env_path("office1")) == resolve_env_path("office1")
        assert resolve_env_path("/nonexistent/x.json") == "/nonexistent/x.json"
