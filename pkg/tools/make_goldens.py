"""Regenerate the golden files under tests/fixtures/golden.

Golden files pin byte-exact behavior: rendered prompts, a seeded detection
log, a compressed state record, a scene description, and an episode SVG.
Regenerate deliberately, eyeball the diff, and commit.
"""

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

GOLDEN = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "golden")


def explore_ctx():
    from cogx.explore_graph import GraphPoint
    from cogx.reasoning import DecisionContext, MemoryWindow, StateRecord
    from cogx.world import Pose, Task

    memory = MemoryWindow()
    for i in (1, 2):
        memory.push(StateRecord(
            call_index=i, pose=(1.0 * i, 2.0), chosen=(2.0 * i, 3.0),
            chosen_kind="graph",
            compressed_text=(
                f"Call {i} summary: the robot moved through the west corridor "
                "toward an open doorway, mapping two rooms and seeing a desk "
                "and a chair; no sign of the target yet so the search "
                "continues along the southern wing of the building with "
                "several frontier points still unexplored ahead of the robot "
                "and new graph points appearing nearby each round now."
            ),
            sim_seconds=10.0 * i,
        ))
    candidates = [
        GraphPoint(id=1, x=2.25, y=3.5, kind="graph", distance=1.8),
        GraphPoint(id=2, x=7.75, y=1.25, kind="graph", is_new=True, distance=5.1),
        GraphPoint(id=3, x=10.5, y=6.0, kind="frontier", is_new=True, distance=9.3),
        GraphPoint(id=4, x=4.0, y=4.0, kind="object", label="office chair",
                   confidence=0.82, distance=2.9),
    ]
    return DecisionContext(
        task=Task(id="OC", query="Go to the office chair", target_class="office chair"),
        pose=Pose(1.62, 2.88, 0.5),
        sim_seconds=123.5,
        candidate_points=candidates,
        object_points=[],
        description="The robot is in a carpeted office area with cubicles.",
        memory=memory,
        total_calls=2,
        interrupt_note="",
        active_labels=["office chair", "desk", "chair"],
    )


def main():
    os.makedirs(GOLDEN, exist_ok=True)
    from cogx.llm_bridge import (
        generate_descriptions,
        load_template,
        render_explore,
        render_prompt,
    )
    from cogx.mapping import LidarModel, OccupancyGrid, integrate_scan
    from cogx.perception import CameraRig, NoiseModel, fuse_object_points, \
        project_detection, sense_objects
    from cogx.reasoning import ReasonerChoice, compress_state
    from cogx.harness import EpisodeConfig, render_episode_svg, run_episode
    from cogx.world import Pose, load_environment

    ctx = explore_ctx()
    with open(os.path.join(GOLDEN, "explore_a.txt"), "w") as f:
        f.write(render_explore(ctx, addendum="a"))
    with open(os.path.join(GOLDEN, "explore_b.txt"), "w") as f:
        f.write(render_explore(ctx, addendum="b"))
    with open(os.path.join(GOLDEN, "vqa.txt"), "w") as f:
        f.write(render_prompt(load_template("VQA_QUESTIONS"),
                              {"INSERT_QUERY_HERE": ctx.task.query}))
    with open(os.path.join(GOLDEN, "labels.txt"), "w") as f:
        f.write(render_prompt(load_template("OBJECT_LABELS"), {
            "INSERT_SCENE_DESCRIPTION": ctx.description,
            "INSERT_QUERY_HERE": ctx.task.query,
        }))

    # seeded detection log on the half-wall fixture
    env = load_environment(os.path.join(os.path.dirname(__file__), "..",
                                        "tests", "fixtures", "halfwall.json"))
    rng = np.random.default_rng(42)
    grid = OccupancyGrid.for_env(env)
    pose = Pose(env.start.x, env.start.y, env.start.heading)
    integrate_scan(grid, env, pose, LidarModel())
    store = []
    log = []
    rig = CameraRig()
    noise = NoiseModel()
    for step in range(25):
        for det in sense_objects(env, pose, rig, noise, ["office chair", "desk"],
                                 rng, step=step):
            try:
                cand = project_detection(grid, env, pose, det)
            except Exception:
                continue
            point = fuse_object_points(store, cand, det.cls, det.confidence,
                                       step=step)
            log.append({"step": step, "class": det.cls,
                        "conf": det.confidence, "bearing": det.bearing,
                        "projected": {"x": cand[0], "y": cand[1], "z": 0.0},
                        "fused_id": point.id})
    with open(os.path.join(GOLDEN, "detections_seed42.jsonl"), "w") as f:
        for entry in log:
            f.write(json.dumps(entry, sort_keys=True) + "\n")

    # compressed state record
    choice = ReasonerChoice(
        point_id=3,
        environment_description="The robot is in a carpeted office area with cubicles.",
        justification="Point 3 looks best because it is newly discovered and "
                      "opens unexplored ground.",
    )
    chosen = ctx.candidate_by_id(3)
    rec = compress_state(choice, chosen, ctx.pose, 3, ctx.sim_seconds)
    with open(os.path.join(GOLDEN, "compressed_state.txt"), "w") as f:
        f.write(rec.compressed_text + "\n")

    # scene description on the half-wall fixture
    desc = generate_descriptions(env, pose, rig)
    with open(os.path.join(GOLDEN, "description.txt"), "w") as f:
        f.write(desc + "\n")

    # episode SVG
    config = EpisodeConfig(env_path="halfwall", task_id="HW", reasoner="scripted",
                           seed=7, max_steps=200)
    result = run_episode(config, env=env)
    with open(os.path.join(GOLDEN, "episode.svg"), "w") as f:
        f.write(render_episode_svg(env, result))

    print(f"regenerated goldens in {GOLDEN}")


if __name__ == "__main__":
    main()
