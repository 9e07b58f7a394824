"""Command line interface.

cogx run      — run seeded trials of one task with one reasoner
cogx compare  — run an env x task x reasoner matrix and emit the table
cogx validate — check an environment file against its invariants

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from cogx import kernels
from cogx.errors import CogxError, ParseError, ValidationError
from cogx.harness import (
    DEFAULT_MAX_STEPS,
    DEFAULT_TRIALS,
    BUNDLED_ENVS,
    EpisodeConfig,
    compare_reasoners,
    emit_outputs,
    load_environment,
    resolve_env_path,
    run_trials,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    p = _Parser(prog="cogx", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run seeded trials of one task")
    run.add_argument("--env", required=True,
                     help=f"environment file or bundled name {BUNDLED_ENVS}")
    run.add_argument("--task", required=True, help="task id, e.g. FE1")
    run.add_argument("--reasoner", required=True,
                     choices=["vefep", "scripted", "llm"])
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    run.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--live", action="store_true",
                     help="use the real chat endpoint instead of the mock")
    run.add_argument("--endpoint", default="", help="chat endpoint URL (live)")
    run.add_argument("--model", default="", help="model name (live)")
    run.add_argument("--addendum", choices=["a", "b"], default="a",
                     help="which model-specific prompt addendum to render")
    run.add_argument("--no-svg", action="store_true")

    cmp_ = sub.add_parser("compare", help="run a full comparison matrix")
    cmp_.add_argument("--suite", default="",
                      help="JSON suite file; defaults to the bundled full matrix")
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--workers", type=int, default=1)

    val = sub.add_parser("validate", help="validate an environment file")
    val.add_argument("--env", required=True)

    bench = sub.add_parser("kernels", help="print the active kernel backend")
    del bench
    return p


def cmd_run(args) -> int:
    config = EpisodeConfig(
        env_path=str(resolve_env_path(args.env)), task_id=args.task,
        reasoner=args.reasoner, seed=args.seed, max_steps=args.max_steps,
        live=args.live, llm_endpoint=args.endpoint, llm_model=args.model,
        addendum=args.addendum,
    )
    env = load_environment(config.env_path)
    summary, results = run_trials(config, args.trials, env=env,
                                  workers=args.workers)
    formats = ["jsonl", "csv"] if args.no_svg else ["jsonl", "csv", "svg"]
    written = emit_outputs(results, args.out, formats=formats,
                           env_lookup={env.name: env})
    print(f"{len(results)} episode(s): {summary.successes} success, "
          f"{summary.timeouts} timeout")
    if summary.mean_path is not None:
        print(f"mean path {summary.mean_path:.1f} m, "
              f"median {summary.median_path:.1f} m "
              f"(direct {results[0].direct_path:.1f} m)")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.suite:
        with open(args.suite, "r", encoding="utf-8") as f:
            suite = json.load(f)
    else:
        suite = {}
    envs = suite.get("envs", list(BUNDLED_ENVS))
    reasoners = suite.get("reasoners", ["scripted", "vefep"])
    trials = int(suite.get("trials", DEFAULT_TRIALS))
    base_seed = int(suite.get("base_seed", 0))
    max_steps = int(suite.get("max_steps", DEFAULT_MAX_STEPS))
    tasks = suite.get("tasks")

    rows = compare_reasoners(envs, reasoners, trials, base_seed,
                             task_filter=tasks, max_steps=max_steps,
                             workers=args.workers)
    all_results = [r for row in rows for r in row["results"]]
    env_lookup = {}
    for spec in envs:
        env = load_environment(resolve_env_path(spec))
        env_lookup[env.name] = env
    emit_outputs(all_results, args.out, formats=("jsonl", "csv"),
                 summary_rows=rows)
    header = (f"{'env':<10}{'task':<6}{'reasoner':<10}{'direct':>8}"
              f"{'mean':>8}{'median':>8}{'rate':>7}{'timeout':>8}")
    print(header)
    for row in rows:
        mean = f"{row['mean_path']:.1f}" if row["mean_path"] is not None else "-"
        med = f"{row['median_path']:.1f}" if row["median_path"] is not None else "-"
        print(f"{row['env']:<10}{row['task']:<6}{row['reasoner']:<10}"
              f"{row['direct_path']:>8.1f}{mean:>8}{med:>8}"
              f"{row['success_rate']:>7.2f}{row['timeouts']:>8}")
    return EXIT_OK


def cmd_validate(args) -> int:
    env = load_environment(resolve_env_path(args.env))
    print(f"{env.name}: {env.width}x{env.height} cells at {env.cell_size} m, "
          f"area {env.area_m2:.1f} m2, {len(env.objects)} objects, "
          f"{len(env.tasks)} tasks -- OK")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help; map everything else to the usage code
        return int(e.code) if e.code in (0, EXIT_USAGE) else EXIT_USAGE
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "kernels":
            print(f"kernel backend: {kernels.backend_name()} "
                  f"(compiled available: {kernels.compiled_available()})")
            return EXIT_OK
    except (ParseError, ValidationError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except CogxError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
