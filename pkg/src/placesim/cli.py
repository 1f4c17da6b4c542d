"""Command-line entry point: ``placesim {schedule,experiment,oracle,dispatch}``.

Exit codes: 0 success, 2 usage error (bad flags, weights, unreadable input),
1 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import kernels
from .cluster import Scenario, StructuralError
from .fitness import FitnessWeights, fitness
from .ga import GAParams, dsom_schedule
from .harness import (ALGORITHMS, ScaleConfig, brute_force_optimum, emit_results,
                      generate_scenario, measure, run_algorithm, run_experiment)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
OUTPUT_ENV = "PLACESIM_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def _weights(text):
    try:
        return FitnessWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_ga_flags(p):
    d = GAParams()
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--population", type=int, default=d.population_size)
    g.add_argument("--generations", type=int, default=d.max_generations)
    g.add_argument("--stall", type=int, default=d.stall_generations)
    g.add_argument("--tournament", type=int, default=d.tournament_size)
    g.add_argument("--crossover-rate", type=float, default=d.crossover_rate)
    g.add_argument("--mutation-rate", type=float, default=d.mutation_rate)


def _add_scenario_flags(p):
    g = p.add_argument_group("scenario")
    g.add_argument("--scenario", help="scenario JSON file")
    g.add_argument("--scale", help="S1, S2, S3 or NxM")
    g.add_argument("--containers", type=int, help="custom scale: number of containers")
    g.add_argument("--machines", type=int, help="custom scale: number of machines")
    g.add_argument("--scenario-seed", type=int, default=0)


def _ga_params(args, seed):
    try:
        return GAParams(args.population, args.generations, args.stall, args.tournament,
                        args.crossover_rate, args.mutation_rate, seed)
    except ValueError as exc:
        raise UsageError(str(exc))


def _scenario(args) -> Scenario:
    sources = [args.scenario is not None, args.scale is not None,
               args.containers is not None or args.machines is not None]
    if sum(sources) != 1:
        raise UsageError("give exactly one of --scenario, --scale, or --containers/--machines")
    if args.scenario is not None:
        try:
            return Scenario.load(args.scenario)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read scenario {args.scenario}: {exc}")
    if args.scale is not None:
        try:
            cfg = ScaleConfig.parse(args.scale)
        except ValueError as exc:
            raise UsageError(str(exc))
    else:
        if args.containers is None or args.machines is None:
            raise UsageError("--containers and --machines go together")
        try:
            cfg = ScaleConfig(f"{args.containers}x{args.machines}", args.containers, args.machines)
        except ValueError as exc:
            raise UsageError(str(exc))
    return generate_scenario(cfg, args.scenario_seed)


def _print_config(cmd, **cfg):
    cfg = {"command": cmd, "backend": kernels.BACKEND, **cfg}
    print("config " + json.dumps(cfg, sort_keys=True, default=str))


def cmd_schedule(args):
    scenario = _scenario(args)
    ga = _ga_params(args, args.seed)
    out = _out_dir(args)
    _print_config("schedule", scenario=scenario.name, scenario_source=args.scenario or args.scale
                  or f"{args.containers}x{args.machines}", scenario_seed=args.scenario_seed,
                  algorithm=args.algorithm, weights=args.weights.as_tuple(), ga=asdict(ga),
                  out=str(out))
    placement = run_algorithm(args.algorithm, scenario, args.weights, ga, args.seed)
    used, util, comm, fit = measure(scenario, placement, args.weights)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"placement_{scenario.name}_{args.algorithm}.json"
    path.write_text(json.dumps({
        "scenario": scenario.name,
        "algorithm": args.algorithm,
        "assignment": list(placement.assignment),
        "machines_used": used,
        "avg_utilization": util,
        "comm_cost": comm,
        "fitness": fit,
    }) + "\n")
    print(f"metrics scenario={scenario.name} algorithm={args.algorithm} machines_used={used} "
          f"avg_utilization={util!r} comm_cost={comm!r} fitness={fit!r} placement={path}")


def cmd_experiment(args):
    try:
        scales = [ScaleConfig.parse(s) for s in _csv_list(args.scales)]
    except ValueError as exc:
        raise UsageError(str(exc))
    algorithms = _csv_list(args.algorithms)
    bad = [a for a in algorithms if a not in ALGORITHMS]
    if bad or not algorithms:
        raise UsageError(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)}")
    if args.seed_list:
        try:
            seeds = [int(s) for s in _csv_list(args.seed_list)]
        except ValueError:
            raise UsageError("--seed-list must be comma-separated integers")
    else:
        seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    if not seeds:
        raise UsageError("no seeds to run")
    ga = _ga_params(args, 0)
    out = _out_dir(args)
    jobs = args.jobs or (os.cpu_count() or 1)
    _print_config("experiment", scales=[s.name for s in scales], algorithms=algorithms,
                  seeds=seeds, weights=args.weights.as_tuple(), ga=asdict(ga), jobs=jobs,
                  timing=args.timing, plots=args.plots, out=str(out))
    records = run_experiment(scales, algorithms, seeds, args.weights, ga, jobs=jobs)
    paths = emit_results(records, out, include_timing=(args.timing == "inline"), plots=args.plots)
    for p in paths:
        print(f"wrote {p}")


def cmd_oracle(args):
    scenario = _scenario(args)
    _print_config("oracle", scenario=scenario.name, scenario_seed=args.scenario_seed,
                  weights=args.weights.as_tuple(), check_dsom=args.check_dsom)
    placement, best = brute_force_optimum(scenario, args.weights)
    print(f"optimum assignment={list(placement.assignment)} fitness={best.total!r} "
          f"D={best.D} Z={best.Z!r} U={best.U!r} N={best.N!r}")
    if args.check_dsom:
        ga = _ga_params(args, args.seed)
        res = dsom_schedule(scenario, args.weights, ga)
        gap = best.total - res.best_fitness.total
        print(f"dsom fitness={res.best_fitness.total!r} gap={gap!r} "
              f"match={abs(gap) <= 1e-9}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"oracle_{scenario.name}.json").write_text(json.dumps({
            "scenario": scenario.to_dict(),
            "assignment": list(placement.assignment),
            "fitness": best.total,
        }) + "\n")


def cmd_dispatch(args):
    from .dispatch import generate_tasks, load_tasks, simulate_collection, write_report_csv

    scenario = _scenario(args)
    if args.tasks:
        try:
            tasks = load_tasks(args.tasks)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read tasks {args.tasks}: {exc}")
    else:
        tasks = generate_tasks(args.num_tasks, args.task_seed)
    if not 0.0 <= args.failure_rate < 1.0:
        raise UsageError("--failure-rate must be in [0, 1)")
    ga = _ga_params(args, args.seed)
    out = _out_dir(args)
    _print_config("dispatch", scenario=scenario.name, scenario_seed=args.scenario_seed,
                  algorithm=args.algorithm, tasks=args.tasks or f"generated:{args.num_tasks}",
                  task_seed=args.task_seed, failure_rate=args.failure_rate,
                  restart_delay=args.restart_delay, detection_delay=args.detection_delay,
                  rate=args.rate, seed=args.seed, weights=args.weights.as_tuple(), ga=asdict(ga),
                  out=str(out))
    placement = run_algorithm(args.algorithm, scenario, args.weights, ga, args.seed)
    report = simulate_collection(scenario, placement, tasks, args.failure_rate, args.restart_delay,
                                 args.seed, rate=args.rate, detection_delay=args.detection_delay)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"dispatch_{scenario.name}_{args.algorithm}.csv"
    summary = write_report_csv(report, tasks, path)
    print(f"report makespan_ticks={report.makespan_ticks} tasks_completed={report.tasks_completed} "
          f"restarts={report.restarts} consumed_work={report.consumed_work!r} csv={path} "
          f"summary={summary}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="placesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ga=True):
        p.add_argument("--weights", type=_weights, default=FitnessWeights(),
                       help="alpha,beta,lambda (default 0.2,0.5,0.3)")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
        if ga:
            _add_ga_flags(p)

    p = sub.add_parser("schedule", help="place one scenario with one algorithm")
    _add_scenario_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="dsom")
    p.add_argument("--seed", type=int, default=0, help="GA seed")
    common(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("experiment", help="four-algorithm comparison over scales and seeds")
    p.add_argument("--scales", default="S1,S2,S3")
    p.add_argument("--algorithms", default=",".join(ALGORITHMS))
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--seed-list", help="explicit comma-separated seeds (overrides --seeds)")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (default: CPU count)")
    p.add_argument("--timing", choices=("sidecar", "inline"), default="sidecar",
                   help="sidecar: wall times go to timings.csv so raw.csv is reproducible")
    p.add_argument("--plots", action="store_true", help="also write SVG bar charts")
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="exhaustive optimum of a tiny scenario")
    _add_scenario_flags(p)
    p.add_argument("--check-dsom", action="store_true", help="also run DSOM and report the gap")
    p.add_argument("--seed", type=int, default=0, help="GA seed for --check-dsom")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("dispatch", help="simulate monitored collection on a placement")
    _add_scenario_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="dsom")
    p.add_argument("--tasks", help="task list JSON file")
    p.add_argument("--num-tasks", type=int, default=100)
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--failure-rate", type=float, default=0.01)
    p.add_argument("--restart-delay", type=int, default=3)
    p.add_argument("--detection-delay", type=int, default=0)
    p.add_argument("--rate", type=float, default=1.0, help="work units per node per tick")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_dispatch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        args.func(args)
    except UsageError as exc:
        print(f"placesim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StructuralError, OSError) as exc:
        print(f"placesim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, StructuralError) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic for any runtime failure
        print(f"placesim {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
