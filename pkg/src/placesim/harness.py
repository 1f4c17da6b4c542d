"""Scenario generation, exhaustive oracle, and the four-algorithm experiment."""
from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .baselines import BASELINES
from .cluster import (CommGraph, ContainerSpec, PhysicalMachine, Placement, Scenario,
                      ScenarioInfeasibleError, active_machine_count, is_feasible,
                      machine_loads)
from .fitness import DEFAULT_WEIGHTS, FitnessWeights, comm_cost, fitness
from .ga import GAParams, dsom_schedule, first_fit_decreasing

ALGORITHMS = ("dsom", "maxutil", "fcfs", "roundrobin")

MACHINE_CAPACITY = (100, 100)
DEMAND_RANGE = (5, 20)
# tried in order for the built-in scales when the default range overfills them
BUILTIN_DEMAND_RANGES = ((5, 20), (4, 12), (4, 11))
MAX_FILL = 0.8
GENERATION_ATTEMPTS = 50
SERVICE_SIZE = (2, 6)
INTRA_WEIGHT = (1, 10)
INTER_PROB = 0.02
INTER_WEIGHT = (1, 5)
BRUTE_FORCE_LIMIT = 10**6


class GenerationError(RuntimeError):
    pass


class OracleTooLargeError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, cell, cause):
        super().__init__(f"experiment cell {cell} failed: {cause}")
        self.cell = cell
        self.cause = cause


@dataclass(frozen=True)
class ScaleConfig:
    name: str
    num_containers: int
    num_machines: int

    def __post_init__(self):
        if self.num_containers < 1 or self.num_machines < 1:
            raise ValueError("scale needs at least one container and one machine")

    @classmethod
    def parse(cls, token: str) -> "ScaleConfig":
        """``S1``/``S2``/``S3`` or a custom ``<containers>x<machines>``."""
        token = token.strip()
        if token.upper() in SCALES:
            return SCALES[token.upper()]
        try:
            n, m = (int(v) for v in token.lower().split("x"))
        except ValueError:
            raise ValueError(f"unknown scale {token!r}: use S1, S2, S3 or NxM") from None
        return cls(f"{n}x{m}", n, m)


SCALES = {
    "S1": ScaleConfig("S1", 80, 8),
    "S2": ScaleConfig("S2", 358, 35),
    "S3": ScaleConfig("S3", 1125, 112),
}


def _build_comm(n: int, rng) -> CommGraph:
    perm = rng.permutation(n)
    service = np.empty(n, dtype=np.int64)
    pos = sid = 0
    while pos < n:
        size = int(rng.integers(SERVICE_SIZE[0], SERVICE_SIZE[1] + 1))
        service[perm[pos:pos + size]] = sid
        pos += size
        sid += 1
    ia, ib = np.triu_indices(n, k=1)
    same = service[ia] == service[ib]
    draw = rng.random(ia.size)
    intra_w = rng.integers(INTRA_WEIGHT[0], INTRA_WEIGHT[1] + 1, size=ia.size)
    inter_w = rng.integers(INTER_WEIGHT[0], INTER_WEIGHT[1] + 1, size=ia.size)
    keep = same | (draw < INTER_PROB)
    w = np.where(same, intra_w, inter_w)
    edges = tuple(zip(ia[keep].tolist(), ib[keep].tolist(), w[keep].tolist()))
    return CommGraph(edges)


def generate_scenario(config: ScaleConfig, seed: int, demand_range: Optional[Sequence[int]] = None,
                      machine_capacity: Sequence[float] = MACHINE_CAPACITY) -> Scenario:
    """Identical machines, integer demands, service-clustered traffic graph.

    Demands are redrawn until aggregate demand is at most 80% of aggregate
    capacity in both dimensions and first-fit-decreasing succeeds. Built-in
    scales step down through narrower demand ranges when the default one
    cannot meet that bound; the range used is recorded on the scenario.
    """
    root = np.random.SeedSequence(seed)
    graph_ss, demand_ss = root.spawn(2)
    n, m = config.num_containers, config.num_machines
    cpu_cap, mem_cap = machine_capacity
    machines = tuple(PhysicalMachine(i, cpu_cap, mem_cap) for i in range(m))
    comm = _build_comm(n, np.random.default_rng(graph_ss))

    if demand_range is not None:
        ranges = [tuple(demand_range)]
    elif config.name in SCALES and SCALES[config.name] == config:
        ranges = list(BUILTIN_DEMAND_RANGES)
    else:
        ranges = [DEMAND_RANGE]

    attempt_seeds = demand_ss.spawn(GENERATION_ATTEMPTS * len(ranges))
    k = 0
    for lo, hi in ranges:
        for _ in range(GENERATION_ATTEMPTS):
            rng = np.random.default_rng(attempt_seeds[k])
            k += 1
            d = rng.integers(lo, hi + 1, size=(n, 2))
            if d[:, 0].sum() > MAX_FILL * cpu_cap * m or d[:, 1].sum() > MAX_FILL * mem_cap * m:
                continue
            containers = tuple(ContainerSpec(i, int(d[i, 0]), int(d[i, 1])) for i in range(n))
            scen = Scenario(config.name, machines, containers, comm, (lo, hi))
            if first_fit_decreasing(scen) is None:
                continue
            return scen
    raise GenerationError(
        f"scale {config.name} ({n} containers / {m} machines): no demand draw met the "
        f"{MAX_FILL:.0%} aggregate bound in {k} attempts")


def brute_force_optimum(scenario: Scenario, weights: FitnessWeights = DEFAULT_WEIGHTS):
    """Exhaustive argmax of fitness over all feasible total assignments.

    Ties resolve to the lexicographically smallest assignment vector.
    """
    n, m = scenario.n_containers, scenario.n_machines
    if n == 0:
        raise ValueError("oracle needs at least one container")
    if m ** n > BRUTE_FORCE_LIMIT:
        raise OracleTooLargeError(f"{m}^{n} assignments exceeds the {BRUTE_FORCE_LIMIT} limit")
    cpu = [c.cpu_demand for c in scenario.containers]
    mem = [c.mem_demand for c in scenario.containers]
    cap_c = [x.cpu_capacity for x in scenario.machines]
    cap_m = [x.mem_capacity for x in scenario.machines]

    best = best_fit = None
    for assign in itertools.product(range(m), repeat=n):
        uc = [0.0] * m
        um = [0.0] * m
        for c, h in enumerate(assign):
            uc[h] += cpu[c]
            um[h] += mem[c]
        if any(uc[h] > cap_c[h] + 1e-9 or um[h] > cap_m[h] + 1e-9 for h in range(m)):
            continue
        f = fitness(scenario, assign, weights)
        if best_fit is None or f.total > best_fit.total:
            best, best_fit = assign, f
    if best is None:
        raise ScenarioInfeasibleError(f"scenario {scenario.name!r} has no feasible assignment")
    return Placement(best), best_fit


# -- experiments ----------------------------------------------------------

@dataclass(frozen=True)
class MetricsRecord:
    scenario_name: str
    algorithm: str
    seed: int
    machines_used: int
    avg_utilization: float
    comm_cost: float
    fitness_total: float
    wall_time: Optional[float] = None


def measure(scenario: Scenario, placement, weights: FitnessWeights):
    """Machines used, average utilization, comm cost and fitness, recomputed from the placement."""
    if not is_feasible(scenario, placement):
        raise ScenarioInfeasibleError("scheduler returned an infeasible placement")
    loads, active = machine_loads(scenario, placement)
    return (active_machine_count(scenario, placement),
            float(loads[active].mean()),
            comm_cost(scenario, placement),
            fitness(scenario, placement, weights).total)


def run_algorithm(name: str, scenario: Scenario, weights: FitnessWeights, ga_params: GAParams,
                  seed: int) -> Placement:
    if name == "dsom":
        return dsom_schedule(scenario, weights, replace(ga_params, seed=seed)).best_placement
    try:
        return BASELINES[name](scenario)
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}") from None


def _run_cell(args):
    config, seed, algorithms, weights, ga_params = args
    records = []
    try:
        scenario = generate_scenario(config, seed)
    except Exception as exc:
        raise ExperimentError((config.name, "*", seed), exc) from exc
    for alg in algorithms:
        try:
            t0 = time.perf_counter()
            placement = run_algorithm(alg, scenario, weights, ga_params, seed)
            wall = time.perf_counter() - t0
            used, util, comm, fit = measure(scenario, placement, weights)
        except Exception as exc:
            raise ExperimentError((config.name, alg, seed), exc) from exc
        records.append(MetricsRecord(config.name, alg, seed, used, util, comm, fit, wall))
    return records


def run_experiment(scale_configs: Iterable[ScaleConfig], algorithms: Iterable[str],
                   seeds: Iterable[int], weights: FitnessWeights = DEFAULT_WEIGHTS,
                   ga_params: GAParams = GAParams(), jobs: int = 1) -> List[MetricsRecord]:
    """One record per (scale, algorithm, seed); every algorithm in a cell sees the same scenario."""
    scale_configs, algorithms, seeds = list(scale_configs), list(algorithms), list(seeds)
    if not (scale_configs and algorithms and seeds):
        raise ValueError("run_experiment needs at least one scale, algorithm and seed")
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r}; choose from {', '.join(ALGORITHMS)}")
    cells = [(cfg, seed, algorithms, weights, ga_params) for cfg in scale_configs for seed in seeds]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    return [r for chunk in chunks for r in chunk]


# -- CSV output -----------------------------------------------------------

RAW_HEADER = ["scenario", "algorithm", "seed", "machines_used", "avg_utilization",
              "comm_cost", "fitness", "wall_time_s"]
FIGURES = (
    ("summary_machines_used", "machines_used"),
    ("summary_avg_utilization", "avg_utilization"),
    ("summary_comm_cost", "comm_cost"),
)
SUMMARY_HEADER = ["scenario", "algorithm", "n", "median", "q1", "q3"]


def _fmt(x) -> str:
    return repr(float(x))


def write_raw_csv(records: Sequence[MetricsRecord], path, include_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in records:
            wall = "" if (not include_timing or r.wall_time is None) else _fmt(r.wall_time)
            w.writerow([r.scenario_name, r.algorithm, r.seed, r.machines_used,
                        _fmt(r.avg_utilization), _fmt(r.comm_cost), _fmt(r.fitness_total), wall])


def read_records(path) -> List[MetricsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RAW_HEADER:
        raise ValueError(f"{path}: not a raw results CSV")
    return [MetricsRecord(s, a, int(seed), int(used), float(util), float(comm), float(fit),
                          float(wall) if wall else None)
            for s, a, seed, used, util, comm, fit, wall in rows[1:]]


def summarize(records: Sequence[MetricsRecord], metric: str):
    """(scenario, algorithm, n, median, q1, q3) rows in first-appearance order."""
    groups = {}
    for r in records:
        groups.setdefault((r.scenario_name, r.algorithm), []).append(getattr(r, metric))
    rows = []
    for (scen, alg), vals in groups.items():
        q1, med, q3 = np.percentile(np.asarray(vals, dtype=float), [25, 50, 75])
        rows.append((scen, alg, len(vals), float(med), float(q1), float(q3)))
    return rows


def _plot(rows, title, ylabel, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scenarios = list(dict.fromkeys(r[0] for r in rows))
    algorithms = list(dict.fromkeys(r[1] for r in rows))
    med = {(r[0], r[1]): r[3] for r in rows}
    width = 0.8 / max(len(algorithms), 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, alg in enumerate(algorithms):
        xs = [i + k * width for i in range(len(scenarios))]
        ax.bar(xs, [med.get((s, alg), math.nan) for s in scenarios], width, label=alg)
    ax.set_xticks([i + width * (len(algorithms) - 1) / 2 for i in range(len(scenarios))])
    ax.set_xticklabels(scenarios)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_results(records: Sequence[MetricsRecord], out_path, include_timing: bool = True,
                 plots: bool = False) -> List[Path]:
    """Write ``raw.csv`` plus one median/quartile summary CSV per figure into ``out_path``.

    With ``include_timing=False`` the raw CSV leaves ``wall_time_s`` empty (so
    reruns are byte-identical) and timings go to ``timings.csv`` instead.
    """
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "raw.csv"]
    write_raw_csv(records, written[0], include_timing)
    if not include_timing:
        tpath = out / "timings.csv"
        with open(tpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "algorithm", "seed", "wall_time_s"])
            for r in records:
                w.writerow([r.scenario_name, r.algorithm, r.seed,
                            "" if r.wall_time is None else _fmt(r.wall_time)])
        written.append(tpath)
    for fname, metric in FIGURES:
        rows = summarize(records, metric)
        path = out / f"{fname}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            for scen, alg, n, med, q1, q3 in rows:
                w.writerow([scen, alg, n, _fmt(med), _fmt(q1), _fmt(q3)])
        written.append(path)
        if plots and rows:
            svg = out / f"{fname}.svg"
            _plot(rows, fname, metric, svg)
            written.append(svg)
    return written
