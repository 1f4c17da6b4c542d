"""Tick-driven simulation of monitored data-collection dispatch.

Every placed container is a collection node. Tasks arrive over time and go to
the healthy node with the least queued work. Each tick every healthy node may
fail; the monitor notices after ``detection_delay`` ticks, moves the task that
was in flight (its progress is lost) to another healthy node, and restarts the
failed node ``restart_delay`` ticks later. Queued tasks that were not in flight
stay with their node and wait for the restart.
"""
from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .cluster import Scenario, StructuralError, check_placement, is_feasible

HEALTHY, FAILED, RESTARTING = "healthy", "failed", "restarting"
MAX_TICKS = 10**7
_DONE_EPS = 1e-9


class SimulationAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class CollectionTask:
    id: int
    work_units: float
    arrival_tick: int = 0
    node_affinity: Optional[int] = None

    def __post_init__(self):
        if self.work_units <= 0:
            raise ValueError(f"task {self.id}: work_units must be > 0")
        if self.arrival_tick < 0:
            raise ValueError(f"task {self.id}: arrival_tick must be >= 0")


@dataclass
class NodeState:
    container_id: int
    machine_id: int
    rate: float
    status: str = HEALTHY
    queue: deque = field(default_factory=deque)
    progress: float = 0.0  # on the head-of-queue task
    queued_work: float = 0.0
    detect_tick: int = -1
    restore_tick: int = -1


@dataclass(frozen=True)
class DispatchReport:
    makespan_ticks: int
    tasks_completed: int
    restarts: int
    failures: int
    completion_ticks: tuple  # indexed by task position in the input
    attempts: tuple
    completed_by: tuple  # container id that finished each task
    completed_work: float
    consumed_work: float
    events: tuple = ()  # (tick, kind, container_id), kind in {"fail", "detect", "restart"}


def simulate_collection(scenario: Scenario, placement, tasks: Sequence[CollectionTask],
                        failure_rate: float = 0.0, restart_delay: int = 3, seed: int = 0,
                        rate: float = 1.0, detection_delay: int = 0,
                        max_ticks: int = MAX_TICKS) -> DispatchReport:
    tasks = list(tasks)
    if not tasks:
        raise ValueError("no collection tasks given")
    if not 0.0 <= failure_rate < 1.0:
        raise ValueError("failure_rate must be in [0, 1)")
    if restart_delay < 1 or detection_delay < 0:
        raise ValueError("restart_delay must be >= 1 and detection_delay >= 0")
    if rate <= 0:
        raise ValueError("rate must be > 0")
    assign = check_placement(scenario, placement)
    if not is_feasible(scenario, placement):
        raise StructuralError("dispatch requires a feasible placement")
    n_nodes = scenario.n_containers
    for t in tasks:
        if t.node_affinity is not None and not 0 <= t.node_affinity < n_nodes:
            raise StructuralError(f"task {t.id}: affinity to unknown container {t.node_affinity}")

    rng = np.random.default_rng(seed)
    nodes = [NodeState(c, int(assign[c]), rate) for c in range(n_nodes)]
    work = [float(t.work_units) for t in tasks]
    arrivals = sorted(range(len(tasks)), key=lambda i: (tasks[i].arrival_tick, i))
    completion = [-1] * len(tasks)
    attempts = [0] * len(tasks)
    finisher = [-1] * len(tasks)
    backlog = deque()
    events = []
    consumed = 0.0
    done = 0
    nxt = 0

    def least_loaded(exclude=-1):
        best = None
        for nd in nodes:
            if nd.status == HEALTHY and nd.container_id != exclude:
                if best is None or nd.queued_work < best.queued_work:
                    best = nd
        return best

    def enqueue(i, exclude=-1):
        aff = tasks[i].node_affinity
        target = None
        if aff is not None and aff != exclude and nodes[aff].status == HEALTHY:
            target = nodes[aff]
        if target is None:
            target = least_loaded(exclude)
        if target is None:
            backlog.append(i)
            return
        target.queue.append(i)
        target.queued_work += work[i]

    def detect(nd, tick):
        nd.status = RESTARTING
        nd.restore_tick = tick + restart_delay
        events.append((tick, "detect", nd.container_id))
        if nd.queue and nd.progress > 0.0:
            i = nd.queue.popleft()
            nd.queued_work -= work[i]
            nd.progress = 0.0
            enqueue(i, exclude=nd.container_id)

    tick = 0
    while True:
        if tick >= max_ticks:
            raise SimulationAborted(
                f"safety cap of {max_ticks} ticks reached with {len(tasks) - done} tasks unfinished")
        for nd in nodes:
            if nd.status == RESTARTING and nd.restore_tick == tick:
                nd.status = HEALTHY
                events.append((tick, "restart", nd.container_id))
            elif nd.status == FAILED and nd.detect_tick == tick:
                detect(nd, tick)

        pending, backlog_len = [], len(backlog)
        for _ in range(backlog_len):
            pending.append(backlog.popleft())
        while nxt < len(arrivals) and tasks[arrivals[nxt]].arrival_tick <= tick:
            pending.append(arrivals[nxt])
            nxt += 1
        for i in pending:
            enqueue(i)

        if failure_rate > 0.0:
            healthy = [nd for nd in nodes if nd.status == HEALTHY]
            draws = rng.random(len(healthy))
            for nd, u in zip(healthy, draws):
                if u < failure_rate:
                    nd.status = FAILED
                    events.append((tick, "fail", nd.container_id))
                    if detection_delay == 0:
                        detect(nd, tick)
                    else:
                        nd.detect_tick = tick + detection_delay

        for nd in nodes:
            if nd.status != HEALTHY:
                continue
            budget = nd.rate
            while budget > 0.0 and nd.queue:
                i = nd.queue[0]
                if nd.progress == 0.0:
                    attempts[i] += 1
                use = min(budget, work[i] - nd.progress)
                nd.progress += use
                consumed += use
                budget -= use
                if work[i] - nd.progress <= _DONE_EPS:
                    nd.queue.popleft()
                    nd.queued_work -= work[i]
                    nd.progress = 0.0
                    completion[i] = tick + 1
                    finisher[i] = nd.container_id
                    done += 1
        tick += 1
        if done == len(tasks):
            break

    makespan = tick
    # restarts still pending at makespan happen afterwards; record them
    for nd in nodes:
        if nd.status == FAILED:
            events.append((nd.detect_tick, "detect", nd.container_id))
            events.append((nd.detect_tick + restart_delay, "restart", nd.container_id))
        elif nd.status == RESTARTING:
            events.append((nd.restore_tick, "restart", nd.container_id))
    events.sort(key=lambda e: (e[0], e[2], ("fail", "detect", "restart").index(e[1])))

    return DispatchReport(
        makespan_ticks=makespan,
        tasks_completed=done,
        restarts=sum(1 for e in events if e[1] == "restart"),
        failures=sum(1 for e in events if e[1] == "fail"),
        completion_ticks=tuple(completion),
        attempts=tuple(attempts),
        completed_by=tuple(finisher),
        completed_work=float(sum(work)),
        consumed_work=consumed,
        events=tuple(events),
    )


def dispatch_with_scheduler(scale_config, tasks, scheduler_choice: str, weights=None, ga_params=None,
                            failure_rate: float = 0.0, restart_delay: int = 3, seed: int = 0,
                            **sim_kwargs) -> DispatchReport:
    """Generate the scenario, place it with ``scheduler_choice``, then simulate."""
    from .fitness import DEFAULT_WEIGHTS
    from .ga import GAParams
    from .harness import generate_scenario, run_algorithm

    weights = weights or DEFAULT_WEIGHTS
    ga_params = ga_params or GAParams()
    scenario = generate_scenario(scale_config, seed)
    placement = run_algorithm(scheduler_choice, scenario, weights, ga_params, seed)
    return simulate_collection(scenario, placement, tasks, failure_rate, restart_delay, seed,
                               **sim_kwargs)


# -- files ----------------------------------------------------------------

def generate_tasks(n: int, seed: int = 0, work_range=(5, 20), arrival_span: int = 10) -> List[CollectionTask]:
    rng = np.random.default_rng(seed)
    w = rng.integers(work_range[0], work_range[1] + 1, size=n)
    arr = rng.integers(0, arrival_span + 1, size=n) if arrival_span > 0 else np.zeros(n, dtype=int)
    return [CollectionTask(i, int(w[i]), int(arr[i])) for i in range(n)]


def load_tasks(path) -> List[CollectionTask]:
    """Read a JSON list of ``{"work_units", "arrival_tick", "affinity"?}`` objects."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, list):
        raise ValueError(f"{path}: expected a JSON list of tasks")
    try:
        return [CollectionTask(i, t["work_units"], t.get("arrival_tick", 0), t.get("affinity"))
                for i, t in enumerate(doc)]
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"{path}: malformed task entry ({exc!r})") from exc


def save_tasks(tasks: Sequence[CollectionTask], path) -> None:
    doc = []
    for t in tasks:
        d = {"work_units": t.work_units, "arrival_tick": t.arrival_tick}
        if t.node_affinity is not None:
            d["affinity"] = t.node_affinity
        doc.append(d)
    Path(path).write_text(json.dumps(doc) + "\n")


REPORT_HEADER = ["task", "arrival_tick", "work_units", "completion_tick", "attempts", "node"]
SUMMARY_HEADER = ["makespan_ticks", "tasks_completed", "restarts", "failures",
                  "completed_work", "consumed_work"]


def write_report_csv(report: DispatchReport, tasks: Sequence[CollectionTask], path) -> Path:
    """Per-task rows at ``path``; one summary row beside it as ``<stem>_summary.csv``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for k, t in enumerate(tasks):
            w.writerow([t.id, t.arrival_tick, t.work_units, report.completion_ticks[k],
                        report.attempts[k], report.completed_by[k]])
    summary = path.with_name(path.stem + "_summary.csv")
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerow([report.makespan_ticks, report.tasks_completed, report.restarts, report.failures,
                    repr(report.completed_work), repr(report.consumed_work)])
    return summary
