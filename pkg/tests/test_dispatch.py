import numpy as np
import pytest

from placesim.cluster import Placement, StructuralError, make_scenario
from placesim.dispatch import (CollectionTask, SimulationAborted, dispatch_with_scheduler,
                               generate_tasks, load_tasks, save_tasks, simulate_collection,
                               write_report_csv)
from placesim.ga import GAParams
from placesim.harness import SCALES, ScaleConfig

QUICK_GA = GAParams(max_generations=20)


def nodes(k, per_machine=4):
    m = (k + per_machine - 1) // per_machine
    s = make_scenario("n", [(100, 100)] * m, [(10, 10)] * k)
    return s, Placement([c // per_machine for c in range(k)])


def test_single_task_single_node():
    s, p = nodes(1)
    r = simulate_collection(s, p, [CollectionTask(0, 10)], rate=2.0)
    assert r.makespan_ticks == 5
    assert r.restarts == 0 and r.failures == 0
    assert r.completion_ticks == (5,)


@pytest.mark.parametrize("k", [1, 3, 8])
@pytest.mark.parametrize("work,rate", [(12, 1.0), (12, 3.0), (10, 4.0)])
def test_perfect_parallelism(k, work, rate):
    s, p = nodes(k)
    tasks = [CollectionTask(i, work) for i in range(k)]
    r = simulate_collection(s, p, tasks, rate=rate)
    assert r.makespan_ticks == int(np.ceil(work / rate))
    assert sorted(r.completed_by) == list(range(k))


def test_arrivals_and_queueing():
    s, p = nodes(2)
    tasks = [CollectionTask(0, 4), CollectionTask(1, 4), CollectionTask(2, 2, arrival_tick=1)]
    r = simulate_collection(s, p, tasks)
    # task 2 arrives at tick 1 and queues behind one of the busy nodes
    assert r.completion_ticks == (4, 4, 6)
    assert r.makespan_ticks == 6


def test_late_arrival_idle_gap():
    s, p = nodes(1)
    r = simulate_collection(s, p, [CollectionTask(0, 3, arrival_tick=10)])
    assert r.makespan_ticks == 13


def test_affinity_honoured_when_healthy():
    s, p = nodes(3)
    tasks = [CollectionTask(i, 5, node_affinity=2) for i in range(3)]
    r = simulate_collection(s, p, tasks)
    assert r.completed_by == (2, 2, 2)
    assert r.makespan_ticks == 15


def _failure_free(s, p, tasks):
    return simulate_collection(s, p, tasks).makespan_ticks


@pytest.fixture(scope="module")
def fifty_runs():
    s, p = nodes(20)
    tasks = generate_tasks(100, seed=5)
    base = _failure_free(s, p, tasks)
    return base, tasks, [simulate_collection(s, p, tasks, 0.01, 3, seed) for seed in range(50)]


def test_failures_still_complete_every_task(fifty_runs):
    _, _, runs = fifty_runs
    assert any(r.failures > 0 for r in runs)
    for r in runs:
        assert r.tasks_completed == 100
        assert all(t > 0 for t in r.completion_ticks)


def test_failures_slow_collection_down_in_aggregate(fifty_runs):
    base, _, runs = fifty_runs
    spans = [r.makespan_ticks for r in runs]
    assert np.median(spans) >= base
    assert sum(s < base for s in spans) <= 5


@pytest.mark.xfail(strict=True, reason="list-scheduling anomaly: a requeue can rebalance queues")
def test_failures_never_shorten_makespan_per_seed(fifty_runs):
    base, _, runs = fifty_runs
    assert all(r.makespan_ticks >= base for r in runs)


def test_conservation(fifty_runs):
    _, tasks, runs = fifty_runs
    total = sum(t.work_units for t in tasks)
    for r in runs:
        assert r.completed_work == total
        assert r.consumed_work >= r.completed_work - 1e-9
        if all(a == 1 for a in r.attempts):
            assert r.consumed_work == pytest.approx(total)
    assert any(r.consumed_work > r.completed_work for r in runs)


def test_each_failure_has_one_restart(fifty_runs):
    _, _, runs = fifty_runs
    for r in runs:
        fails = [(t, c) for t, k, c in r.events if k == "fail"]
        restarts = [(t, c) for t, k, c in r.events if k == "restart"]
        assert len(fails) == len(restarts) == r.failures == r.restarts
        assert sorted((t + 3, c) for t, c in fails) == sorted(restarts)


def test_detection_delay_shifts_restart():
    s, p = nodes(6)
    tasks = generate_tasks(30, seed=1)
    r = simulate_collection(s, p, tasks, failure_rate=0.05, restart_delay=2, seed=3, detection_delay=4)
    fails = sorted((t, c) for t, k, c in r.events if k == "fail")
    restarts = sorted((t, c) for t, k, c in r.events if k == "restart")
    assert r.failures > 0
    assert sorted((t + 6, c) for t, c in fails) == restarts
    assert r.tasks_completed == 30


def test_zero_failure_rate_no_restarts():
    s, p = nodes(5)
    r = simulate_collection(s, p, generate_tasks(40, seed=2), failure_rate=0.0, seed=9)
    assert r.restarts == 0 and r.events == ()
    assert all(a == 1 for a in r.attempts)


def test_makespan_monotone_in_failure_rate():
    s, p = nodes(10)
    tasks = generate_tasks(80, seed=4)
    low = [simulate_collection(s, p, tasks, 0.001, 3, seed).makespan_ticks for seed in range(30)]
    high = [simulate_collection(s, p, tasks, 0.01, 3, seed).makespan_ticks for seed in range(30)]
    assert np.median(high) >= np.median(low)


def test_deterministic():
    s, p = nodes(7)
    tasks = generate_tasks(50, seed=0)
    a = simulate_collection(s, p, tasks, 0.02, 3, seed=11)
    b = simulate_collection(s, p, tasks, 0.02, 3, seed=11)
    assert a == b


def test_preconditions():
    s, p = nodes(2)
    t = [CollectionTask(0, 1)]
    with pytest.raises(ValueError):
        simulate_collection(s, p, [])
    with pytest.raises(ValueError):
        simulate_collection(s, p, t, failure_rate=1.0)
    with pytest.raises(ValueError):
        simulate_collection(s, p, t, restart_delay=0)
    with pytest.raises(ValueError):
        CollectionTask(0, 0)
    with pytest.raises(StructuralError):
        simulate_collection(s, p, [CollectionTask(0, 1, node_affinity=9)])
    tight = make_scenario("t", [(10, 10)], [(6, 6), (6, 6)])
    with pytest.raises(StructuralError):
        simulate_collection(tight, Placement([0, 0]), t)


def test_safety_cap():
    s, p = nodes(1)
    with pytest.raises(SimulationAborted):
        simulate_collection(s, p, [CollectionTask(0, 100)], max_ticks=50)


def test_dispatch_with_scheduler_dsom_vs_roundrobin():
    tasks = generate_tasks(60, seed=3)
    reports = {alg: dispatch_with_scheduler(SCALES["S1"], tasks, alg, ga_params=QUICK_GA,
                                            failure_rate=0.01, seed=2)
               for alg in ("dsom", "roundrobin")}
    assert all(r.tasks_completed == 60 for r in reports.values())
    again = dispatch_with_scheduler(SCALES["S1"], tasks, "dsom", ga_params=QUICK_GA,
                                    failure_rate=0.01, seed=2)
    assert again == reports["dsom"]


@pytest.mark.parametrize("alg", ["dsom", "maxutil", "fcfs", "roundrobin"])
def test_dispatch_no_failures_no_restarts(alg):
    r = dispatch_with_scheduler(ScaleConfig("20x4", 20, 4), generate_tasks(25, seed=1), alg,
                                ga_params=QUICK_GA, failure_rate=0.0, seed=1)
    assert r.restarts == 0 and r.tasks_completed == 25


def test_task_file_round_trip(tmp_path):
    tasks = generate_tasks(5, seed=1) + [CollectionTask(5, 2.5, 3, node_affinity=1)]
    path = tmp_path / "tasks.json"
    save_tasks(tasks, path)
    assert load_tasks(path) == tasks
    path.write_text('{"work_units": 1}')
    with pytest.raises(ValueError):
        load_tasks(path)
    path.write_text('[{"arrival_tick": 1}]')
    with pytest.raises(ValueError):
        load_tasks(path)


def test_report_csv(tmp_path):
    s, p = nodes(2)
    tasks = generate_tasks(4, seed=0)
    r = simulate_collection(s, p, tasks)
    summary = write_report_csv(r, tasks, tmp_path / "report.csv")
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[0] == "task,arrival_tick,work_units,completion_tick,attempts,node"
    assert len(rows) == 5
    lines = summary.read_text().splitlines()
    assert lines[1].split(",")[:2] == [str(r.makespan_ticks), "4"]
