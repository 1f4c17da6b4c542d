import csv

import numpy as np
import pytest

from placesim.cluster import (Placement, ScenarioInfeasibleError, active_machine_count,
                              is_feasible, machine_loads, make_scenario)
from placesim.fitness import FitnessWeights, comm_cost, fitness
from placesim.ga import GAParams, first_fit_decreasing
from placesim.harness import (ALGORITHMS, RAW_HEADER, SCALES, GenerationError, MetricsRecord,
                              OracleTooLargeError, ScaleConfig, brute_force_optimum, emit_results,
                              generate_scenario, read_records, run_algorithm, run_experiment,
                              summarize)

W = FitnessWeights()
QUICK_GA = GAParams(max_generations=30)


@pytest.fixture(scope="module")
def s1_records():
    return run_experiment([SCALES["S1"]], ALGORITHMS, range(10), W, QUICK_GA)


def test_builtin_scales_match_table():
    assert [(c.name, c.num_containers, c.num_machines) for c in SCALES.values()] == [
        ("S1", 80, 8), ("S2", 358, 35), ("S3", 1125, 112)]
    assert ScaleConfig.parse("s2") is SCALES["S2"]
    assert ScaleConfig.parse("6x3") == ScaleConfig("6x3", 6, 3)
    with pytest.raises(ValueError):
        ScaleConfig.parse("S9")


def test_generate_s1():
    s = generate_scenario(SCALES["S1"], 7)
    assert (s.n_containers, s.n_machines) == (80, 8)
    assert first_fit_decreasing(s) is not None
    assert all((m.cpu_capacity, m.mem_capacity) == (100, 100) for m in s.machines)
    lo, hi = s.demand_range
    d = np.array([(c.cpu_demand, c.mem_demand) for c in s.containers])
    assert d.min() >= lo and d.max() <= hi
    assert d.sum(axis=0).max() <= 0.8 * 100 * 8


@pytest.mark.parametrize("name", ["S1", "S2", "S3"])
def test_builtin_scales_generate(name):
    s = generate_scenario(SCALES[name], 0)
    assert s.demand_range in [(5, 20), (4, 12), (4, 11)]
    d = np.array([(c.cpu_demand, c.mem_demand) for c in s.containers])
    assert d.sum(axis=0).max() <= 0.8 * 100 * s.n_machines


def test_generation_deterministic():
    a = generate_scenario(SCALES["S1"], 3)
    b = generate_scenario(SCALES["S1"], 3)
    assert a.to_json() == b.to_json()
    assert generate_scenario(SCALES["S1"], 4).to_json() != a.to_json()


def test_generate_single_container():
    s = generate_scenario(ScaleConfig("1x1", 1, 1), 0)
    assert s.n_containers == 1 and s.n_machines == 1
    assert is_feasible(s, Placement([0]))
    assert s.demand_range == (5, 20)


def test_generate_misconfigured_custom_scale():
    with pytest.raises(GenerationError):
        generate_scenario(ScaleConfig("200x2", 200, 2), 0)


def test_comm_graph_shape():
    s = generate_scenario(SCALES["S1"], 1)
    w = np.array([e[2] for e in s.comm.edges])
    assert w.min() >= 1 and w.max() <= 10
    # every container belongs to a service of >= 2 except possibly one leftover
    deg = np.bincount([e[0] for e in s.comm.edges] + [e[1] for e in s.comm.edges], minlength=80)
    assert (deg == 0).sum() <= 1


def test_oracle_single_container():
    s = make_scenario("o", [(10, 10)] * 2, [(3, 3)])
    p, f = brute_force_optimum(s, W)
    assert p == Placement([0])
    assert f.total == 1000.0


def test_oracle_colocates_affine_pair():
    s = make_scenario("o", [(10, 10)] * 2, [(3, 3), (4, 4)], [(0, 1, 9)])
    p, f = brute_force_optimum(s, W)
    assert p == Placement([0, 0])
    assert f.N == 0


def _recursive_optimum(s):
    """Independent enumerator: depth-first, pruning overloaded partials."""
    best = [None, -1.0]
    n, m = s.n_containers, s.n_machines
    used = [[0.0, 0.0] for _ in range(m)]
    assign = []

    def rec(c):
        if c == n:
            f = fitness(s, assign, W).total
            if f > best[1]:
                best[0], best[1] = tuple(assign), f
            return
        con = s.containers[c]
        for h in range(m):
            mach = s.machines[h]
            if (used[h][0] + con.cpu_demand <= mach.cpu_capacity
                    and used[h][1] + con.mem_demand <= mach.mem_capacity):
                used[h][0] += con.cpu_demand
                used[h][1] += con.mem_demand
                assign.append(h)
                rec(c + 1)
                assign.pop()
                used[h][0] -= con.cpu_demand
                used[h][1] -= con.mem_demand

    rec(0)
    return best


@pytest.mark.parametrize("seed", range(5))
def test_oracle_matches_recursive_enumerator(seed):
    s = generate_scenario(ScaleConfig("6x3", 6, 3), seed, machine_capacity=(40, 40))
    p, f = brute_force_optimum(s, W)
    rp, rf = _recursive_optimum(s)
    assert f.total == pytest.approx(rf, abs=1e-12)
    assert p.assignment == rp


def test_oracle_guards():
    big = make_scenario("b", [(100, 100)] * 4, [(1, 1)] * 11)
    with pytest.raises(OracleTooLargeError):
        brute_force_optimum(big, W)
    nope = make_scenario("n", [(10, 10)] * 2, [(6, 6)] * 3)
    with pytest.raises(ScenarioInfeasibleError):
        brute_force_optimum(nope, W)


def test_experiment_cardinality(s1_records):
    assert len(s1_records) == 40
    assert {r.algorithm for r in s1_records} == set(ALGORITHMS)
    assert all(r.wall_time > 0 for r in s1_records)


def test_single_cell():
    recs = run_experiment([SCALES["S1"]], ["fcfs"], [0], W, QUICK_GA)
    assert len(recs) == 1 and recs[0].wall_time > 0


def test_metrics_recomputed_from_placement():
    s = generate_scenario(SCALES["S1"], 2)
    recs = run_experiment([SCALES["S1"]], ALGORITHMS, [2], W, QUICK_GA)
    for r in recs:
        p = run_algorithm(r.algorithm, s, W, QUICK_GA, 2)
        loads, active = machine_loads(s, p)
        assert r.machines_used == active_machine_count(s, p) <= 8
        assert r.avg_utilization == pytest.approx(loads[active].mean(), abs=1e-15)
        assert 0 < r.avg_utilization <= 1
        assert r.comm_cost == comm_cost(s, p)
        assert r.fitness_total == fitness(s, p, W).total


def test_experiment_rejects_unknown_algorithm():
    with pytest.raises(ValueError):
        run_experiment([SCALES["S1"]], ["random"], [0])
    with pytest.raises(ValueError):
        run_experiment([], ["fcfs"], [0])


def test_emit_empty(tmp_path):
    emit_results([], tmp_path)
    assert (tmp_path / "raw.csv").read_text() == ",".join(RAW_HEADER) + "\n"
    assert read_records(tmp_path / "raw.csv") == []


def test_emit_round_trip_and_summaries(tmp_path, s1_records):
    paths = emit_results(s1_records, tmp_path)
    assert read_records(tmp_path / "raw.csv") == s1_records
    for name in ("summary_machines_used", "summary_avg_utilization", "summary_comm_cost"):
        with open(tmp_path / f"{name}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["scenario", "algorithm", "n", "median", "q1", "q3"]
        assert len(rows) == 5
        assert {r[1] for r in rows[1:]} == set(ALGORITHMS)
    assert len(paths) == 4


def test_summary_reproducible_from_raw(tmp_path, s1_records):
    emit_results(s1_records, tmp_path)
    again = tmp_path / "again"
    emit_results(read_records(tmp_path / "raw.csv"), again)
    for name in ("summary_machines_used", "summary_avg_utilization", "summary_comm_cost"):
        assert (tmp_path / f"{name}.csv").read_bytes() == (again / f"{name}.csv").read_bytes()


def test_summary_values():
    recs = [MetricsRecord("S", "a", i, u, 0.5, 1.0, 1.0) for i, u in enumerate([1, 2, 3, 4, 10])]
    (row,) = summarize(recs, "machines_used")
    assert row == ("S", "a", 5, 3.0, 2.0, 4.0)


def test_emit_without_timing_uses_sidecar(tmp_path):
    recs = [MetricsRecord("S1", "fcfs", 0, 7, 0.9, 10.0, 500.0, 0.25)]
    emit_results(recs, tmp_path, include_timing=False)
    assert read_records(tmp_path / "raw.csv")[0].wall_time is None
    assert "0.25" in (tmp_path / "timings.csv").read_text()


def test_emit_plots(tmp_path):
    pytest.importorskip("matplotlib")
    recs = [MetricsRecord("S1", a, 0, 7, 0.9, 10.0, 500.0, 0.1) for a in ALGORITHMS]
    paths = emit_results(recs, tmp_path, plots=True)
    svgs = [p for p in paths if p.suffix == ".svg"]
    assert len(svgs) == 3 and all(p.read_text().startswith("<?xml") for p in svgs)
