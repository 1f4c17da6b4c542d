import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from placesim.cluster import (CommGraph, Placement, Scenario, StructuralError,
                              active_machine_count, is_feasible, machine_loads, make_scenario)

from conftest import scenario_and_assignment


def test_single_container_half_load():
    s = make_scenario("one", [(4, 4)], [(2, 2)])
    loads, active = machine_loads(s, Placement([0]))
    assert loads[0] == 0.5
    assert active.tolist() == [True]


def test_empty_machine_is_inactive():
    s = make_scenario("two", [(4, 4), (4, 4)], [(2, 2)])
    loads, active = machine_loads(s, Placement([0]))
    assert loads[1] == 0.0
    assert active.tolist() == [True, False]


def test_full_in_both_dimensions():
    s = make_scenario("full", [(4, 4)], [(1, 3), (3, 1)])
    loads, _ = machine_loads(s, Placement([0, 0]))
    assert loads[0] == 1.0


def test_active_machine_count_examples():
    s = make_scenario("x", [(100, 100)] * 3, [(1, 1)] * 4)
    assert active_machine_count(s, Placement([0, 0, 0, 0])) == 1
    assert active_machine_count(s, Placement([0, 1, 2, 0])) == 3


def test_eight_machines_all_used():
    s = make_scenario("S1ish", [(100, 100)] * 8, [(5, 5)] * 80)
    assert active_machine_count(s, Placement([c % 8 for c in range(80)])) == 8


def test_is_feasible_examples():
    s = make_scenario("f", [(4, 4)], [(3, 3)])
    assert is_feasible(s, Placement([0]))
    s2 = make_scenario("g", [(4, 4)], [(3, 1), (3, 1)])
    assert not is_feasible(s2, Placement([0, 0]))
    empty = make_scenario("e", [(4, 4)], [])
    assert is_feasible(empty, Placement([]))


@pytest.mark.parametrize("assign", [[0], [0, -1], [3, 0]])
def test_structural_errors(assign):
    s = make_scenario("s", [(4, 4), (4, 4)], [(1, 1), (1, 1)])
    with pytest.raises(StructuralError):
        machine_loads(s, Placement(assign))


def test_invalid_scenarios_rejected():
    with pytest.raises(StructuralError):
        make_scenario("big", [(4, 4)], [(5, 1)])
    with pytest.raises(StructuralError):
        make_scenario("edge", [(4, 4)], [(1, 1)], [(0, 3, 1)])
    with pytest.raises(StructuralError):
        CommGraph(((0, 0, 1),))
    with pytest.raises(StructuralError):
        CommGraph(((0, 1, 1), (1, 0, 2)))


def test_comm_graph_normalizes_edge_order():
    g = CommGraph(((2, 1, 3), (0, 1, 1)))
    assert g.edges == ((0, 1, 1), (1, 2, 3))


@settings(max_examples=100, deadline=None)
@given(scenario_and_assignment())
def test_json_round_trip(case):
    s, _ = case
    text = s.to_json()
    s2 = Scenario.from_json(text)
    assert s2 == s
    assert s2.to_json() == text
    assert json.loads(text)["edges"] == [list(e) for e in s.comm.edges]


def test_json_keeps_demand_range(tmp_path):
    s = Scenario.from_dict({"name": "n", "machines": [{"cpu": 10, "mem": 10}],
                            "containers": [{"cpu": 1, "mem": 2}], "edges": [],
                            "demand_range": [4, 12]})
    path = tmp_path / "s.json"
    s.save(path)
    assert Scenario.load(path) == s
    assert s.demand_range == (4, 12)


def test_malformed_document():
    with pytest.raises(StructuralError):
        Scenario.from_dict({"name": "x", "machines": [{"cpu": 1}], "containers": []})


@settings(max_examples=200, deadline=None)
@given(scenario_and_assignment())
def test_loads_in_unit_interval_when_feasible(case):
    s, a = case
    loads, active = machine_loads(s, a)
    if is_feasible(s, a):
        assert np.all((loads >= 0) & (loads <= 1 + 1e-12))
    assert not np.any(loads[~active])
    assert active_machine_count(s, a) <= min(s.n_machines, s.n_containers)


@settings(max_examples=200, deadline=None)
@given(scenario_and_assignment(), st.data())
def test_feasibility_monotone_under_removal(case, data):
    s, a = case
    if not is_feasible(s, a) or s.n_containers < 2:
        return
    drop = data.draw(st.integers(0, s.n_containers - 1))
    keep = [c for c in range(s.n_containers) if c != drop]
    sub = make_scenario("sub", [(m.cpu_capacity, m.mem_capacity) for m in s.machines],
                        [(s.containers[c].cpu_demand, s.containers[c].mem_demand) for c in keep])
    assert is_feasible(sub, a[keep])
