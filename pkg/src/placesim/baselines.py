"""Comm-oblivious comparison schedulers.

All three take containers in input order, respect both capacity dimensions,
and are deterministic. They raise ScenarioInfeasibleError rather than return
an overloaded placement.
"""
import numpy as np

from .cluster import CAP_EPS, Placement, Scenario, ScenarioInfeasibleError


def _fits(p, cpu_u, mem_u, c):
    return (cpu_u + p.cpu_d[c] <= p.cpu_cap + CAP_EPS) & (mem_u + p.mem_d[c] <= p.mem_cap + CAP_EPS)


def _fail(scenario, c):
    raise ScenarioInfeasibleError(f"scenario {scenario.name!r}: no machine can host container {c}")


def schedule_max_utilization_first(scenario: Scenario) -> Placement:
    """Best fit: each container goes where the post-placement load is highest."""
    p = scenario.arrays
    cpu_u = np.zeros(scenario.n_machines)
    mem_u = np.zeros(scenario.n_machines)
    out = []
    for c in range(scenario.n_containers):
        ok = _fits(p, cpu_u, mem_u, c)
        if not ok.any():
            _fail(scenario, c)
        post = ((cpu_u + p.cpu_d[c]) / p.cpu_cap + (mem_u + p.mem_d[c]) / p.mem_cap) * 0.5
        post[~ok] = -np.inf
        m = int(np.argmax(post))  # first maximum -> lower id on ties
        cpu_u[m] += p.cpu_d[c]
        mem_u[m] += p.mem_d[c]
        out.append(m)
    return Placement(out)


def schedule_fcfs(scenario: Scenario) -> Placement:
    """First fit: lowest-id machine with room."""
    p = scenario.arrays
    cpu_u = np.zeros(scenario.n_machines)
    mem_u = np.zeros(scenario.n_machines)
    out = []
    for c in range(scenario.n_containers):
        ok = np.flatnonzero(_fits(p, cpu_u, mem_u, c))
        if ok.size == 0:
            _fail(scenario, c)
        m = int(ok[0])
        cpu_u[m] += p.cpu_d[c]
        mem_u[m] += p.mem_d[c]
        out.append(m)
    return Placement(out)


def schedule_round_robin(scenario: Scenario) -> Placement:
    """Cyclic assignment ("polling"); the cursor skips machines without room."""
    p = scenario.arrays
    M = scenario.n_machines
    cpu_u = np.zeros(M)
    mem_u = np.zeros(M)
    out = []
    cursor = 0
    for c in range(scenario.n_containers):
        ok = _fits(p, cpu_u, mem_u, c)
        for step in range(M):
            m = (cursor + step) % M
            if ok[m]:
                break
        else:
            _fail(scenario, c)
        cpu_u[m] += p.cpu_d[c]
        mem_u[m] += p.mem_d[c]
        out.append(m)
        cursor = (m + 1) % M
    return Placement(out)


BASELINES = {
    "maxutil": schedule_max_utilization_first,
    "fcfs": schedule_fcfs,
    "roundrobin": schedule_round_robin,
}
