"""Two-layer cluster model: physical machines hosting microservice containers.

Machines and containers are identified by dense 0-based integers so a
placement is a flat assignment vector (container id -> machine id).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

# absolute slack on capacity checks; demands are normally integral
CAP_EPS = 1e-9


class StructuralError(ValueError):
    """Malformed scenario or placement (bad ids, non-total assignment...)."""


class ScenarioInfeasibleError(RuntimeError):
    """No feasible placement could be found for a scenario."""


@dataclass(frozen=True)
class PhysicalMachine:
    id: int
    cpu_capacity: float
    mem_capacity: float

    def __post_init__(self):
        if self.cpu_capacity <= 0 or self.mem_capacity <= 0:
            raise StructuralError(f"machine {self.id}: capacities must be > 0")


@dataclass(frozen=True)
class ContainerSpec:
    id: int
    cpu_demand: float
    mem_demand: float

    def __post_init__(self):
        if self.cpu_demand <= 0 or self.mem_demand <= 0:
            raise StructuralError(f"container {self.id}: demands must be > 0")


@dataclass(frozen=True)
class CommGraph:
    """Undirected traffic graph; edges are stored sorted as (a, b, w) with a < b."""

    edges: tuple = ()

    def __post_init__(self):
        norm = []
        seen = set()
        for a, b, w in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise StructuralError(f"self-edge on container {a}")
            if w < 0:
                raise StructuralError(f"negative weight on edge ({a}, {b})")
            if a > b:
                a, b = b, a
            if (a, b) in seen:
                raise StructuralError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            norm.append((a, b, w))
        norm.sort(key=lambda e: (e[0], e[1]))
        object.__setattr__(self, "edges", tuple(norm))

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class Placement:
    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(m) for m in self.assignment))

    def __len__(self):
        return len(self.assignment)

    def __getitem__(self, container_id):
        return self.assignment[container_id]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.assignment, dtype=np.int64)


@dataclass(frozen=True)
class ProblemArrays:
    """Flat numpy view of a scenario, shared by the fitness kernels."""

    cpu_d: np.ndarray
    mem_d: np.ndarray
    cpu_cap: np.ndarray
    mem_cap: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_w: np.ndarray
    # CSR adjacency, both directions
    indptr: np.ndarray
    nbr: np.ndarray
    nbr_w: np.ndarray
    # max demand fraction against the largest machine; the "size" for decreasing orders
    size_key: np.ndarray

    @property
    def n_containers(self) -> int:
        return len(self.cpu_d)

    @property
    def n_machines(self) -> int:
        return len(self.cpu_cap)

    def decreasing_order(self, containers=None) -> np.ndarray:
        """Containers by descending size, ties by lower id."""
        if containers is None:
            containers = np.arange(self.n_containers, dtype=np.int64)
        containers = np.asarray(containers, dtype=np.int64)
        idx = np.lexsort((containers, -self.size_key[containers]))
        return containers[idx]


@dataclass(frozen=True)
class Scenario:
    name: str
    machines: tuple
    containers: tuple
    comm: CommGraph = field(default_factory=CommGraph)
    # recorded by the generator so result files are self-describing
    demand_range: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "containers", tuple(self.containers))
        if self.demand_range is not None:
            object.__setattr__(self, "demand_range", tuple(self.demand_range))
        for i, m in enumerate(self.machines):
            if m.id != i:
                raise StructuralError(f"machine ids must be contiguous from 0 (got {m.id} at {i})")
        for i, c in enumerate(self.containers):
            if c.id != i:
                raise StructuralError(f"container ids must be contiguous from 0 (got {c.id} at {i})")
        if self.containers:
            if not self.machines:
                raise StructuralError("containers given but no machines")
            max_cpu = max(m.cpu_capacity for m in self.machines)
            max_mem = max(m.mem_capacity for m in self.machines)
            for c in self.containers:
                if c.cpu_demand > max_cpu + CAP_EPS or c.mem_demand > max_mem + CAP_EPS:
                    raise StructuralError(f"container {c.id} exceeds every machine's capacity")
        n = len(self.containers)
        for a, b, _ in self.comm.edges:
            if b >= n or a < 0:
                raise StructuralError(f"edge ({a}, {b}) references unknown container")

    @property
    def n_containers(self) -> int:
        return len(self.containers)

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @cached_property
    def arrays(self) -> ProblemArrays:
        n = self.n_containers
        cpu_d = np.array([c.cpu_demand for c in self.containers], dtype=np.float64)
        mem_d = np.array([c.mem_demand for c in self.containers], dtype=np.float64)
        cpu_cap = np.array([m.cpu_capacity for m in self.machines], dtype=np.float64)
        mem_cap = np.array([m.mem_capacity for m in self.machines], dtype=np.float64)
        edges = self.comm.edges
        ea = np.array([e[0] for e in edges], dtype=np.int64)
        eb = np.array([e[1] for e in edges], dtype=np.int64)
        ew = np.array([e[2] for e in edges], dtype=np.float64)

        src = np.concatenate([ea, eb])
        dst = np.concatenate([eb, ea])
        wts = np.concatenate([ew, ew])
        order = np.lexsort((dst, src))
        src, dst, wts = src[order], dst[order], wts[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])

        if n and self.machines:
            size_key = np.maximum(cpu_d / cpu_cap.max(), mem_d / mem_cap.max())
        else:
            size_key = np.zeros(n)
        arrs = ProblemArrays(cpu_d, mem_d, cpu_cap, mem_cap, ea, eb, ew,
                             indptr, np.ascontiguousarray(dst), np.ascontiguousarray(wts),
                             size_key)
        for a in vars(arrs).values():
            a.setflags(write=False)
        return arrs

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "machines": [{"cpu": m.cpu_capacity, "mem": m.mem_capacity} for m in self.machines],
            "containers": [{"cpu": c.cpu_demand, "mem": c.mem_demand} for c in self.containers],
            "edges": [[a, b, w] for a, b, w in self.comm.edges],
        }
        if self.demand_range is not None:
            doc["demand_range"] = list(self.demand_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            machines = [PhysicalMachine(i, m["cpu"], m["mem"]) for i, m in enumerate(doc["machines"])]
            containers = [ContainerSpec(i, c["cpu"], c["mem"]) for i, c in enumerate(doc["containers"])]
            comm = CommGraph(tuple((a, b, w) for a, b, w in doc.get("edges", [])))
            return cls(doc["name"], machines, containers, comm, doc.get("demand_range"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, StructuralError):
                raise
            raise StructuralError(f"malformed scenario document: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


def make_scenario(name: str, machine_caps: Iterable[Sequence[float]],
                  demands: Iterable[Sequence[float]], edges: Iterable = ()) -> Scenario:
    """Convenience constructor from plain (cpu, mem) pairs."""
    machines = [PhysicalMachine(i, c, m) for i, (c, m) in enumerate(machine_caps)]
    containers = [ContainerSpec(i, c, m) for i, (c, m) in enumerate(demands)]
    return Scenario(name, machines, containers, CommGraph(tuple(edges)))


def check_placement(scenario: Scenario, placement) -> np.ndarray:
    """Validate totality and ids; returns the assignment as an int64 array."""
    assign = placement.as_array() if isinstance(placement, Placement) else np.asarray(placement, dtype=np.int64)
    if assign.shape != (scenario.n_containers,):
        raise StructuralError(
            f"placement covers {assign.size} containers, scenario has {scenario.n_containers}")
    if assign.size and (assign.min() < 0 or assign.max() >= scenario.n_machines):
        raise StructuralError("placement references an unknown machine id")
    return assign


def _usage(scenario: Scenario, assign: np.ndarray):
    p = scenario.arrays
    m = scenario.n_machines
    cpu = np.bincount(assign, weights=p.cpu_d, minlength=m)
    mem = np.bincount(assign, weights=p.mem_d, minlength=m)
    count = np.bincount(assign, minlength=m)
    return cpu, mem, count


def machine_loads(scenario: Scenario, placement):
    """Per-machine load z = mean of CPU and memory utilization fractions.

    Returns ``(loads, active)`` where ``active[i]`` is False for machines
    hosting no container (their load is 0).
    """
    assign = check_placement(scenario, placement)
    p = scenario.arrays
    cpu, mem, count = _usage(scenario, assign)
    loads = (cpu / p.cpu_cap + mem / p.mem_cap) * 0.5
    return loads, count > 0


def active_machine_count(scenario: Scenario, placement) -> int:
    assign = check_placement(scenario, placement)
    return int(np.unique(assign).size)


def is_feasible(scenario: Scenario, placement) -> bool:
    assign = check_placement(scenario, placement)
    p = scenario.arrays
    cpu, mem, _ = _usage(scenario, assign)
    return bool(np.all(cpu <= p.cpu_cap + CAP_EPS) and np.all(mem <= p.mem_cap + CAP_EPS))
