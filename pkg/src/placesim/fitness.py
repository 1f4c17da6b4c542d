"""Placement fitness: consolidation, load balance and communication cost.

    total = 1000 * (alpha / D + beta * U / Z + lam / (1000 * max(N, 0.001)))

D is the number of active machines, U and Z the mean and maximum load over
active machines, and N the traffic crossing machine boundaries. Higher is
better; a single fully co-located, perfectly balanced placement scores 1000.

This module is the readable reference; the GA hot path uses the equivalent
routines in :mod:`placesim.kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import Scenario, StructuralError, check_placement, is_feasible, machine_loads

N_FLOOR = 0.001
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class FitnessWeights:
    alpha: float = 0.2
    beta: float = 0.5
    lam: float = 0.3

    def __post_init__(self):
        if min(self.alpha, self.beta, self.lam) < 0:
            raise ValueError("fitness weights must be non-negative")
        if abs(self.alpha + self.beta + self.lam - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"fitness weights must sum to 1 (got {self.alpha + self.beta + self.lam!r})")

    @classmethod
    def parse(cls, text: str) -> "FitnessWeights":
        """Parse ``"0.2,0.5,0.3"`` into (alpha, beta, lam)."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self):
        return (self.alpha, self.beta, self.lam)


DEFAULT_WEIGHTS = FitnessWeights(0.2, 0.5, 0.3)


def combine(D: int, Z: float, U: float, N: float, weights: FitnessWeights) -> float:
    d_core = 1.0 / D
    balance_core = U / Z
    comm_core = 1.0 / (1000.0 * max(N, N_FLOOR))
    return 1000.0 * (weights.alpha * d_core + weights.beta * balance_core + weights.lam * comm_core)


@dataclass(frozen=True)
class FitnessBreakdown:
    d_term: float
    balance_term: float
    comm_term: float
    total: float
    D: int
    Z: float
    U: float
    N: float
    feasible: bool = True

    def recompute(self, weights: FitnessWeights) -> float:
        return combine(self.D, self.Z, self.U, self.N, weights)


def comm_cost(scenario: Scenario, placement) -> float:
    """Total weight of edges whose endpoints sit on different machines."""
    assign = check_placement(scenario, placement)
    p = scenario.arrays
    if p.edge_w.size == 0:
        return 0.0
    crossing = assign[p.edge_a] != assign[p.edge_b]
    return float(p.edge_w[crossing].sum())


def fitness(scenario: Scenario, placement, weights: FitnessWeights = DEFAULT_WEIGHTS) -> FitnessBreakdown:
    if scenario.n_containers == 0:
        raise StructuralError("fitness is undefined for a scenario without containers")
    loads, active = machine_loads(scenario, placement)
    act = loads[active]
    D = int(active.sum())
    U = float(act.mean())
    Z = float(act.max())
    N = comm_cost(scenario, placement)
    d_term = weights.alpha * (1.0 / D) * 1000.0
    balance_term = weights.beta * (U / Z) * 1000.0
    comm_term = weights.lam * (1.0 / (1000.0 * max(N, N_FLOOR))) * 1000.0
    return FitnessBreakdown(
        d_term=d_term,
        balance_term=balance_term,
        comm_term=comm_term,
        total=combine(D, Z, U, N, weights),
        D=D, Z=Z, U=U, N=N,
        feasible=is_feasible(scenario, placement),
    )
