"""DSOM genetic scheduler.

Individuals are flat assignment vectors (container -> machine) that are kept
feasible at all times: initialization uses randomized first-fit, crossover
repairs overloaded machines, and mutation only commits a successful host
evacuation. Survivor selection merges parents with offspring and truncates,
so the population best never regresses once merging starts (generation 2).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import kernels
from .cluster import Placement, Scenario, ScenarioInfeasibleError, check_placement
from .fitness import DEFAULT_WEIGHTS, FitnessBreakdown, FitnessWeights, fitness

INIT_SHUFFLE_ATTEMPTS = 100


@dataclass(frozen=True)
class GAParams:
    population_size: int = 50
    max_generations: int = 200
    stall_generations: int = 30
    tournament_size: int = 2
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.stall_generations < 1:
            raise ValueError("stall_generations must be >= 1")
        if not 2 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [2, population_size]")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GARunResult:
    best_placement: Placement
    best_fitness: FitnessBreakdown
    # (best total, mean total) of the surviving population, one entry per generation
    history: tuple = field(default_factory=tuple)
    generations_run: int = 0
    evaluations: int = 0
    wall_time: float = 0.0

    @property
    def best_history(self):
        return [b for b, _ in self.history]


def _rng(params: GAParams, rng):
    return rng if rng is not None else np.random.default_rng(params.seed)


def _as_array(scenario, individual):
    return check_placement(scenario, individual).copy()


# -- initialization -------------------------------------------------------

def _random_first_fit(scenario: Scenario, rng) -> np.ndarray:
    p = scenario.arrays
    n, m = scenario.n_containers, scenario.n_machines
    for _ in range(INIT_SHUFFLE_ATTEMPTS):
        corder = rng.permutation(n).astype(np.int64)
        morder = rng.permutation(m).astype(np.int64)
        assign = kernels.first_fit(p, corder, morder)
        if assign is not None:
            return assign
    assign = first_fit_decreasing(scenario)
    if assign is None:
        raise ScenarioInfeasibleError(f"scenario {scenario.name!r}: first-fit-decreasing failed")
    return assign


def first_fit_decreasing(scenario: Scenario) -> Optional[np.ndarray]:
    """FFD by max demand fraction over machines in id order, or None."""
    p = scenario.arrays
    return kernels.first_fit(p, p.decreasing_order(),
                             np.arange(scenario.n_machines, dtype=np.int64))


def _init_arrays(scenario, params, rng) -> List[np.ndarray]:
    return [_random_first_fit(scenario, rng) for _ in range(params.population_size)]


def initialize_population(scenario: Scenario, params: GAParams, rng=None) -> List[Placement]:
    """``population_size`` feasible placements from shuffled first-fit."""
    rng = _rng(params, rng)
    return [Placement(a) for a in _init_arrays(scenario, params, rng)]


# -- selection ------------------------------------------------------------

def _tournament_index(fitnesses, k, rng) -> int:
    drawn = rng.integers(0, len(fitnesses), size=k)
    best = int(drawn[0])
    for i in drawn[1:]:
        i = int(i)
        if fitnesses[i] > fitnesses[best] or (fitnesses[i] == fitnesses[best] and i < best):
            best = i
    return best


def tournament_select(population, fitnesses, params: GAParams, rng):
    """Draw ``tournament_size`` individuals with replacement and return the fittest.

    ``fitnesses`` may hold totals or FitnessBreakdown objects. Ties go to the
    lower population index.
    """
    totals = [f.total if isinstance(f, FitnessBreakdown) else float(f) for f in fitnesses]
    return population[_tournament_index(totals, params.tournament_size, rng)]


# -- variation ------------------------------------------------------------

def _repair(scenario, child, weights) -> bool:
    p = scenario.arrays
    evicted = kernels.evict_overloaded(p, child)
    if evicted.size == 0:
        return True
    order = p.decreasing_order(evicted)
    return kernels.reinsert(p, child, order, -1, weights.alpha, weights.beta, weights.lam)


def repair(assignment, scenario: Scenario, weights: FitnessWeights = DEFAULT_WEIGHTS) -> Optional[Placement]:
    """Make a (possibly overloaded) total assignment feasible, or return None."""
    child = _as_array(scenario, assignment)
    return Placement(child) if _repair(scenario, child, weights) else None


def _crossover_arrays(a, b, scenario, weights, rng):
    n = a.size
    ca, cb = a.copy(), b.copy()
    if n < 2:
        return ca, cb
    i, j = sorted(int(x) for x in rng.choice(n + 1, size=2, replace=False))
    ca[i:j] = b[i:j]
    cb[i:j] = a[i:j]
    if not _repair(scenario, ca, weights):
        ca = a.copy()
    if not _repair(scenario, cb, weights):
        cb = b.copy()
    return ca, cb


def crossover(parent_a, parent_b, scenario: Scenario, weights: FitnessWeights, rng):
    """Two-point gene exchange followed by evict-and-reinsert repair.

    Overloaded machines shed their least communication-bound containers; the
    evicted ones are reinserted (largest first) where the partial placement's
    fitness is highest. A child that cannot be repaired is replaced by a copy
    of its own parent.
    """
    a = _as_array(scenario, parent_a)
    b = _as_array(scenario, parent_b)
    ca, cb = _crossover_arrays(a, b, scenario, weights, rng)
    return Placement(ca), Placement(cb)


def _mutate_array(ind, scenario, weights):
    p = scenario.arrays
    m = scenario.n_machines
    cpu = np.bincount(ind, weights=p.cpu_d, minlength=m)
    mem = np.bincount(ind, weights=p.mem_d, minlength=m)
    count = np.bincount(ind, minlength=m)
    active = np.flatnonzero(count)
    if active.size <= 1:
        return ind
    loads = (cpu[active] / p.cpu_cap[active] + mem[active] / p.mem_cap[active]) * 0.5
    host = int(active[np.argmin(loads)])
    out = ind.copy()
    moved = np.flatnonzero(out == host)
    out[moved] = -1
    order = p.decreasing_order(moved)
    if kernels.reinsert(p, out, order, host, weights.alpha, weights.beta, weights.lam):
        return out
    return ind


def mutate(individual, scenario: Scenario, weights: FitnessWeights, rng=None) -> Placement:
    """Evacuate the least-loaded active host and re-place its containers.

    Containers move largest first, each to the remaining machine where the
    fitness gain is highest. Returns the input unchanged if any of them fits
    nowhere. Deterministic; ``rng`` is accepted for operator symmetry.
    """
    ind = _as_array(scenario, individual)
    return Placement(_mutate_array(ind, scenario, weights))


# -- main loop ------------------------------------------------------------

def _truncate(merged, merged_fit, size):
    """Indices of the ``size`` fittest distinct individuals (ties: lower index).

    Duplicates only fill the remainder when fewer than ``size`` distinct
    assignments exist. Without this the deterministic mutation lets a single
    clone take over the population within a few generations.
    """
    ranked = np.argsort(-merged_fit, kind="stable")
    seen = set()
    keep, dupes = [], []
    for i in ranked:
        key = merged[i].tobytes()
        if key in seen:
            dupes.append(int(i))
        else:
            seen.add(key)
            keep.append(int(i))
    keep = keep[:size]
    if len(keep) < size:
        keep = sorted(keep + dupes[:size - len(keep)], key=lambda i: (-merged_fit[i], i))
    return np.array(keep, dtype=np.int64)


def dsom_schedule(scenario: Scenario, weights: FitnessWeights = DEFAULT_WEIGHTS,
                  params: GAParams = GAParams(),
                  callback: Optional[Callable[[int, list, np.ndarray], None]] = None) -> GARunResult:
    """Run the genetic scheduler and return the best placement ever seen.

    ``callback(generation, population, totals)`` is invoked for the initial
    population (generation 0) and after each survivor selection.
    """
    if scenario.n_containers == 0:
        raise ValueError("cannot schedule a scenario without containers")
    t0 = time.perf_counter()
    rng = np.random.default_rng(params.seed)
    p = scenario.arrays
    al, be, la = weights.alpha, weights.beta, weights.lam
    P = params.population_size
    evaluations = 0

    def evaluate(pop):
        nonlocal evaluations
        evaluations += len(pop)
        return np.array([kernels.evaluate(p, ind, al, be, la)[0] for ind in pop])

    pop = _init_arrays(scenario, params, rng)
    fit = evaluate(pop)
    if callback is not None:
        callback(0, pop, fit)
    top = int(np.argmax(fit))
    best_ind, best_val = pop[top].copy(), float(fit[top])
    history = []
    stall = 0
    gen = 0

    for gen in range(1, params.max_generations + 1):
        offspring = []
        while len(offspring) < P:
            a = pop[_tournament_index(fit, params.tournament_size, rng)]
            b = pop[_tournament_index(fit, params.tournament_size, rng)]
            if rng.random() < params.crossover_rate:
                ca, cb = _crossover_arrays(a, b, scenario, weights, rng)
            else:
                ca, cb = a.copy(), b.copy()
            offspring.append(ca)
            offspring.append(cb)
        offspring = offspring[:P]
        off_fit = evaluate(offspring)

        # the weakest offspring is always mutated, the rest at mutation_rate
        worst_first = np.argsort(off_fit, kind="stable")
        changed = []
        for rank, i in enumerate(worst_first):
            i = int(i)
            if rank == 0 or rng.random() < params.mutation_rate:
                mutated = _mutate_array(offspring[i], scenario, weights)
                if mutated is not offspring[i]:
                    offspring[i] = mutated
                    changed.append(i)
        if changed:
            new_fit = evaluate([offspring[i] for i in changed])
            off_fit[changed] = new_fit

        if gen == 1:
            pop, fit = offspring, off_fit
        else:
            merged = pop + offspring
            merged_fit = np.concatenate([fit, off_fit])
            keep = _truncate(merged, merged_fit, P)
            pop = [merged[i] for i in keep]
            fit = merged_fit[keep]

        if callback is not None:
            callback(gen, pop, fit)
        history.append((float(fit.max()), float(fit.mean())))

        top = int(np.argmax(fit))
        if fit[top] > best_val:
            best_ind, best_val = pop[top].copy(), float(fit[top])
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_generations:
                break

    best = Placement(best_ind)
    return GARunResult(
        best_placement=best,
        best_fitness=fitness(scenario, best, weights),
        history=tuple(history),
        generations_run=gen,
        evaluations=evaluations,
        wall_time=time.perf_counter() - t0,
    )
