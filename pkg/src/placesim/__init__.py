"""Microservice container placement: genetic scheduler, baselines, simulator."""
from .baselines import schedule_fcfs, schedule_max_utilization_first, schedule_round_robin
from .cluster import (CommGraph, ContainerSpec, PhysicalMachine, Placement, Scenario,
                      ScenarioInfeasibleError, StructuralError, active_machine_count,
                      is_feasible, machine_loads, make_scenario)
from .dispatch import CollectionTask, DispatchReport, dispatch_with_scheduler, simulate_collection
from .fitness import FitnessBreakdown, FitnessWeights, comm_cost, fitness
from .ga import (GAParams, GARunResult, crossover, dsom_schedule, initialize_population, mutate, repair,
                 tournament_select)
from .harness import (SCALES, MetricsRecord, ScaleConfig, brute_force_optimum, emit_results,
                      generate_scenario, read_records, run_experiment)
from .kernels import BACKEND

__version__ = "0.1.0"
