"""Scheduling phasor-data transmissions as 1|prec|sum wC with Lagrangian branch and bound."""

from .bnb import SolveResult, greedy_baseline, improve_schedule, initial_heuristic, solve
from .core import (
    Instance,
    Schedule,
    brute_force_optimal,
    evaluate_schedule,
    is_feasible,
    load_instance,
    make_instance,
    random_instance,
    wspt_order,
)
from .lagrangian import compute_bound

__version__ = "0.1.0"
