"""Simulation laboratory for majority spin dynamics and bootstrap growth
on finite tori and boxes, with a Monte Carlo harness and an exact-bounds
oracle."""

__version__ = "0.1.0"

from .bootstrap import StagedRule, closure, is_closed, percolates, staged_closure
from .geometry import BlockLayout, TorusGeometry
from .glauber import Trajectory, coupled_run, count_order_violations, is_stable, run_dynamics
from .randomness import ClockStream, SpinField, derive_seed, sample_spins

__all__ = [
    "BlockLayout",
    "ClockStream",
    "SpinField",
    "StagedRule",
    "TorusGeometry",
    "Trajectory",
    "__version__",
    "closure",
    "coupled_run",
    "count_order_violations",
    "derive_seed",
    "is_closed",
    "is_stable",
    "percolates",
    "run_dynamics",
    "sample_spins",
    "staged_closure",
]
