"""r-neighbour, majority, and staged-threshold bootstrap growth.

Thresholds are exact rationals compared against integer neighbour counts, so
fractional stage schedules carry no floating-point drift.  The staged process
runs stages j = 0..k-1 at threshold r - (k-j)*m and threshold r afterwards;
with m = 0 or k = 0 it reduces to the plain process.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._kernels import closure_queue


def as_fraction(x):
    """Exact rational from int/Fraction/str; floats convert via repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True)
class StagedRule:
    """(r, k, m): base threshold, number of eased stages, easing per stage."""

    r: Fraction
    k: int
    m: Fraction

    def __post_init__(self):
        object.__setattr__(self, "r", as_fraction(self.r))
        object.__setattr__(self, "m", as_fraction(self.m))
        object.__setattr__(self, "k", int(self.k))
        if self.r <= 0:
            raise ValueError("base threshold must be positive")
        if self.k < 0 or self.m < 0:
            raise ValueError("k and m must be nonnegative")
        if self.r - self.k * self.m <= 0:
            warnings.warn("eased threshold reaches zero; early stages infect everything")

    def stage_threshold(self, j):
        if j < self.k:
            return self.r - (self.k - j) * self.m
        return self.r

    def stage_count_threshold(self, j):
        """Smallest integer count meeting the stage-j threshold."""
        return int(math.ceil(self.stage_threshold(j)))


@dataclass
class BootstrapStages:
    """Nested stage masks of a staged run and whether they converged."""

    rule: StagedRule
    stages: list
    converged: bool

    @property
    def final(self):
        return self.stages[-1]

    def stage(self, j):
        """Stage-j mask; past the last computed stage the run was constant."""
        if j < len(self.stages):
            return self.stages[j]
        if not self.converged:
            raise IndexError("stage not computed and run did not converge")
        return self.stages[-1]

    def sizes(self):
        return [int(s.sum()) for s in self.stages]


def _as_mask(g, vertices):
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        if vertices.shape != (g.n_vertices,):
            raise ValueError("mask does not match geometry")
        return vertices.copy()
    mask = np.zeros(g.n_vertices, dtype=bool)
    idx = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                     dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= g.n_vertices:
            raise ValueError("vertex index out of range")
        mask[idx] = True
    return mask


def infected_neighbor_counts(g, mask):
    """Per-vertex count of infected neighbours (sentinel column ignored)."""
    padded = np.concatenate([mask, np.zeros(1, dtype=bool)])
    return padded[g.neighbor_table].sum(axis=1)


def stage_update(g, mask, count_threshold):
    """One synchronous update; threshold <= 0 infects everything."""
    if count_threshold <= 0:
        return np.ones(g.n_vertices, dtype=bool)
    return mask | (infected_neighbor_counts(g, mask) >= count_threshold)


def closure(g, seeds, r):
    """Least fixed point [seeds] of the r-neighbour process."""
    r_int = int(math.ceil(as_fraction(r)))
    mask = _as_mask(g, seeds)
    if r_int <= 0:
        return np.ones(g.n_vertices, dtype=bool)
    return closure_queue(mask, g.neighbor_table, r_int)


def staged_closure(g, seeds, rule, steps=None):
    """Run the staged process from `seeds` for `steps` stages (None: converge).

    Convergence stops early: stage thresholds never decrease, so a stage that
    adds nothing certifies a global fixed point.  The stage list always keeps
    S(0) first.
    """
    mask = _as_mask(g, seeds)
    stages = [mask]
    cap = rule.k + g.n_vertices + 1
    limit = cap if steps is None else int(steps)
    converged = False
    j = 0
    while j < limit:
        new = stage_update(g, stages[-1], rule.stage_count_threshold(j))
        stages.append(new)
        j += 1
        if new.sum() == stages[-2].sum():
            converged = True
            break
        if steps is None and j >= cap:  # pragma: no cover - cap is generous
            break
    return BootstrapStages(rule, stages, converged)


def is_closed(g, vertices, r):
    """True iff no vertex outside the set has >= r neighbours inside it."""
    mask = _as_mask(g, vertices)
    r_int = int(math.ceil(as_fraction(r)))
    counts = infected_neighbor_counts(g, mask)
    return not bool(np.any(~mask & (counts >= r_int)))


def percolates(g, seeds, r):
    return bool(closure(g, seeds, r).all())
