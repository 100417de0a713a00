"""Locally-determined covers for the early '-' region, and block goodness.

The pipeline over-approximates where the dynamics can show '-' using only
nearby data: staged bootstrap growth of the initial '-' set, a cover built
from silent clocks and heavy '-' neighbourhoods, a further staged enlargement
of that cover, and a clock-ring reachability test that bounds how far outside
influence can travel in a time window.  A block is good when no ring path
crosses its buffer and its core is all '+' at the end of the window.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .bootstrap import StagedRule, as_fraction, infected_neighbor_counts, staged_closure
from .geometry import TorusGeometry
from .glauber import run_dynamics
from .randomness import ClockStream, derive_seed, resample_region, sample_spins

GROWTH_STAGES = 8
ENLARGE_STAGES = 40
GROWTH_RELIEF_DIVISOR = 24
ENLARGE_RELIEF_DIVISOR = 80


def check_bias(eps):
    eps = as_fraction(eps)
    if not Fraction(0) < eps < Fraction(1, 2):
        raise ValueError("bias must lie strictly between 0 and 1/2")
    return eps


def bias_from_density(p):
    """eps with p = 1/2 + eps."""
    return check_bias(as_fraction(p) - Fraction(1, 2))


def density_from_bias(eps):
    return Fraction(1, 2) + check_bias(eps)


def growth_rule(d, eps):
    """Staged rule for the early growth of the '-' set."""
    eps = check_bias(eps)
    return StagedRule(Fraction(d), GROWTH_STAGES, eps * d / GROWTH_RELIEF_DIVISOR)


def enlargement_rule(d):
    """Staged rule for enlarging the cover."""
    return StagedRule(Fraction(d), ENLARGE_STAGES, Fraction(d, ENLARGE_RELIEF_DIVISOR))


def growth_set(g, seeds, eps):
    """(growth mask, settled flag): staged growth of the seeds minus the seeds.

    Settled means one extra stage adds nothing, which certifies a global
    fixed point of the staged process.
    """
    seeds = np.asarray(seeds, dtype=bool)
    run = staged_closure(g, seeds, growth_rule(g.d, eps), steps=GROWTH_STAGES + 1)
    grown = run.stage(GROWTH_STAGES)
    settled = bool((run.stage(GROWTH_STAGES + 1) == grown).all())
    return grown & ~seeds, settled


@dataclass
class ProxyParts:
    """The three one-sided conditions whose union forms the cover."""

    silent: np.ndarray
    heavy_seed_neighbors: np.ndarray
    touching_growth: np.ndarray

    @property
    def union(self):
        return self.silent | self.heavy_seed_neighbors | self.touching_growth


def proxy_cover(g, seeds, growth, clocks, time_d, vertex_keys=None):
    """Cover of the possible '-' region at the checkpoint, from local data.

    A vertex belongs iff its clock is silent on [0, time_d], or at least d of
    its neighbours are seeds, or at least one neighbour lies in the growth.
    """
    V = g.n_vertices
    keys = (
        np.arange(V, dtype=np.int64)
        if vertex_keys is None
        else np.asarray(vertex_keys, dtype=np.int64)
    )
    silent = clocks.ring_counts(keys, 0.0, float(time_d)) == 0
    heavy = infected_neighbor_counts(g, np.asarray(seeds, dtype=bool)) >= g.d
    touching = infected_neighbor_counts(g, np.asarray(growth, dtype=bool)) >= 1
    return ProxyParts(silent, heavy, touching)


def enlarged_cover(g, proxy, d=None):
    """(enlarged mask, settled flag): staged enlargement of the cover."""
    rule = enlargement_rule(g.d if d is None else d)
    run = staged_closure(g, np.asarray(proxy, dtype=bool), rule, steps=ENLARGE_STAGES + 1)
    mask = run.stage(ENLARGE_STAGES)
    settled = bool((run.stage(ENLARGE_STAGES + 1) == mask).all())
    return mask, settled


@dataclass
class CouplingReport:
    """Everything one coupled run produced, masks and events alike."""

    geometry: TorusGeometry
    boundary: str
    eps: Fraction
    alpha: float
    time_d: float
    horizon_end: float
    seeds: np.ndarray
    growth: np.ndarray
    growth_settled: bool
    proxy_parts: ProxyParts
    proxy: np.ndarray
    minus_at_checkpoint: np.ndarray
    leak: bool
    enlarged: np.ndarray
    enlarged_settled: bool
    escape: bool
    trajectory: object

    def counts(self):
        return {
            "seeds": int(self.seeds.sum()),
            "growth": int(self.growth.sum()),
            "proxy": int(self.proxy.sum()),
            "minus_at_checkpoint": int(self.minus_at_checkpoint.sum()),
            "enlarged": int(self.enlarged.sum()),
        }


def couple_run(
    g,
    spins,
    clocks,
    eps,
    time_d=None,
    horizon_end=None,
    boundary="torus",
    bootstrap_g=None,
    vertex_keys=None,
    alpha=0.5,
):
    """Run the dynamics and its locally-determined covers on shared randomness.

    `bootstrap_g` carries the staged processes and neighbour counts (defaults
    to `g`); blocks pass the wrapped torus here while the dynamics itself runs
    on the free box with a '+' phantom boundary.
    """
    eps = check_bias(eps)
    if bootstrap_g is None:
        bootstrap_g = g
    if bootstrap_g.n_vertices != g.n_vertices:
        raise ValueError("bootstrap geometry must index the same vertices")
    d = g.d
    time_d = float(d if time_d is None else time_d)
    horizon_end = float(3 * d if horizon_end is None else horizon_end)
    if not 0 <= time_d <= horizon_end:
        raise ValueError("need 0 <= time_d <= horizon_end")

    spins = np.asarray(spins, dtype=np.int8)
    seeds = spins == -1
    growth, growth_settled = growth_set(bootstrap_g, seeds, eps)
    parts = proxy_cover(bootstrap_g, seeds, growth, clocks, time_d, vertex_keys)
    proxy = parts.union
    enlarged, enlarged_settled = enlarged_cover(bootstrap_g, proxy)

    traj = run_dynamics(
        g,
        spins,
        clocks,
        horizon=horizon_end,
        alpha=alpha,
        boundary=boundary,
        record="flips",
        vertex_keys=vertex_keys,
    )
    minus_at_checkpoint = traj.spins_at(time_d) == -1
    leak = bool(np.any(minus_at_checkpoint & ~proxy))
    escape = bool(np.any(traj.ever_minus_between(time_d, horizon_end) & ~enlarged))

    if np.any(growth & seeds):
        raise AssertionError("growth set intersects its seeds")
    if np.any(proxy & ~enlarged):
        raise AssertionError("enlargement lost part of the cover")

    return CouplingReport(
        geometry=g,
        boundary=boundary,
        eps=eps,
        alpha=float(alpha),
        time_d=time_d,
        horizon_end=horizon_end,
        seeds=seeds,
        growth=growth,
        growth_settled=growth_settled,
        proxy_parts=parts,
        proxy=proxy,
        minus_at_checkpoint=minus_at_checkpoint,
        leak=leak,
        enlarged=enlarged,
        enlarged_settled=enlarged_settled,
        escape=escape,
        trajectory=traj,
    )


def ring_path_exists(
    g, clocks, source, target, t_end, vertex_keys=None, chunk_rings=200_000
):
    """True iff rings at adjacent vertices chain from source into target.

    The chain must begin with an actual ring at a source vertex; each later
    vertex is activated at its own ring once a neighbour is already active,
    and the question is whether an active vertex inside the target rings
    within [0, t_end].
    """
    V = g.n_vertices
    source = np.asarray(source, dtype=bool)
    target = np.asarray(target, dtype=bool)
    if source.shape != (V,) or target.shape != (V,):
        raise ValueError("source/target masks must match the geometry")
    keys = (
        np.arange(V, dtype=np.int64)
        if vertex_keys is None
        else np.asarray(vertex_keys, dtype=np.int64)
    )
    if t_end <= 0 or not source.any():
        return False
    reached = np.zeros(V, dtype=np.bool_)
    cursor = clocks.cursor(keys)
    t_lo = 0.0
    rings = max(8 * V, 1024)
    while t_lo < t_end:
        t_hi = min(float(t_end), t_lo + rings / V)
        times, locs, _ = cursor.advance_to(t_hi)
        if _kernels.ring_path_sweep(
            times, locs, g.neighbor_table, source, target, reached
        ):
            return True
        t_lo = t_hi
        rings = min(2 * rings, chunk_rings)
    return False


@dataclass
class BlockReport:
    """Goodness verdict for one buffered block plus the full inner pipeline."""

    layout: object
    T: float
    good: bool
    breach: bool
    core_plus_at_end: bool
    degenerate: bool
    couple: CouplingReport


def default_time_window(d):
    """End of the goodness observation window."""
    return float(200 * d**5 + d)


def classify_block(layout, spins, clocks, eps, T=None, vertex_keys=None, alpha=0.5):
    """Judge one block: no ring path breaches the buffer and the core ends '+'.

    `spins` lives on the buffered box; `vertex_keys` (one per collar-box
    vertex) lets many blocks of a larger field share one clock universe.
    All randomness read lives inside the buffered box and its one-vertex
    collar.
    """
    d = layout.d
    T = default_time_window(d) if T is None else float(T)
    if T < d:
        raise ValueError("T must be at least d: the checkpoint sits at time d")
    collar_g = layout.collar_box
    keys_collar = (
        np.arange(collar_g.n_vertices, dtype=np.int64)
        if vertex_keys is None
        else np.asarray(vertex_keys, dtype=np.int64)
    )
    if keys_collar.shape != (collar_g.n_vertices,):
        raise ValueError("vertex_keys must cover the collar box")
    keys_block = keys_collar[layout.outer_to_collar]

    rep = couple_run(
        layout.outer_box,
        spins,
        clocks,
        eps,
        time_d=d,
        horizon_end=T,
        boundary="plus",
        bootstrap_g=layout.outer_torus,
        vertex_keys=keys_block,
        alpha=alpha,
    )
    breach = ring_path_exists(
        collar_g,
        clocks,
        layout.collar_ring_mask,
        layout.inner_mask_collar,
        T,
        vertex_keys=keys_collar,
    )
    core_plus = bool((rep.trajectory.final[layout.inner_mask_outer] == 1).all())
    return BlockReport(
        layout=layout,
        T=T,
        good=(not breach) and core_plus,
        breach=breach,
        core_plus_at_end=core_plus,
        degenerate=layout.degenerate,
        couple=rep,
    )


# -- resampling probes ------------------------------------------------------
#
# Each trial evaluates one membership bit twice: once as-is, once after
# replacing every piece of randomness the bit is claimed not to depend on.
# Equal answers on every trial back the claimed dependency radius.

GROWTH_RADIUS = 8
PROXY_RADIUS = 9
ENLARGED_RADIUS = 58


def growth_locality_trial(g, p, eps, x, master_seed, fresh_seed, radius=GROWTH_RADIUS):
    field = sample_spins(g, p, derive_seed(master_seed, "spins"))
    outside = np.flatnonzero(g.distances_from(x) > radius)
    field2 = resample_region(field, outside, fresh_seed)
    seeds = field.spins == -1
    seeds2 = field2.spins == -1
    before = bool(growth_set(g, seeds, eps)[0][x])
    after = bool(growth_set(g, seeds2, eps)[0][x])
    return before, after


def proxy_locality_trial(g, p, eps, x, master_seed, fresh_seed, radius=PROXY_RADIUS):
    """Resample spins beyond `radius` and every clock except x's own."""
    field = sample_spins(g, p, derive_seed(master_seed, "spins"))
    clocks = ClockStream(derive_seed(master_seed, "clocks"))
    d = g.d

    def member(f, c):
        seeds = f.spins == -1
        growth, _ = growth_set(g, seeds, eps)
        return bool(proxy_cover(g, seeds, growth, c, d).union[x])

    before = member(field, clocks)
    outside = np.flatnonzero(g.distances_from(x) > radius)
    field2 = resample_region(field, outside, derive_seed(fresh_seed, "spins"))
    other_keys = np.setdiff1d(np.arange(g.n_vertices, dtype=np.int64), [x])
    clocks2 = clocks.resample(other_keys, derive_seed(fresh_seed, "clocks"))
    after = member(field2, clocks2)
    return before, after


def enlarged_locality_trial(
    g, p, eps, x, master_seed, fresh_seed, radius=ENLARGED_RADIUS
):
    """Resample spins and clocks beyond `radius`; check the enlarged cover."""
    field = sample_spins(g, p, derive_seed(master_seed, "spins"))
    clocks = ClockStream(derive_seed(master_seed, "clocks"))
    d = g.d

    def member(f, c):
        seeds = f.spins == -1
        growth, _ = growth_set(g, seeds, eps)
        proxy = proxy_cover(g, seeds, growth, c, d).union
        return bool(enlarged_cover(g, proxy)[0][x])

    before = member(field, clocks)
    outside = np.flatnonzero(g.distances_from(x) > radius)
    field2 = resample_region(field, outside, derive_seed(fresh_seed, "spins"))
    clocks2 = clocks.resample(outside, derive_seed(fresh_seed, "clocks"))
    after = member(field2, clocks2)
    return before, after


def goodness_locality_trial(layout, p, eps, T, master_seed, fresh_seed, pad=2):
    """Embed the buffered box in a larger torus; resample everything outside.

    The goodness verdict must not move, because it reads only spins on the
    buffered box and clocks on the box plus its one-vertex collar.
    """
    d = layout.d
    side = layout.outer_side + 2 + pad
    global_g = TorusGeometry.cube(d, side, wrap=True)
    field = sample_spins(global_g, p, derive_seed(master_seed, "spins"))
    clocks = ClockStream(derive_seed(master_seed, "clocks"))

    collar_g = layout.collar_box
    collar_coords = collar_g.coord_table
    keys_collar = np.array(
        [global_g.index(tuple(c)) for c in collar_coords], dtype=np.int64
    )
    block_keys = keys_collar[layout.outer_to_collar]

    def verdict(f, c):
        spins = f.spins[block_keys]
        return classify_block(
            layout, spins, c, eps, T=T, vertex_keys=keys_collar
        ).good

    before = verdict(field, clocks)
    outside = np.setdiff1d(
        np.arange(global_g.n_vertices, dtype=np.int64), keys_collar
    )
    field2 = resample_region(field, outside, derive_seed(fresh_seed, "spins"))
    clocks2 = clocks.resample(outside, derive_seed(fresh_seed, "clocks"))
    after = verdict(field2, clocks2)
    return before, after
