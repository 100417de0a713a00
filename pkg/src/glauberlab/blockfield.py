"""Block-constant spin fields: iid samplers, goodness-derived fields, checks.

A block field assigns one spin to each block of a partition of the torus into
cubes of side L.  Membership in the target distribution class requires
block-constancy (exact), a common '+' rate across blocks, and independence of
blocks whose lattice positions are at L-infinity distance at least 2; the
last two are distributional, so they are tested statistically from samples.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .coupling import bias_from_density, classify_block, default_time_window
from .geometry import linf_block_distance
from .randomness import (
    PURPOSE_DERIVE,
    ClockStream,
    derive_seed,
    sample_spins,
    uniforms,
)


@dataclass
class BlockField:
    """One spin per block of a cubic partition."""

    d: int
    inner_side: int
    block_dims: tuple
    block_spins: np.ndarray
    provenance: str
    p_nominal: float | None
    seed: int

    @property
    def n_blocks(self):
        return int(np.prod(self.block_dims))

    @property
    def global_sides(self):
        return tuple(int(m) * self.inner_side for m in self.block_dims)

    @property
    def p_effective(self):
        return float((self.block_spins == 1).mean())

    def to_vertex_spins(self, global_g):
        """Expand to a vertex-level field: every vertex copies its block."""
        labels, dims = global_g.partition_into_blocks(self.inner_side)
        if dims != self.block_dims:
            raise ValueError("geometry does not match the block lattice")
        return self.block_spins[labels]


def sample_iid_blockfield(global_g, inner_side, p, seed):
    """Blocks '+' independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    _, dims = global_g.partition_into_blocks(inner_side)
    n = int(np.prod(dims))
    u = uniforms(seed, PURPOSE_DERIVE, np.arange(n, dtype=np.int64), np.int64(0))
    spins = np.where(u < p, 1, -1).astype(np.int8)
    return BlockField(
        d=global_g.d,
        inner_side=inner_side,
        block_dims=dims,
        block_spins=spins,
        provenance="iid",
        p_nominal=float(p),
        seed=int(seed),
    )


def blockfield_from_vertex_spins(global_g, inner_side, spins, provenance="derived",
                                 p_nominal=None, seed=0):
    """Wrap a vertex field as a block field; intra-block disagreement raises."""
    ok, bad = check_block_constancy(global_g, inner_side, spins)
    if not ok:
        raise ValueError(f"{bad} blocks are not constant")
    labels, dims = global_g.partition_into_blocks(inner_side)
    order = np.argsort(labels, kind="stable")
    starts = np.searchsorted(labels[order], np.arange(int(np.prod(dims))))
    reps = order[starts]
    return BlockField(
        d=global_g.d,
        inner_side=inner_side,
        block_dims=dims,
        block_spins=np.asarray(spins, dtype=np.int8)[reps],
        provenance=provenance,
        p_nominal=p_nominal,
        seed=int(seed),
    )


def check_block_constancy(global_g, inner_side, spins):
    """(all blocks constant?, number of non-constant blocks)."""
    labels, dims = global_g.partition_into_blocks(inner_side)
    spins = np.asarray(spins)
    order = np.argsort(labels, kind="stable")
    starts = np.searchsorted(labels[order], np.arange(int(np.prod(dims))))
    reps = order[starts]
    mismatch = spins != spins[reps][labels]
    bad = int(np.unique(labels[mismatch]).size)
    return bad == 0, bad


def block_collar_keys(global_g, layout, block_coords):
    """Global vertex keys of one block's buffered box plus its collar ring.

    `block_coords` indexes the block lattice; the buffer is centered on the
    block and everything wraps on the global torus.
    """
    d = global_g.d
    sides = np.asarray(global_g.sides, dtype=np.int64)
    start = (
        np.asarray(block_coords, dtype=np.int64) * layout.inner_side
        - layout.margin
        - 1
    )
    coords = (layout.collar_box.coord_table + start[None, :]) % sides[None, :]
    return coords @ np.asarray(global_g.strides, dtype=np.int64)


def classify_block_in_field(global_g, layout, field, clocks, block_coords, eps,
                            T=None):
    """Judge one block of a global field, reading only its buffered window."""
    keys = block_collar_keys(global_g, layout, block_coords)
    spins = field.spins[keys[layout.outer_to_collar]]
    return classify_block(layout, spins, clocks, eps, T=T, vertex_keys=keys)


def _goodness_one(args):
    global_g, layout, field, clocks, coords, eps, T = args
    rep = classify_block_in_field(global_g, layout, field, clocks, coords, eps, T)
    return rep.good


def goodness_blockfield(global_g, layout, p, seed, eps=None, T=None, jobs=1):
    """Block field whose spin is '+' exactly on the good blocks.

    One spin field and one clock universe, keyed by global vertex index,
    cover the whole torus; each block is judged from its own buffered window
    of that shared randomness, so disjoint windows give independent verdicts.
    """
    if eps is None:
        eps = bias_from_density(p)
    _, dims = global_g.partition_into_blocks(layout.inner_side)
    T = default_time_window(layout.d) if T is None else float(T)
    field = sample_spins(global_g, p, derive_seed(seed, "spins"))
    clocks = ClockStream(derive_seed(seed, "clocks"))
    all_coords = [
        tuple(c)
        for c in np.stack(
            np.unravel_index(np.arange(int(np.prod(dims))), dims), axis=1
        )
    ]
    tasks = [(global_g, layout, field, clocks, c, eps, T) for c in all_coords]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            goods = list(pool.map(_goodness_one, tasks, chunksize=8))
    else:
        goods = [_goodness_one(t) for t in tasks]
    spins = np.where(np.asarray(goods, dtype=bool), 1, -1).astype(np.int8)
    return BlockField(
        d=global_g.d,
        inner_side=layout.inner_side,
        block_dims=dims,
        block_spins=spins,
        provenance="goodness",
        p_nominal=float(p),
        seed=int(seed),
    )


@dataclass
class OmegaReport:
    """Statistical verdict on membership in the block-distribution class."""

    constancy_ok: bool
    constancy_checked: bool
    uniformity_z: float | None
    uniformity_ok: bool
    pair_stat: float | None
    pair_ok: bool
    pair_skipped: bool
    triple_stat: float | None
    triple_ok: bool
    triple_skipped: bool
    level: float
    trials: int

    @property
    def ok(self):
        return self.constancy_ok and self.uniformity_ok and self.pair_ok and self.triple_ok


def _separated_tuples(dims, count, arity, rng):
    """Block-index tuples at short pairwise L-inf separation in [2, 3].

    A base block is uniform; its partners sit at small random offsets.  Short
    offsets keep the probe sensitive to spatial structure: with positions
    drawn independently the contingency table would match its margin product
    for any fixed field and the test would have no power.
    """
    dims = tuple(int(m) for m in dims)
    d = len(dims)
    if any(m < 7 for m in dims):
        # wrapped short offsets need room to stay pairwise separated
        return []
    out = []
    attempts = 0
    while len(out) < count and attempts < 50 * count:
        attempts += 1
        base = np.array([rng.integers(0, m) for m in dims], dtype=np.int64)
        coords = [base]
        for _ in range(arity - 1):
            step = rng.integers(2, 4, size=d) * rng.choice((-1, 1), size=d)
            step[rng.random(d) < 0.3] = 0
            coords.append((coords[-1] + step) % np.asarray(dims))
        ok = all(
            linf_block_distance(coords[a], coords[b], dims, wrap=True) >= 2
            for a in range(arity)
            for b in range(a + 1, arity)
        )
        if ok:
            out.append(tuple(int(np.ravel_multi_index(c, dims)) for c in coords))
    return out


def _independence_chi2(spins, tuples, arity):
    """Chi-square stat for full independence of the selected block tuples.

    Returns (stat, dof) or (None, None) when a margin degenerates.
    """
    bits = (spins[np.asarray(tuples)] == 1).astype(int)
    counts = np.zeros((2,) * arity, dtype=float)
    for row in bits:
        counts[tuple(row)] += 1
    total = counts.sum()
    margins = [counts.sum(axis=tuple(j for j in range(arity) if j != a)) for a in range(arity)]
    if any((m == 0).any() for m in margins):
        return None, None
    expected = np.ones_like(counts) * total
    for a, m in enumerate(margins):
        shape = [1] * arity
        shape[a] = 2
        expected = expected * (m / total).reshape(shape)
    stat = float(((counts - expected) ** 2 / expected).sum())
    dof = 2**arity - 1 - arity
    return stat, dof


def check_omega_membership(
    f,
    separation_trials=400,
    seed=0,
    level=0.001,
    vertex_spins=None,
    global_g=None,
):
    """Exact block-constancy check plus statistical rate/independence checks.

    Constancy is exact when a vertex field is supplied, and true by
    construction otherwise.  Uniformity compares the '+' rate of the two
    parity classes of the block lattice; independence tests 2-separated pairs
    and triples with chi-square at the given level.  Degenerate tables
    (all-equal fields, empty margins) are skipped, not failed.
    """
    if vertex_spins is not None:
        constancy_ok, _ = check_block_constancy(global_g, f.inner_side, vertex_spins)
        constancy_checked = True
    else:
        constancy_ok, constancy_checked = True, False

    spins = f.block_spins
    dims = f.block_dims
    coords = np.stack(np.unravel_index(np.arange(f.n_blocks), dims), axis=1)
    parity = coords.sum(axis=1) % 2
    plus = spins == 1
    n0, n1 = int((parity == 0).sum()), int((parity == 1).sum())
    k0, k1 = int(plus[parity == 0].sum()), int(plus[parity == 1].sum())
    pooled = (k0 + k1) / (n0 + n1)
    if n0 and n1 and 0 < pooled < 1:
        se = np.sqrt(pooled * (1 - pooled) * (1 / n0 + 1 / n1))
        z = float((k0 / n0 - k1 / n1) / se)
        uniformity_ok = abs(z) < float(norm.isf(level / 2))
    else:
        z, uniformity_ok = None, True

    rng = np.random.default_rng(seed)
    pair_stat = triple_stat = None
    pair_ok = triple_ok = True
    pair_skipped = triple_skipped = True
    pairs = _separated_tuples(dims, separation_trials, 2, rng)
    if len(pairs) >= max(20, separation_trials // 2):
        pair_stat, dof = _independence_chi2(spins, pairs, 2)
        if pair_stat is not None:
            pair_ok = pair_stat < float(chi2.isf(level, dof))
            pair_skipped = False
    triples = _separated_tuples(dims, separation_trials, 3, rng)
    if len(triples) >= max(20, separation_trials // 2):
        triple_stat, dof = _independence_chi2(spins, triples, 3)
        if triple_stat is not None:
            triple_ok = triple_stat < float(chi2.isf(level, dof))
            triple_skipped = False

    return OmegaReport(
        constancy_ok=constancy_ok,
        constancy_checked=constancy_checked,
        uniformity_z=z,
        uniformity_ok=bool(uniformity_ok),
        pair_stat=pair_stat,
        pair_ok=bool(pair_ok),
        pair_skipped=pair_skipped,
        triple_stat=triple_stat,
        triple_ok=bool(triple_ok),
        triple_skipped=triple_skipped,
        level=level,
        trials=separation_trials,
    )
