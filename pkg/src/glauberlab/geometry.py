"""Lattice geometry: d-dimensional tori and free rectangular blocks.

Vertices are encoded as mixed-radix integers over `sides` (row-major), and
every operation accepts and returns that canonical index.  Neighbour tables
use the vertex count as a sentinel for missing neighbours so boolean gathers
can append one padding slot instead of branching.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class TorusGeometry:
    """A box {0..sides[i]-1}^d, periodic per instance via `wrap`."""

    sides: tuple
    wrap: bool = True

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        if len(sides) == 0 or any(s < 1 for s in sides):
            raise ValueError("sides must be a nonempty sequence of positive ints")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def cube(cls, d, side, wrap=True):
        return cls((int(side),) * int(d), wrap)

    @property
    def d(self):
        return len(self.sides)

    @cached_property
    def n_vertices(self):
        n = 1
        for s in self.sides:
            n *= s
        return n

    @cached_property
    def strides(self):
        # row-major: last axis varies fastest
        st = [1] * self.d
        for i in range(self.d - 2, -1, -1):
            st[i] = st[i + 1] * self.sides[i + 1]
        return tuple(st)

    def index(self, coords):
        if len(coords) != self.d:
            raise ValueError("coordinate arity mismatch")
        v = 0
        for c, s, st in zip(coords, self.sides, self.strides):
            c = int(c)
            if not 0 <= c < s:
                raise ValueError("coordinate out of range")
            v += c * st
        return v

    def coords(self, v):
        v = int(v)
        if not 0 <= v < self.n_vertices:
            raise ValueError("vertex index out of range")
        out = []
        for st in self.strides:
            out.append(v // st)
            v %= st
        return tuple(out)

    @cached_property
    def coord_table(self):
        """(V, d) int64 array of coordinates."""
        idx = np.arange(self.n_vertices, dtype=np.int64)
        out = np.empty((self.n_vertices, self.d), dtype=np.int64)
        for a, st in enumerate(self.strides):
            out[:, a] = (idx // st) % self.sides[a]
        return out

    @cached_property
    def neighbor_table(self):
        """(V, 2d) int64; columns (2a, 2a+1) are the -1/+1 steps along axis a.

        Missing neighbours (free boundary) hold the sentinel value V.
        """
        V = self.n_vertices
        coords = self.coord_table
        table = np.full((V, 2 * self.d), V, dtype=np.int64)
        base = coords @ np.asarray(self.strides, dtype=np.int64)
        for a, (side, st) in enumerate(zip(self.sides, self.strides)):
            c = coords[:, a]
            if self.wrap and side > 1:
                minus = base + ((c - 1) % side - c) * st
                plus = base + ((c + 1) % side - c) * st
                table[:, 2 * a] = minus
                table[:, 2 * a + 1] = plus
            else:
                ok = c > 0
                table[ok, 2 * a] = base[ok] - st
                ok = c < side - 1
                table[ok, 2 * a + 1] = base[ok] + st
        # a wrapped side of 2 yields the same vertex in both directions; keep
        # both columns (multigraph edges) so degree stays 2d, matching the
        # convention that each axis contributes two neighbour slots
        return table

    @cached_property
    def degrees(self):
        return (self.neighbor_table < self.n_vertices).sum(axis=1).astype(np.int64)

    def neighbors(self, x):
        """Distinct neighbours of x, sorted."""
        x = int(x)
        if not 0 <= x < self.n_vertices:
            raise ValueError("vertex index out of range")
        row = self.neighbor_table[x]
        return np.unique(row[row < self.n_vertices])

    def distances_from(self, x):
        """(V,) graph distances from x (L1, per-axis wrap shortcut)."""
        cx = np.asarray(self.coords(x), dtype=np.int64)
        delta = np.abs(self.coord_table - cx)
        if self.wrap:
            sides = np.asarray(self.sides, dtype=np.int64)
            delta = np.minimum(delta, sides - delta)
        return delta.sum(axis=1)

    def distance(self, x, y):
        cx = self.coords(x)
        cy = self.coords(y)
        total = 0
        for a, side in enumerate(self.sides):
            d = abs(cx[a] - cy[a])
            if self.wrap:
                d = min(d, side - d)
            total += d
        return total

    def sphere(self, x, j):
        """All vertices at graph distance exactly j from x, sorted."""
        if j < 0:
            raise ValueError("radius must be nonnegative")
        return np.flatnonzero(self.distances_from(x) == j)

    def ball(self, x, j):
        if j < 0:
            raise ValueError("radius must be nonnegative")
        return np.flatnonzero(self.distances_from(x) <= j)

    def partition_into_blocks(self, L):
        """Label each vertex with its L^d block; returns (labels, block_dims)."""
        L = int(L)
        if L < 1:
            raise ValueError("block side must be positive")
        for s in self.sides:
            if s % L != 0:
                raise ValueError("every side must be divisible by the block side")
        block_dims = tuple(s // L for s in self.sides)
        bst = [1] * self.d
        for i in range(self.d - 2, -1, -1):
            bst[i] = bst[i + 1] * block_dims[i + 1]
        labels = np.zeros(self.n_vertices, dtype=np.int64)
        for a in range(self.d):
            labels += (self.coord_table[:, a] // L) * bst[a]
        return labels, block_dims


def linf_block_distance(a, b, dims=None, wrap=False):
    """L-infinity distance between two block indices on the block lattice.

    `a` and `b` are coordinate tuples; with `dims` given and wrap=True the
    per-axis difference takes the torus shortcut.
    """
    a = tuple(int(c) for c in a)
    b = tuple(int(c) for c in b)
    if len(a) != len(b):
        raise ValueError("block coordinate arity mismatch")
    best = 0
    for i, (ca, cb) in enumerate(zip(a, b)):
        delta = abs(ca - cb)
        if wrap:
            if dims is None:
                raise ValueError("wrap distance needs lattice dims")
            delta = min(delta, dims[i] - delta)
        best = max(best, delta)
    return best


@dataclass(frozen=True)
class BlockLayout:
    """A core block of side `inner_side` centred in a buffer of side `outer_side`.

    The buffer gets three geometric views: a wrapped torus (bootstrap growth
    runs there), a free box (the dynamics with phantom boundary), and the free
    box enlarged by a one-vertex collar ring (clock coverage for the
    outside-influence sweep).
    """

    d: int
    inner_side: int
    outer_side: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not 0 < self.inner_side <= self.outer_side:
            raise ValueError("need 0 < inner_side <= outer_side")
        if (self.outer_side - self.inner_side) % 2 != 0:
            raise ValueError("inner and outer sides must share a centre (same parity)")

    @classmethod
    def default(cls, d, inner_side=None):
        """Side ratio 5/3: inner 3*2^d and outer 5*2^d unless overridden."""
        if inner_side is None:
            inner_side = 3 * 2 ** d
        if (5 * inner_side) % 3 != 0:
            raise ValueError("default outer side needs inner_side divisible by 3")
        return cls(d, inner_side, 5 * inner_side // 3)

    @property
    def margin(self):
        return (self.outer_side - self.inner_side) // 2

    @property
    def degenerate(self):
        return self.inner_side == self.outer_side

    @cached_property
    def outer_torus(self):
        return TorusGeometry.cube(self.d, self.outer_side, wrap=True)

    @cached_property
    def outer_box(self):
        return TorusGeometry.cube(self.d, self.outer_side, wrap=False)

    @cached_property
    def collar_box(self):
        return TorusGeometry.cube(self.d, self.outer_side + 2, wrap=False)

    @cached_property
    def inner_mask_outer(self):
        """Core vertices as a mask over the buffer index space."""
        c = self.outer_box.coord_table
        lo, hi = self.margin, self.margin + self.inner_side
        return np.all((c >= lo) & (c < hi), axis=1)

    @cached_property
    def outer_to_collar(self):
        """Collar-box index of each buffer vertex (buffer shifted by +1 per axis)."""
        c = self.outer_box.coord_table + 1
        st = np.asarray(self.collar_box.strides, dtype=np.int64)
        return c @ st

    @cached_property
    def collar_ring_mask(self):
        """The one-vertex shell outside the buffer, as a collar-box mask."""
        c = self.collar_box.coord_table
        return np.any((c == 0) | (c == self.outer_side + 1), axis=1)

    @cached_property
    def inner_mask_collar(self):
        mask = np.zeros(self.collar_box.n_vertices, dtype=bool)
        mask[self.outer_to_collar[self.inner_mask_outer]] = True
        return mask

    @property
    def min_breach_path_len(self):
        """Fewest ring events on any collar-to-core path (L1 gap plus one)."""
        return self.margin + 2
