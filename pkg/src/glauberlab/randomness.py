"""Counter-based randomness shared by every experiment.

Each draw is a pure function of (master_seed, purpose, key, counter) pushed
through a splitmix64 chain, so streams need no stored state: coupled runs can
replay identical clocks and coins, replicas split by deriving fresh seeds, and
locality tests can resample a chosen set of keys while leaving every other
draw bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64
_MASK64 = (1 << 64) - 1

# purpose tags keep unrelated draw families in disjoint streams
PURPOSE_SPIN = 0x51
PURPOSE_CLOCK = 0x52
PURPOSE_COIN = 0x53
PURPOSE_DERIVE = 0x54


def _mix64(z):
    # uint64 wraparound is the point here, not an accident
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        return z ^ (z >> _U64(31))


def _as_u64(x):
    if isinstance(x, (int, np.integer)):
        return _U64(int(x) & _MASK64)
    a = np.asarray(x)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).view(np.uint64)


def hash_words(seed, purpose, keys, counters):
    """uint64 hash, vectorized over keys/counters (broadcast)."""
    h = _mix64(_as_u64(seed))
    h = _mix64(h ^ _U64(int(purpose) & _MASK64))
    h = _mix64(h ^ _as_u64(keys))
    h = _mix64(h ^ _as_u64(counters))
    return h


def uniforms(seed, purpose, keys, counters):
    """Uniforms in the open interval (0,1); never exactly 0, 1/2, or 1."""
    h = hash_words(seed, purpose, keys, counters)
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def derive_seed(seed, *parts):
    """Split a master seed into an independent child seed.

    Parts are integers (replica index, block index, a short ASCII tag folded
    to an int, ...); the same parts always give the same child.
    """
    h = _mix64(_as_u64(int(seed)))
    h = _mix64(h ^ _U64(PURPOSE_DERIVE))
    for part in parts:
        if isinstance(part, str):
            part = int.from_bytes(part.encode()[:8].ljust(8, b"\0"), "little")
        h = _mix64(h ^ _U64(int(part) & _MASK64))
    return int(h)


@dataclass(frozen=True, eq=False)
class SpinField:
    """Vertex spins in {-1,+1} on a geometry, with sampling provenance."""

    geometry: object
    spins: np.ndarray
    p: float
    seed: int

    def __post_init__(self):
        if self.spins.shape != (self.geometry.n_vertices,):
            raise ValueError("spin array does not match geometry")

    @property
    def magnetization(self):
        return float(self.spins.mean())

    def flipped(self):
        return SpinField(self.geometry, (-self.spins).astype(np.int8), 1.0 - self.p, self.seed)


def sample_spins(g, p, seed):
    """Independent Bernoulli(p) '+' spins, deterministic in (g, p, seed)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0,1]")
    u = uniforms(seed, PURPOSE_SPIN, np.arange(g.n_vertices, dtype=np.int64), 0)
    spins = np.where(u < p, 1, -1).astype(np.int8)
    return SpinField(g, spins, float(p), int(seed))


def resample_region(f, region, fresh_seed):
    """Redraw spins on `region` from fresh_seed; all other spins unchanged."""
    region = np.asarray(region, dtype=np.int64)
    spins = f.spins.copy()
    if region.size:
        u = uniforms(fresh_seed, PURPOSE_SPIN, region, 0)
        spins[region] = np.where(u < f.p, 1, -1).astype(np.int8)
    return SpinField(f.geometry, spins, f.p, f.seed)


class ClockStream:
    """Rate-1 exponential ring times and per-ring tie coins, keyed by vertex.

    Ring j of key x happens at the sum of gaps 0..j, each gap
    -log(uniform(seed_x, CLOCK, x, gap_index)).  seed_x is the master seed
    unless x sits in a resample patch.  Everything is recomputable, so
    querying any window twice gives identical times.
    """

    def __init__(self, master_seed, _patches=()):
        self.master_seed = int(master_seed)
        self._patches = tuple(_patches)

    def resample(self, keys, fresh_seed):
        """A stream equal to this one except keys in `keys` draw from fresh_seed."""
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        return ClockStream(self.master_seed, self._patches + ((keys, int(fresh_seed)),))

    def seeds_for(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        out = np.full(keys.shape, _as_u64(self.master_seed), dtype=np.uint64)
        for patch_keys, patch_seed in self._patches:
            hit = np.isin(keys, patch_keys)
            out[hit] = _as_u64(patch_seed)
        return out

    def _gaps(self, seeds, keys, counters):
        h = _mix64(seeds)
        h = _mix64(h ^ _U64(PURPOSE_CLOCK))
        h = _mix64(h ^ _as_u64(keys))
        h = _mix64(h ^ _as_u64(counters))
        u = ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
        return -np.log(u)

    def first_ring(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        return self._gaps(self.seeds_for(keys), keys, np.int64(0))

    def rings_in(self, key, a, b):
        """Sorted ring times of one key inside [a, b]."""
        if not 0 <= a <= b:
            raise ValueError("need 0 <= a <= b")
        key_arr = np.asarray([key], dtype=np.int64)
        seed = self.seeds_for(key_arr)
        out = []
        t = 0.0
        k = 0
        while True:
            t += float(self._gaps(seed, key_arr, np.int64(k))[0])
            if t > b:
                break
            if t >= a:
                out.append(t)
            k += 1
        return np.asarray(out, dtype=np.float64)

    def ring_counts(self, keys, a, b):
        """Number of rings in [a, b] per key, vectorized."""
        if not 0 <= a <= b:
            raise ValueError("need 0 <= a <= b")
        keys = np.asarray(keys, dtype=np.int64)
        seeds = self.seeds_for(keys)
        t = self._gaps(seeds, keys, np.int64(0))
        k = np.zeros(keys.shape, dtype=np.int64)
        counts = np.zeros(keys.shape, dtype=np.int64)
        active = np.flatnonzero(t <= b)
        while active.size:
            counts[active] += (t[active] >= a).astype(np.int64)
            k[active] += 1
            t[active] += self._gaps(seeds[active], keys[active], k[active])
            active = active[t[active] <= b]
        return counts

    def coin(self, key, ordinal):
        return float(self.coins(np.asarray([key], dtype=np.int64), np.asarray([ordinal]))[0])

    def coins(self, keys, ordinals):
        """Tie coin for each (key, ring ordinal)."""
        keys = np.asarray(keys, dtype=np.int64)
        h = _mix64(self.seeds_for(keys))
        h = _mix64(h ^ _U64(PURPOSE_COIN))
        h = _mix64(h ^ _as_u64(keys))
        h = _mix64(h ^ _as_u64(np.asarray(ordinals)))
        return ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def cursor(self, keys):
        return ClockCursor(self, keys)


class ClockCursor:
    """Streams the merged rings of a key set in global time order.

    advance_to(b) emits every ring in (last frontier, b] sorted by time, ties
    broken by local key position.  Emission order never depends on how the
    horizon is chopped into windows.
    """

    def __init__(self, stream, keys):
        self.stream = stream
        self.keys = np.asarray(keys, dtype=np.int64)
        self._seeds = stream.seeds_for(self.keys)
        self._pending_t = stream._gaps(self._seeds, self.keys, np.int64(0))
        self._pending_k = np.zeros(self.keys.shape, dtype=np.int64)
        self.frontier = 0.0

    def advance_to(self, b):
        """Returns (times, local_indices, ring_ordinals), time-sorted."""
        if b < self.frontier:
            raise ValueError("cursor cannot move backwards")
        times = []
        locs = []
        ords = []
        active = np.flatnonzero(self._pending_t <= b)
        while active.size:
            times.append(self._pending_t[active].copy())
            locs.append(active.copy())
            ords.append(self._pending_k[active].copy())
            self._pending_k[active] += 1
            gaps = self.stream._gaps(
                self._seeds[active], self.keys[active], self._pending_k[active]
            )
            self._pending_t[active] = self._pending_t[active] + gaps
            active = active[self._pending_t[active] <= b]
        self.frontier = float(b)
        if not times:
            empty_f = np.empty(0, dtype=np.float64)
            empty_i = np.empty(0, dtype=np.int64)
            return empty_f, empty_i, empty_i
        t = np.concatenate(times)
        l = np.concatenate(locs)
        k = np.concatenate(ords)
        order = np.lexsort((l, t))
        return t[order], l[order], k[order]
