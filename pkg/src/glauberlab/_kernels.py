"""Jitted inner loops.

Everything here takes plain arrays so numba can compile it; the pure-Python
fallback keeps the package usable (slowly) without numba.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit

    def _jit(f):
        return _njit(cache=True)(f)

except ImportError:  # pragma: no cover - exercised only without numba
    def _jit(f):
        return f


@_jit
def sweep_events(
    times,
    verts,
    coins,
    alpha,
    spins,
    nbrs,
    nbr_sum,
    unstable,
    num_unstable,
    stop_when_stable,
    rec_t,
    rec_v,
    rec_s,
    first_flip,
    flip_count,
    window_edges,
    window_hit,
):
    """Process one window of ring events in time order.

    Majority rule against nbr_sum (phantom boundary terms are folded into the
    initial sums); exact ties resolve '+' iff the coin is below alpha.
    Returns (flips recorded, unstable count, index stopped at or -1).
    """
    V = spins.shape[0]
    deg = nbrs.shape[1]
    n_windows = window_edges.shape[0] - 1
    n_rec = 0
    for i in range(times.shape[0]):
        if stop_when_stable and num_unstable == 0:
            return n_rec, num_unstable, i
        v = verts[i]
        s = nbr_sum[v]
        if s > 0:
            new = 1
        elif s < 0:
            new = -1
        elif coins[i] < alpha:
            new = 1
        else:
            new = -1
        if new != spins[v]:
            t = times[i]
            spins[v] = new
            delta = 2 * new
            if rec_t.shape[0] > 0:
                rec_t[n_rec] = t
                rec_v[n_rec] = v
                rec_s[n_rec] = new
            n_rec += 1
            if flip_count[v] == 0:
                first_flip[v] = t
            flip_count[v] += 1
            if n_windows > 0:
                w = np.searchsorted(window_edges, t, side="right") - 1
                if 0 <= w < n_windows:
                    window_hit[v, w] = 1
            was = unstable[v]
            now = spins[v] * nbr_sum[v] <= 0
            if now != was:
                unstable[v] = now
                num_unstable += 1 if now else -1
            for j in range(deg):
                u = nbrs[v, j]
                if u < V:
                    nbr_sum[u] += delta
                    was = unstable[u]
                    now = spins[u] * nbr_sum[u] <= 0
                    if now != was:
                        unstable[u] = now
                        num_unstable += 1 if now else -1
    return n_rec, num_unstable, -1


@_jit
def order_replay(times, verts, news, which, lo, hi):
    """Replay two merged flip streams; count pointwise order violations.

    Flips sharing one timestamp are applied together before checking, since
    they came from the same ring event.
    """
    n = times.shape[0]
    violations = 0
    i = 0
    while i < n:
        t = times[i]
        j = i
        while j < n and times[j] == t:
            if which[j] == 0:
                lo[verts[j]] = news[j]
            else:
                hi[verts[j]] = news[j]
            j += 1
        for k in range(i, j):
            v = verts[k]
            if lo[v] > hi[v]:
                violations += 1
        i = j
    return violations


@_jit
def closure_queue(seed_mask, nbrs, r):
    """Least fixed point of r-neighbour growth via an infected-counter queue."""
    V = seed_mask.shape[0]
    deg = nbrs.shape[1]
    infected = seed_mask.copy()
    counts = np.zeros(V, dtype=np.int64)
    queue = np.empty(V, dtype=np.int64)
    head = 0
    tail = 0
    for v in range(V):
        if infected[v]:
            queue[tail] = v
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(deg):
            u = nbrs[v, j]
            if u < V and not infected[u]:
                counts[u] += 1
                if counts[u] >= r:
                    infected[u] = True
                    queue[tail] = u
                    tail += 1
    return infected


@_jit
def ring_path_sweep(times, verts, nbrs, source, target, reached):
    """Advance clock-ring reachability through one window of events.

    A ring at v activates v if v is a source, or if some neighbour was
    activated at an earlier event.  Returns True once an activated vertex
    inside the target rings.  `reached` persists across windows.
    """
    V = reached.shape[0]
    deg = nbrs.shape[1]
    for i in range(times.shape[0]):
        v = verts[i]
        if reached[v]:
            continue
        act = source[v]
        if not act:
            for j in range(deg):
                u = nbrs[v, j]
                if u < V and reached[u]:
                    act = True
                    break
        if act:
            reached[v] = True
            if target[v]:
                return True
    return False
