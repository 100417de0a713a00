"""Continuous-time majority dynamics driven by per-vertex Exp(1) clocks.

At each ring the vertex adopts the strict majority sign of its neighbours;
exact ties resolve '+' with probability alpha via a coin tied to the ring.
Boundary handling: "torus" uses the wrapped graph as-is, "free" drops missing
neighbours, "plus"/"minus" pad every missing neighbour slot with a frozen
phantom spin so all vertices compare against the full 2d degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

BOUNDARIES = ("torus", "free", "plus", "minus")
RECORD_MODES = ("flips", "first")


def _phantom_counts(g):
    return 2 * g.d - g.degrees


def neighbor_sums(g, spins, boundary="torus"):
    """Signed neighbour sum per vertex, phantom boundary terms included."""
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary!r}")
    if boundary == "torus" and not g.wrap:
        raise ValueError("torus boundary needs a wrapped geometry")
    padded = np.concatenate([spins.astype(np.int64), np.zeros(1, dtype=np.int64)])
    sums = padded[g.neighbor_table].sum(axis=1)
    if boundary == "plus":
        sums = sums + _phantom_counts(g)
    elif boundary == "minus":
        sums = sums - _phantom_counts(g)
    return sums


def is_stable(g, spins, boundary="torus"):
    """True iff every vertex strictly agrees with its neighbour majority."""
    spins = np.asarray(spins, dtype=np.int8)
    return bool((spins.astype(np.int64) * neighbor_sums(g, spins, boundary) > 0).all())


def _check_spins(g, spins):
    spins = np.asarray(spins, dtype=np.int8).copy()
    if spins.shape != (g.n_vertices,):
        raise ValueError("spin array does not match geometry")
    if not np.isin(spins, (-1, 1)).all():
        raise ValueError("spins must be +1 or -1")
    return spins


@dataclass
class Trajectory:
    """One realized path of the dynamics up to a fixed horizon."""

    geometry: object
    boundary: str
    alpha: float
    horizon: float
    initial: np.ndarray
    final: np.ndarray
    times: np.ndarray
    vertices: np.ndarray
    newspins: np.ndarray
    first_flip: np.ndarray
    flip_count: np.ndarray
    stabilized: bool
    settle_time: float | None
    record: str
    window_edges: np.ndarray | None = None
    window_flip_fraction: np.ndarray | None = None

    @property
    def total_flips(self):
        return int(self.flip_count.sum())

    def spins_at(self, t):
        """Configuration at time t, reconstructed from the flip stream."""
        if self.record != "flips":
            raise ValueError("run was not recorded with record='flips'")
        if t < 0:
            raise ValueError("time must be nonnegative")
        out = self.initial.copy()
        idx = int(np.searchsorted(self.times, t, side="right"))
        if idx:
            rv = self.vertices[:idx][::-1]
            uniq, pos = np.unique(rv, return_index=True)
            out[uniq] = self.newspins[:idx][::-1][pos]
        return out

    def ever_minus_between(self, a, b):
        """Mask of vertices that hold spin -1 at some point of [a, b]."""
        if not 0 <= a <= b:
            raise ValueError("need 0 <= a <= b")
        mask = self.spins_at(a) == -1
        lo = int(np.searchsorted(self.times, a, side="right"))
        hi = int(np.searchsorted(self.times, b, side="right"))
        hits = self.vertices[lo:hi][self.newspins[lo:hi] == -1]
        mask[hits] = True
        return mask

    def flipped_fraction_by(self, edges):
        """Fraction of vertices whose first flip happened by each edge time."""
        edges = np.asarray(edges, dtype=np.float64)
        return (self.first_flip[:, None] <= edges[None, :]).mean(axis=0)


def run_dynamics(
    g,
    initial,
    clocks,
    horizon,
    alpha=0.5,
    boundary="torus",
    record="flips",
    window_edges=None,
    stop_when_stable=True,
    tie_mirror=False,
    vertex_keys=None,
    chunk_rings=200_000,
):
    """Run the dynamics from `initial` up to time `horizon`.

    `clocks` supplies ring times and tie coins keyed by `vertex_keys`
    (defaults to the vertex indices), so runs on different geometries can
    share randomness by sharing keys.  `tie_mirror=True` replaces each tie
    coin c by 1 - c; at alpha = 1/2 this realizes the exact spin-flip mirror
    because coins never equal 1/2.  Events are generated in chunks whose
    boundaries cannot affect the result.
    """
    if record not in RECORD_MODES:
        raise ValueError(f"unknown record mode {record!r}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    spins = _check_spins(g, initial)
    initial_copy = spins.copy()
    V = g.n_vertices
    keys = (
        np.arange(V, dtype=np.int64)
        if vertex_keys is None
        else np.asarray(vertex_keys, dtype=np.int64)
    )
    if keys.shape != (V,):
        raise ValueError("vertex_keys must give one clock key per vertex")

    nbr_sum = neighbor_sums(g, spins, boundary)
    unstable = (spins.astype(np.int64) * nbr_sum) <= 0
    num_unstable = int(unstable.sum())
    first_flip = np.full(V, np.inf)
    flip_count = np.zeros(V, dtype=np.int64)

    if window_edges is not None:
        wedges = np.asarray(window_edges, dtype=np.float64)
        if wedges.ndim != 1 or wedges.size < 2 or np.any(np.diff(wedges) <= 0):
            raise ValueError("window_edges must be increasing with >= 2 entries")
    else:
        wedges = np.empty(0, dtype=np.float64)
    n_windows = max(wedges.size - 1, 0)
    window_hit = np.zeros((V, n_windows), dtype=np.bool_)

    empty_t = np.empty(0, dtype=np.float64)
    empty_v = np.empty(0, dtype=np.int64)
    empty_s = np.empty(0, dtype=np.int8)
    rec_parts = []
    cursor = clocks.cursor(keys)
    t_lo = 0.0
    # geometric ramp-up keeps short runs cheap without hurting long ones
    target = max(8 * V, 1024)
    while t_lo < horizon and not (stop_when_stable and num_unstable == 0):
        t_hi = min(horizon, t_lo + target / V)
        times, locs, ords = cursor.advance_to(t_hi)
        coins = clocks.coins(keys[locs], ords)
        if tie_mirror:
            coins = 1.0 - coins
        if record == "flips" and times.size:
            rec_t = np.empty(times.size, dtype=np.float64)
            rec_v = np.empty(times.size, dtype=np.int64)
            rec_s = np.empty(times.size, dtype=np.int8)
        else:
            rec_t, rec_v, rec_s = empty_t, empty_v, empty_s
        n_rec, num_unstable, stop_i = _kernels.sweep_events(
            times,
            locs,
            coins,
            float(alpha),
            spins,
            g.neighbor_table,
            nbr_sum,
            unstable,
            num_unstable,
            bool(stop_when_stable),
            rec_t,
            rec_v,
            rec_s,
            first_flip,
            flip_count,
            wedges,
            window_hit,
        )
        if record == "flips" and n_rec:
            rec_parts.append((rec_t[:n_rec], rec_v[:n_rec], rec_s[:n_rec]))
        t_lo = t_hi
        if stop_i >= 0:
            break
        target = min(2 * target, chunk_rings)

    if rec_parts:
        times_all = np.concatenate([p[0] for p in rec_parts])
        verts_all = np.concatenate([p[1] for p in rec_parts])
        news_all = np.concatenate([p[2] for p in rec_parts])
    else:
        times_all, verts_all, news_all = empty_t, empty_v, empty_s

    stabilized = num_unstable == 0
    if stabilized:
        if flip_count.sum() == 0:
            settle_time = 0.0
        elif record == "flips":
            settle_time = float(times_all[-1])
        else:
            settle_time = None
    else:
        settle_time = None

    return Trajectory(
        geometry=g,
        boundary=boundary,
        alpha=float(alpha),
        horizon=float(horizon),
        initial=initial_copy,
        final=spins,
        times=times_all,
        vertices=verts_all,
        newspins=news_all,
        first_flip=first_flip,
        flip_count=flip_count,
        stabilized=stabilized,
        settle_time=settle_time,
        record=record,
        window_edges=wedges if n_windows else None,
        window_flip_fraction=window_hit.mean(axis=0) if n_windows else None,
    )


def coupled_run(g, initial_lo, initial_hi, clocks, horizon, **kwargs):
    """Run two initial conditions under the same clocks and tie coins."""
    lo = run_dynamics(g, initial_lo, clocks, horizon, **kwargs)
    hi = run_dynamics(g, initial_hi, clocks, horizon, **kwargs)
    return lo, hi


def count_order_violations(traj_lo, traj_hi):
    """Replay two coupled flip streams; count moments where lo > hi pointwise.

    Zero for every pair started from ordered initials certifies that shared
    randomness preserves the partial order along the whole path.
    """
    for traj in (traj_lo, traj_hi):
        if traj.record != "flips":
            raise ValueError("order replay needs record='flips' runs")
    if np.any(traj_lo.initial > traj_hi.initial):
        raise ValueError("initial conditions are not ordered")
    times = np.concatenate([traj_lo.times, traj_hi.times])
    verts = np.concatenate([traj_lo.vertices, traj_hi.vertices])
    news = np.concatenate([traj_lo.newspins, traj_hi.newspins])
    which = np.concatenate(
        [
            np.zeros(traj_lo.times.size, dtype=np.int8),
            np.ones(traj_hi.times.size, dtype=np.int8),
        ]
    )
    order = np.argsort(times, kind="stable")
    return int(
        _kernels.order_replay(
            times[order],
            verts[order],
            news[order],
            which[order],
            traj_lo.initial.copy(),
            traj_hi.initial.copy(),
        )
    )
