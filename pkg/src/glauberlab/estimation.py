"""Monte Carlo harness: fixation and percolation estimates, bisection, profiles.

Replica i of an experiment draws every bit of randomness from seeds derived
as (master, purpose, i), so estimates are reproducible bit-for-bit, replicas
parallelize without reordering effects, and sweeps sharing one master seed
are exactly coupled across parameter values (the same per-vertex uniforms
decide each field, so raising p only ever adds '+' vertices).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import closure
from .glauber import run_dynamics
from .randomness import ClockStream, derive_seed, sample_spins

WILSON_Z = 1.959963984540054

OUTCOMES = ("plus", "minus", "stable_other", "unresolved")


def wilson_interval(successes, n, z=WILSON_Z):
    """95% score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    lo = max(0.0, center - half)
    hi = min(1.0, center + half)
    # at the boundary the score limit is exactly 0 or 1; avoid float undershoot
    if successes == 0:
        lo = 0.0
    if successes == n:
        hi = 1.0
    return (lo, hi)


@dataclass
class EstimateRecord:
    """One Monte Carlo estimate with its full provenance."""

    experiment: str
    params: dict
    replicas: int
    successes: int
    estimate: float
    interval: tuple
    tallies: dict
    master_seed: int
    wall_time: float | None = None

    def __post_init__(self):
        if not 0 <= self.successes <= self.replicas:
            raise ValueError("successes out of range")
        lo, hi = self.interval
        if not lo <= self.estimate <= hi:
            raise ValueError("interval must contain the point estimate")


def _map_jobs(fn, tasks, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks, chunksize=4))
    return [fn(t) for t in tasks]


def classify_final(traj):
    """plus / minus / stable_other / unresolved for one finished run."""
    if not traj.stabilized:
        return "unresolved"
    if (traj.final == 1).all():
        return "plus"
    if (traj.final == -1).all():
        return "minus"
    return "stable_other"


def _fixation_one(args):
    g, p, alpha, boundary, max_T, master, i, mirror_pairs = args
    if mirror_pairs:
        j = i // 2
        spins = sample_spins(g, p, derive_seed(master, "spins", j)).spins
        clocks = ClockStream(derive_seed(master, "clocks", j))
        mirror = i % 2 == 1
        if mirror:
            spins = -spins
    else:
        spins = sample_spins(g, p, derive_seed(master, "spins", i)).spins
        clocks = ClockStream(derive_seed(master, "clocks", i))
        mirror = False
    traj = run_dynamics(
        g,
        spins,
        clocks,
        horizon=max_T,
        alpha=alpha,
        boundary=boundary,
        record="first",
        tie_mirror=mirror,
    )
    return classify_final(traj)


def fixation_probability(
    g,
    p,
    seed,
    replicas,
    max_T,
    alpha=0.5,
    boundary="torus",
    mirror_pairs=False,
    jobs=1,
):
    """Fraction of runs that reach the all-'+' absorbing state by max_T.

    Runs that stabilize elsewhere count as failures but are tallied apart
    from unresolved ones.  With mirror_pairs, odd replicas rerun the previous
    replica's field negated under the mirrored tie rule (p must be 1/2), so
    '+' and '-' consensus counts over the whole record are exactly equal in
    law and in realization.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    if mirror_pairs:
        if p != 0.5:
            raise ValueError("mirror pairing requires p = 1/2")
        if replicas % 2:
            raise ValueError("mirror pairing requires an even replica count")
    t0 = time.perf_counter()
    tasks = [
        (g, p, alpha, boundary, float(max_T), seed, i, mirror_pairs)
        for i in range(replicas)
    ]
    outcomes = _map_jobs(_fixation_one, tasks, jobs)
    tallies = {k: outcomes.count(k) for k in OUTCOMES}
    successes = tallies["plus"]
    return EstimateRecord(
        experiment="fixation",
        params={
            "d": g.d,
            "sides": list(g.sides),
            "p": p,
            "alpha": alpha,
            "boundary": boundary,
            "max_T": float(max_T),
            "mirror_pairs": bool(mirror_pairs),
        },
        replicas=replicas,
        successes=successes,
        estimate=successes / replicas,
        interval=wilson_interval(successes, replicas),
        tallies=tallies,
        master_seed=int(seed),
        wall_time=time.perf_counter() - t0,
    )


def _percolation_one(args):
    g, r, p, master, i = args
    spins = sample_spins(g, 1.0 - p, derive_seed(master, "spins", i)).spins
    infected = spins == -1
    return bool(closure(g, infected, r).all())


def bootstrap_percolation_probability(g, r, p, seed, replicas, jobs=1):
    """Probability that an iid density-p infected set grows to everything."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if replicas < 1:
        raise ValueError("need at least one replica")
    t0 = time.perf_counter()
    tasks = [(g, r, p, seed, i) for i in range(replicas)]
    hits = _map_jobs(_percolation_one, tasks, jobs)
    successes = int(sum(hits))
    return EstimateRecord(
        experiment="bootstrap_percolation",
        params={"d": g.d, "sides": list(g.sides), "r": int(r), "p": p},
        replicas=replicas,
        successes=successes,
        estimate=successes / replicas,
        interval=wilson_interval(successes, replicas),
        tallies={"percolates": successes, "stuck": replicas - successes},
        master_seed=int(seed),
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class BisectTrace:
    """Bisection result with every probe kept for replay."""

    p_hat: float
    bracket: tuple
    target: float
    tol: float
    probes: list = field(default_factory=list)


def threshold_bisect(evaluator, lo, hi, target=0.5, tol=1 / 64):
    """Bisect a monotone p -> estimate map until the bracket is narrow.

    The endpoints must bracket the target (estimate(lo) <= target <=
    estimate(hi)); evaluators built on one master seed reuse the same
    replica randomness at every probe, making the whole trace deterministic.
    """
    if not 0 <= lo < hi <= 1:
        raise ValueError("need 0 <= lo < hi <= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rec_lo = evaluator(lo)
    rec_hi = evaluator(hi)
    probes = [(lo, rec_lo), (hi, rec_hi)]
    if not rec_lo.estimate <= target <= rec_hi.estimate:
        raise ValueError(
            f"endpoints do not bracket the target: "
            f"P({lo}) = {rec_lo.estimate}, P({hi}) = {rec_hi.estimate}"
        )
    while hi - lo > tol:
        mid = (lo + hi) / 2
        rec = evaluator(mid)
        probes.append((mid, rec))
        if rec.estimate >= target:
            hi = mid
        else:
            lo = mid
    return BisectTrace(
        p_hat=(lo + hi) / 2,
        bracket=(lo, hi),
        target=target,
        tol=tol,
        probes=probes,
    )


def bootstrap_threshold_evaluator(g, r, seed, replicas, jobs=1):
    def evaluate(p):
        return bootstrap_percolation_probability(g, r, p, seed, replicas, jobs=jobs)

    return evaluate


def fixation_threshold_evaluator(g, seed, replicas, max_T, alpha=0.5,
                                 boundary="torus", jobs=1):
    def evaluate(p):
        return fixation_probability(
            g, p, seed, replicas, max_T, alpha=alpha, boundary=boundary, jobs=jobs
        )

    return evaluate


def _activity_one(args):
    g, p, alpha, boundary, edges, master, i, origin = args
    spins = sample_spins(g, p, derive_seed(master, "spins", i)).spins
    clocks = ClockStream(derive_seed(master, "clocks", i))
    traj = run_dynamics(
        g,
        spins,
        clocks,
        horizon=float(edges[-1]),
        alpha=alpha,
        boundary=boundary,
        record="first",
        window_edges=edges,
    )
    origin_first = float(traj.first_flip[origin])
    return traj.window_flip_fraction, origin_first


@dataclass
class ActivityProfile:
    """Per-window flip activity and the origin's first-flip curve."""

    params: dict
    window_edges: np.ndarray
    window_flip_fraction: np.ndarray
    window_flip_se: np.ndarray
    origin_flipped_by: np.ndarray
    replicas: int
    master_seed: int
    wall_time: float | None = None


def activity_profile(
    g,
    p,
    seed,
    replicas,
    window_edges,
    alpha=0.5,
    boundary="torus",
    origin=0,
    jobs=1,
):
    """Average fraction of vertices flipping per window, plus P(origin flips by t)."""
    edges = np.asarray(window_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("window_edges must be increasing with >= 2 entries")
    t0 = time.perf_counter()
    tasks = [(g, p, alpha, boundary, edges, seed, i, origin) for i in range(replicas)]
    results = _map_jobs(_activity_one, tasks, jobs)
    fracs = np.stack([r[0] for r in results])
    firsts = np.asarray([r[1] for r in results])
    curve = (firsts[:, None] <= edges[None, :]).mean(axis=0)
    return ActivityProfile(
        params={
            "d": g.d,
            "sides": list(g.sides),
            "p": p,
            "alpha": alpha,
            "boundary": boundary,
            "origin": int(origin),
        },
        window_edges=edges,
        window_flip_fraction=fracs.mean(axis=0),
        window_flip_se=fracs.std(axis=0, ddof=1) / np.sqrt(max(replicas, 2))
        if replicas > 1
        else np.zeros(edges.size - 1),
        origin_flipped_by=curve,
        replicas=replicas,
        master_seed=int(seed),
        wall_time=time.perf_counter() - t0,
    )


def sweep_fixation(g, ps, seed, replicas, max_T, alpha=0.5, boundary="torus", jobs=1):
    """Fixation estimates over a p grid, exactly coupled via one master seed."""
    return [
        fixation_probability(
            g, p, seed, replicas, max_T, alpha=alpha, boundary=boundary, jobs=jobs
        )
        for p in ps
    ]


def sweep_bootstrap(g, r, ps, seed, replicas, jobs=1):
    """Percolation estimates over a p grid, coupled via one master seed."""
    return [
        bootstrap_percolation_probability(g, r, p, seed, replicas, jobs=jobs)
        for p in ps
    ]
