from fractions import Fraction

import numpy as np
import pytest

import oracles
from glauberlab.coupling import (
    bias_from_density,
    check_bias,
    classify_block,
    couple_run,
    default_time_window,
    density_from_bias,
    enlarged_cover,
    enlargement_rule,
    goodness_locality_trial,
    growth_locality_trial,
    growth_rule,
    growth_set,
    proxy_cover,
    proxy_locality_trial,
    ring_path_exists,
)
from glauberlab.geometry import BlockLayout, TorusGeometry
from glauberlab.randomness import ClockStream, sample_spins


def test_bias_density_roundtrip():
    eps = check_bias("3/10")
    assert eps == Fraction(3, 10)
    assert density_from_bias(eps) == Fraction(4, 5)
    assert bias_from_density(0.8) == Fraction(3, 10)


def test_bias_must_be_in_open_interval():
    with pytest.raises(ValueError):
        check_bias(0)
    with pytest.raises(ValueError):
        check_bias("1/2")
    with pytest.raises(ValueError):
        check_bias("-1/10")


def test_rule_parameters():
    rule = growth_rule(4, Fraction(3, 10))
    assert rule.r == 4 and rule.k == 8
    assert rule.m == Fraction(3, 10) * 4 / 24
    rule = enlargement_rule(4)
    assert rule.r == 4 and rule.k == 40 and rule.m == Fraction(4, 80)


def test_growth_set_excludes_seeds():
    g = TorusGeometry.cube(3, 5, wrap=True)
    seeds = sample_spins(g, 0.4, 3).spins == -1
    growth, settled = growth_set(g, seeds, Fraction(1, 5))
    assert not np.any(growth & seeds)
    assert isinstance(settled, bool)


def test_proxy_parts_cover_definition():
    g = TorusGeometry.cube(2, 8, wrap=True)
    seeds = sample_spins(g, 0.35, 5).spins == -1
    growth, _ = growth_set(g, seeds, Fraction(1, 5))
    clocks = ClockStream(17)
    parts = proxy_cover(g, seeds, growth, clocks, time_d=2.0)
    keys = np.arange(g.n_vertices, dtype=np.int64)
    silent = clocks.ring_counts(keys, 0.0, 2.0) == 0
    assert np.array_equal(parts.silent, silent)
    from glauberlab.bootstrap import infected_neighbor_counts

    assert np.array_equal(parts.heavy_seed_neighbors, infected_neighbor_counts(g, seeds) >= 2)
    assert np.array_equal(parts.touching_growth, infected_neighbor_counts(g, growth) >= 1)
    assert np.array_equal(
        parts.union, parts.silent | parts.heavy_seed_neighbors | parts.touching_growth
    )


def test_enlarged_contains_proxy():
    g = TorusGeometry.cube(2, 10, wrap=True)
    proxy = sample_spins(g, 0.3, 9).spins == 1
    enlarged, settled = enlarged_cover(g, proxy)
    assert np.all(enlarged >= proxy)


def test_couple_run_invariants():
    g = TorusGeometry.cube(3, 5, wrap=True)
    rng = np.random.default_rng(1)
    for trial in range(15):
        p = float(rng.uniform(0.55, 0.95))
        spins = sample_spins(g, p, int(rng.integers(1 << 30))).spins
        rep = couple_run(g, spins, ClockStream(int(rng.integers(1 << 30))), bias_from_density(p))
        assert not np.any(rep.growth & rep.seeds)
        assert np.all(rep.enlarged >= rep.proxy)
        assert np.array_equal(rep.seeds, spins == -1)
        # leak recomputed from the definition
        assert rep.leak == bool(np.any(rep.minus_at_checkpoint & ~rep.proxy))


def test_deterministic_implications_small():
    # settled growth certifies no leak; add settled enlargement for no escape
    g = TorusGeometry.cube(3, 5, wrap=True)
    rng = np.random.default_rng(7)
    for trial in range(40):
        p = float(rng.uniform(0.6, 0.95))
        spins = sample_spins(g, p, int(rng.integers(1 << 30))).spins
        rep = couple_run(g, spins, ClockStream(int(rng.integers(1 << 30))), bias_from_density(p))
        if rep.growth_settled:
            assert not rep.leak
        if rep.growth_settled and rep.enlarged_settled:
            assert not rep.escape


def test_ring_path_empty_cases():
    g = TorusGeometry.cube(1, 5, wrap=True)
    clocks = ClockStream(3)
    none = np.zeros(5, dtype=bool)
    some = np.zeros(5, dtype=bool)
    some[0] = True
    target = np.zeros(5, dtype=bool)
    target[3] = True
    assert not ring_path_exists(g, clocks, none, target, 10.0)
    assert not ring_path_exists(g, clocks, some, target, 0.0)


def test_ring_path_against_brute_force():
    g = TorusGeometry.cube(1, 6, wrap=True)
    adjacency = {v: [int(u) for u in g.neighbor_table[v] if u < 6] for v in range(6)}
    rng = np.random.default_rng(4)
    for trial in range(60):
        clocks = ClockStream(int(rng.integers(1 << 30)))
        t_end = float(rng.uniform(0.3, 2.5))
        source = np.zeros(6, dtype=bool)
        target = np.zeros(6, dtype=bool)
        source[int(rng.integers(6))] = True
        target[int(rng.integers(6))] = True
        if np.any(source & target):
            continue
        ring_times = {
            v: [float(t) for t in clocks.rings_in(v, 0.0, t_end)] for v in range(6)
        }
        expected = oracles.brute_ring_paths(
            ring_times,
            adjacency,
            set(np.flatnonzero(source).tolist()),
            set(np.flatnonzero(target).tolist()),
        )
        got = ring_path_exists(g, clocks, source, target, t_end)
        assert got == expected, f"trial {trial}"


def test_default_time_window():
    assert default_time_window(2) == 200 * 2**5 + 2
    assert default_time_window(4) == 200 * 4**5 + 4


def test_classify_block_consistency():
    lay = BlockLayout(2, 9, 15)
    rng = np.random.default_rng(9)
    for trial in range(10):
        spins = sample_spins(lay.outer_box, 0.85, int(rng.integers(1 << 30))).spins
        clocks = ClockStream(int(rng.integers(1 << 30)))
        rep = classify_block(lay, spins, clocks, Fraction(7, 20), T=5.0)
        assert rep.good == ((not rep.breach) and rep.core_plus_at_end)
        assert rep.T == 5.0
        assert not rep.degenerate


def test_degenerate_block_cannot_be_good():
    lay = BlockLayout(2, 9, 9)
    spins = np.ones(lay.outer_box.n_vertices, dtype=np.int8)
    rep = classify_block(lay, spins, ClockStream(3), Fraction(1, 4), T=2.0)
    assert rep.degenerate


def test_classify_block_rejects_window_before_checkpoint():
    lay = BlockLayout(2, 9, 15)
    spins = np.ones(lay.outer_box.n_vertices, dtype=np.int8)
    with pytest.raises(ValueError):
        classify_block(lay, spins, ClockStream(3), Fraction(1, 4), T=1.0)


def test_locality_trials_at_stated_radii():
    g = TorusGeometry.cube(2, 24, wrap=True)
    for t in range(5):
        b, a = growth_locality_trial(g, 0.8, Fraction(3, 10), t, 100 + t, 900 + t, radius=8)
        assert b == a
        b, a = proxy_locality_trial(g, 0.8, Fraction(3, 10), t, 100 + t, 900 + t, radius=9)
        assert b == a


def test_locality_trial_fails_with_tiny_radius():
    g = TorusGeometry.cube(2, 24, wrap=True)
    flips = 0
    for t in range(60):
        b, a = growth_locality_trial(g, 0.8, Fraction(3, 10), t, 500 + t, 300 + t, radius=0)
        flips += b != a
    assert flips > 0


def test_goodness_locality_trial():
    lay = BlockLayout(2, 9, 15)
    for t in range(3):
        b, a = goodness_locality_trial(lay, 0.85, Fraction(7, 20), 5.0, 40 + t, 70 + t)
        assert b == a
