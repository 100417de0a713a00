from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

import oracles
from glauberlab.bounds import (
    binomial_tail,
    breach_union_bound,
    chernoff_check,
    erlang_consistency_check,
    erlang_tail,
    erlang_tail_complement,
    erlang_tail_gamma,
    path_bound_check,
    settlement_failure_reference,
    sparse_tail_check,
    union_bound_report,
    verify_default_grid,
)


def test_binomial_tail_against_exact_fractions():
    for n, p, m in [(10, Fraction(1, 3), 4), (25, Fraction(1, 10), 3), (8, Fraction(7, 8), 8)]:
        mine = binomial_tail(n, p, m)
        ref = oracles.binomial_tail_fraction(n, p, m)
        assert abs(float(mine) - float(ref)) <= 1e-13 * max(float(ref), 1e-30)


def test_binomial_tail_edges():
    assert binomial_tail(10, 0.3, 0) == 1
    assert binomial_tail(10, 0.3, 11) == 0
    assert binomial_tail(10, 0, 1) == 0
    assert binomial_tail(10, 1, 10) == 1


def test_chernoff_holds_and_reports():
    c = chernoff_check(50, 0.2)
    assert c.holds
    assert c.exact <= c.bound * (1 + 1e-9)
    # the bound value is exp(-2 eps^2 d)
    assert c.bound == pytest.approx(float(mp.e ** (-2 * mp.mpf("0.04") * 50)))


def test_sparse_tail_chain_and_domain():
    c = sparse_tail_check(10, 0.005, 3)
    assert c.in_domain and c.holds
    assert set(c.chain) >= {"exact", "sum_bound", "count_times_density"} or c.chain
    out = sparse_tail_check(10, 0.5, 2)
    assert not out.in_domain
    assert out.holds


def test_erlang_tail_small_cases():
    # P(Pois(T) >= 1) = 1 - e^-T
    for T in (0.3, 1.0, 4.0):
        assert float(erlang_tail(1, T)) == pytest.approx(1 - np.exp(-T), rel=1e-12)
    # hand case r=2: 1 - e^-T (1 + T)
    assert float(erlang_tail(2, 2.0)) == pytest.approx(1 - np.exp(-2) * 3, rel=1e-12)


def test_erlang_forms_agree():
    for r in (1, 3, 7, 20, 64):
        for T in (0.1, 1.0, 10.0):
            a = erlang_tail(r, T)
            b = erlang_tail_gamma(r, T)
            c = erlang_tail_complement(r, T)
            scale = max(float(a), 1e-300)
            assert abs(float(a - b)) <= 1e-12 * scale
            assert abs(float(a - c)) <= 1e-12 * scale
            assert erlang_consistency_check(r, T).holds
            if float(a) > 1e-10:
                # the double-precision oracle cancels to noise on deep tails
                assert float(a) == pytest.approx(oracles.poisson_tail_float(r, T), rel=1e-9)


def test_erlang_tail_monte_carlo():
    # 10^5 unit-exponential gap sums per point, 4 sigma band
    rng = np.random.default_rng(17)
    n = 100_000
    for r, T in [(2, 1.0), (4, 3.0), (8, 6.0)]:
        arrivals = rng.exponential(size=(n, r)).sum(axis=1)
        emp = (arrivals <= T).mean()
        exact = float(erlang_tail(r, T))
        sigma = np.sqrt(exact * (1 - exact) / n)
        assert abs(emp - exact) <= 4 * sigma


def test_path_bound_grid_point():
    c = path_bound_check(2, 2.0)
    assert c.holds
    assert c.exact == pytest.approx(float(erlang_tail(2, 2.0)))
    assert c.bound == pytest.approx(8.0)
    with pytest.raises(ValueError):
        path_bound_check(3, 1.0)
    with pytest.raises(ValueError):
        path_bound_check(0, 1.0)


def test_union_bound_caps_at_one():
    rep = union_bound_report([("a", 0.7), ("b", 0.8), ("c", 0.9)])
    assert rep.capped
    assert rep.total == 1.0
    assert rep.raw_total == pytest.approx(2.4)
    rep = union_bound_report([("a", 0.001), ("b", 0.002)])
    assert not rep.capped
    assert rep.total == pytest.approx(0.003)
    with pytest.raises(ValueError):
        union_bound_report([("bad", -0.1)])


def test_breach_union_bound_structure():
    b = breach_union_bound(2, 9, 5, 5.0)
    assert b.gap == 5 and b.d == 2 and b.n == 9
    assert 0 < b.total <= 1.0
    # at these parameters the raw sum dwarfs 1 and must be flagged
    assert b.capped
    tiny = breach_union_bound(2, 9, 5, 1e-4)
    assert not tiny.capped
    assert tiny.total < 1e-6


def test_breach_union_bound_first_term():
    # the r=gap term dominates when T is tiny
    b = breach_union_bound(2, 3, 4, 0.01)
    first = (2 * 3) ** 2 * 4**4 * float(erlang_tail(4, 0.01))
    assert first <= float(b.total) <= first * 1.02


def test_settlement_reference_is_probability():
    for d, eps in [(4, "3/10"), (6, 0.3), (50, "1/10")]:
        v = settlement_failure_reference(d, eps)
        assert 0.0 <= v <= 1.0


def test_default_grid_all_hold_small():
    rep = verify_default_grid(d_max=40)
    assert rep.all_hold
    fams = set(rep.by_family)
    assert fams == {"chernoff", "sparse_tail", "path_bound", "erlang_consistency"}
    for fam, counts in rep.by_family.items():
        assert counts["holds"] == counts["total"]
