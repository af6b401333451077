import math

import numpy as np
import pytest

from ldpgraph.graph import NeighborList
from ldpgraph.mech import (
    ConstantSource,
    ConstantStream,
    PrivacyBudget,
    RandomSource,
    laplace,
    laplace_from_uniforms,
    rr_bit,
    rr_flip_prob,
    rr_lower_row,
)


@pytest.mark.parametrize("eps", [0.1, 0.5, 1, 2, 5])
def test_rr_odds_ratio(eps):
    p = rr_flip_prob(eps)
    assert (1 - p) / p == pytest.approx(math.exp(eps), rel=1e-12)


def test_rr_flip_prob_limits():
    assert rr_flip_prob(0) == 0.5
    assert 0 < rr_flip_prob(700) < 1e-300
    with pytest.raises(ValueError):
        rr_flip_prob(-1)


def test_laplace_moments():
    src = RandomSource(3)
    u = src.uniforms(0, "lap", np.zeros(200_000, dtype=np.int64), np.arange(200_000))
    x = laplace_from_uniforms(u, 2.0)
    assert abs(x.mean()) < 0.05
    # Var Lap(b) = 2 b^2
    assert x.var() == pytest.approx(8.0, rel=0.03)
    assert np.median(np.abs(x)) == pytest.approx(2.0 * math.log(2), rel=0.03)


def test_laplace_scalar_matches_vectorized():
    s = RandomSource(9).stream(1, "lap", 4)
    scalar = [laplace(s, 1.5) for _ in range(50)]
    vec = laplace_from_uniforms(RandomSource(9).stream(1, "lap", 4).uniforms_at(np.arange(50)), 1.5)
    assert np.allclose(scalar, vec, rtol=0, atol=1e-12)


def test_laplace_edge_scales():
    s = RandomSource(0).stream(0, "x")
    assert laplace(s, 0.0) == 0.0
    with pytest.raises(ValueError):
        laplace(s, -1.0)
    assert laplace(ConstantStream(), 10.0) == 0.0


def test_rr_bit_rates():
    src = RandomSource(5)
    eps = 1.0
    flips = sum(rr_bit(src.stream(0, "rr", i), eps, 0) for i in range(40_000))
    p = rr_flip_prob(eps)
    assert abs(flips / 40_000 - p) < 5 * math.sqrt(p * (1 - p) / 40_000)
    with pytest.raises(ValueError):
        rr_bit(src.stream(0, "rr"), eps, 2)


def test_rr_lower_row_only_touches_lower_entries():
    a = NeighborList(4, 8, np.array([0, 2, 5, 7]))
    row = rr_lower_row(ConstantStream(), 1.0, a)
    assert row.tolist() == [1, 0, 1, 0]
    assert rr_lower_row(ConstantStream(), 1.0, NeighborList(0, 8, np.array([3]))).size == 0


def test_rr_entry_is_addressable():
    src = RandomSource(2)
    a = NeighborList(30, 40, np.array([1, 4, 29, 33]))
    row = rr_lower_row(src.stream(0, "rr", 30), 0.5, a)
    p = rr_flip_prob(0.5)
    s = src.stream(0, "rr", 30)
    for j in range(30):
        bit = int(j in (1, 4, 29))
        assert row[j] == bit ^ int(s.uniform_at(j) < p)


def test_streams_are_independent_of_evaluation_order():
    src = RandomSource(11)
    forward = [src.stream(0, "lap", i).uniform_at(0) for i in range(100)]
    src2 = RandomSource(11)
    backward = [src2.stream(0, "lap", i).uniform_at(0) for i in reversed(range(100))]
    assert forward == backward[::-1]


def test_vectorized_uniforms_match_scalar_path():
    src = RandomSource(7)
    users = np.array([0, 5, 5, 99, 12345])
    cols = np.array([3, 0, 1, 7, 2**40])
    vec = src.uniforms(2, "rr", users, cols)
    scalar = [src.stream(2, "rr", int(u)).uniform_at(int(c)) for u, c in zip(users, cols)]
    assert vec.tolist() == scalar


def test_streams_differ_by_key():
    src = RandomSource(1)
    base = src.stream(0, "lap", 0).uniforms_at(np.arange(8))
    for other in (src.stream(1, "lap", 0), src.stream(0, "rr", 0), src.stream(0, "lap", 1),
                  RandomSource(2).stream(0, "lap", 0)):
        assert not np.array_equal(base, other.uniforms_at(np.arange(8)))


def test_uniforms_in_open_interval():
    u = RandomSource(0).uniforms(0, "x", np.zeros(10_000, dtype=np.int64), np.arange(10_000))
    assert (u > 0).all() and (u < 1).all()
    assert abs(u.mean() - 0.5) < 0.02


def test_constant_source_is_silent():
    src = ConstantSource()
    assert laplace(src.stream(0, "lap", 3), 5.0) == 0.0
    assert (src.uniforms(0, "rr", [1, 2], [0, 1]) == 0.5).all()


def test_privacy_budget_accounting():
    b = PrivacyBudget(0.1, 0.45, 0.45)
    assert b.edge_ldp_total() == pytest.approx(1.0)
    assert b.entire_edge_ldp_total() == pytest.approx(1.1)
    total = b + PrivacyBudget(eps2=1.0)
    assert total.edge_ldp_total() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        PrivacyBudget(eps1=-0.1)
    with pytest.raises(ValueError):
        PrivacyBudget(eps1=float("nan"))


def test_seed_for_is_stable_and_nonnegative():
    src = RandomSource(4)
    assert src.seed_for(3, "graph") == RandomSource(4).seed_for(3, "graph")
    assert 0 <= src.seed_for(3, "graph") < 2**63
    assert src.seed_for(3, "graph") != src.seed_for(4, "graph")
