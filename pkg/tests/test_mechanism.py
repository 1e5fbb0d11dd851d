import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_pivot, brute_force_welfare
from spectrum_auction.mechanism import (
    MechanismError,
    SealedBid,
    run_auction,
    solve_welfare,
    vcg_payments,
)

R = 1.2
THREE = [SealedBid(1, 1, 3.0), SealedBid(2, 1, 2.0), SealedBid(3, 1, 2.5)]  # A, B, C


def test_empty():
    assert solve_welfare([], 6, R) == (frozenset(), 0.0)


def test_three_unit_bidders():
    winners, w = solve_welfare(THREE, 2, R)
    assert winners == {1, 3}
    assert w == pytest.approx(3.1, abs=1e-12)


def test_multi_channel_instance():
    bids = [SealedBid(1, 4, 2.0), SealedBid(2, 3, 2.2), SealedBid(3, 3, 2.1)]
    winners, w = solve_welfare(bids, 6, R)
    assert winners == {2, 3}
    assert w == pytest.approx(5.7, abs=1e-12)


def test_payments_three_bidders():
    pay = vcg_payments(THREE, 2, R, {1, 3})
    assert pay[1] == pytest.approx((0.8, 2.0), abs=1e-12)
    assert pay[3] == pytest.approx((0.8, 2.0), abs=1e-12)
    assert pay[2] == (0.0, 0.0)


def test_single_bidder_pays_reserve():
    pay = vcg_payments([SealedBid(1, 1, 2.0)], 6, R, {1})
    assert pay[1] == (0.0, 1.2)


def test_abundant_everyone_pays_reserve():
    bids = [SealedBid(i, 1 + i % 3, 1.3 + 0.1 * i) for i in range(1, 8)]
    out = run_auction(bids, sum(b.demand for b in bids), R)
    assert out.winners == {b.ue_id for b in bids}
    assert all(p == R for p in out.payment_per_channel.values())
    assert out.clearing_price == R and out.bs_utility == 0.0


def test_run_auction_examples():
    out = run_auction(THREE, 2, R)
    assert out.winners == {1, 3}
    assert out.clearing_price == pytest.approx(2.0, abs=1e-12)
    assert out.bs_utility == pytest.approx(1.6, abs=1e-12)

    single = run_auction([SealedBid(1, 1, 2.0)], 6, R)
    assert single.clearing_price == 1.2 and single.bs_utility == 0.0

    below = run_auction([SealedBid(1, 1, 1.0), SealedBid(2, 1, 1.19)], 6, R, previous_clearing_price=1.7)
    assert below.winners == frozenset() and below.bs_utility == 0.0
    assert below.clearing_price == 1.7
    assert run_auction([], 6, R).clearing_price == R


def test_mean_clearing_rule():
    out = run_auction([SealedBid(1, 1, 3.0), SealedBid(2, 1, 2.0), SealedBid(3, 1, 1.5)], 2, R, clearing_rule="mean")
    # both winners pay 1.5 (the displaced bid)
    assert out.clearing_price == pytest.approx(1.5)


def test_bid_at_reserve_is_admitted():
    out = run_auction([SealedBid(1, 1, R), SealedBid(2, 1, 2.0)], 6, R)
    assert out.winners == {1, 2}
    assert out.payment_per_channel[1] == R


def test_tie_breaking_prefers_more_channels_then_lower_ids():
    # all zero-surplus bids: nothing changes welfare, so channel use decides
    bids = [SealedBid(i, 1, R) for i in range(1, 10)]
    winners, _ = solve_welfare(bids, 6, R)
    assert winners == {1, 2, 3, 4, 5, 6}
    # equal welfare, equal channels: ue 1 beats ue 2
    winners, _ = solve_welfare([SealedBid(2, 1, 2.0), SealedBid(1, 1, 2.0)], 1, R)
    assert winners == {1}


def test_inconsistent_winner_set_rejected():
    with pytest.raises(MechanismError):
        vcg_payments(THREE, 2, R, {1, 2})
    with pytest.raises(MechanismError):
        vcg_payments(THREE, 2, R, {1, 2, 3})


def test_bid_validation():
    with pytest.raises(ValueError):
        SealedBid(1, 0, 2.0)
    with pytest.raises(ValueError):
        SealedBid(1, 1, -0.1)
    with pytest.raises(ValueError):
        SealedBid(1, 1, float("nan"))
    with pytest.raises(ValueError):
        solve_welfare([SealedBid(1, 1, 2.0), SealedBid(1, 1, 3.0)], 2, R)


def random_instance(rng, max_bidders=10, max_capacity=8, max_demand=3):
    n = rng.randint(0, max_bidders)
    bids = [SealedBid(i + 1, rng.randint(1, max_demand), round(rng.uniform(0.0, 4.0), rng.choice([1, 2, 6])))
            for i in range(n)]
    return bids, rng.randint(1, max_capacity)


def test_oracle_equivalence_sample():
    rng = random.Random(11)
    for _ in range(500):
        bids, cap = random_instance(rng)
        winners, w = solve_welfare(bids, cap, R)
        best, optimal_sets = brute_force_welfare([(b.ue_id, b.demand, b.bid_per_channel) for b in bids], cap, R)
        assert w == float(best)
        assert winners in optimal_sets


def test_payments_match_brute_force():
    rng = random.Random(5)
    for _ in range(300):
        bids, cap = random_instance(rng, max_bidders=7)
        out = run_auction(bids, cap, R)
        triples = [(b.ue_id, b.demand, b.bid_per_channel) for b in bids]
        for i in out.winners:
            p = brute_force_pivot(triples, cap, R, out.winners, i)
            assert out.total_pivot_payment[i] == float(p)


bid_lists = st.lists(
    st.tuples(st.integers(1, 3), st.floats(0.0, 5.0, allow_nan=False)), min_size=0, max_size=9
).map(lambda xs: [SealedBid(i + 1, d, b) for i, (d, b) in enumerate(xs)])


@settings(max_examples=300, deadline=None)
@given(bid_lists, st.integers(1, 8))
def test_individual_rationality(bids, cap):
    out = run_auction(bids, cap, R)
    assert sum(out.demands[i] for i in out.winners) <= cap
    for b in bids:
        if b.ue_id in out.winners:
            assert R <= out.payment_per_channel[b.ue_id] <= b.bid_per_channel
            assert out.total_pivot_payment[b.ue_id] >= 0
        else:
            assert out.payment_per_channel[b.ue_id] == 0.0
    assert out.bs_utility == pytest.approx(
        sum(out.demands[i] * (out.payment_per_channel[i] - R) for i in out.winners), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(bid_lists, st.integers(1, 8), st.integers(1, 3), st.floats(0.0, 5.0))
def test_adding_a_bid_never_lowers_welfare(bids, cap, d, b):
    _, before = solve_welfare(bids, cap, R)
    _, after = solve_welfare(bids + [SealedBid(99, d, b)], cap, R)
    assert after >= before


@settings(max_examples=100, deadline=None)
@given(bid_lists, st.integers(1, 8))
def test_deterministic_under_reordering(bids, cap):
    a = run_auction(bids, cap, R)
    b = run_auction(list(reversed(bids)), cap, R)
    assert a == b


def truthful_dominates(rng, grid_points=41):
    bids, cap = random_instance(rng, max_bidders=6, max_capacity=6)
    if not bids:
        return 0
    me = rng.choice(bids)
    v = me.bid_per_channel
    others = [b for b in bids if b.ue_id != me.ue_id]

    def utility(kappa):
        out = run_auction(others + [SealedBid(me.ue_id, me.demand, kappa)], cap, R)
        if me.ue_id not in out.winners:
            return 0.0
        return me.demand * (Fraction(v) - Fraction(out.payment_per_channel[me.ue_id]))

    honest = utility(v)
    violations = 0
    for k in range(grid_points):
        if utility(2 * v * k / (grid_points - 1)) > honest + Fraction(1, 10**9):
            violations += 1
    return violations


def test_truthfulness_sample():
    rng = random.Random(3)
    assert sum(truthful_dominates(rng) for _ in range(100)) == 0
