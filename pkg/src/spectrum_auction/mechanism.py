"""VCG winner determination and Clarke pivot payments for homogeneous sub-channels.

Winner determination is an exact 0/1 knapsack over the channel budget. All
welfare arithmetic is carried out on :class:`fractions.Fraction` copies of the
(binary-exact) float bids, so pivots of zero are exactly zero and the
individual-rationality bounds hold without tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple


class MechanismError(RuntimeError):
    """Raised when a supplied allocation is inconsistent with the bids."""


@dataclass(frozen=True)
class SealedBid:
    ue_id: int
    demand: int
    bid_per_channel: float

    def __post_init__(self):
        if int(self.demand) != self.demand or self.demand < 1:
            raise ValueError(f"demand must be an integer >= 1, got {self.demand!r}")
        if not math.isfinite(self.bid_per_channel) or self.bid_per_channel < 0:
            raise ValueError(f"bid_per_channel must be finite and >= 0, got {self.bid_per_channel!r}")


@dataclass(frozen=True)
class AuctionOutcome:
    winners: FrozenSet[int]
    payment_per_channel: Dict[int, float]
    total_pivot_payment: Dict[int, float]
    total_payment: Dict[int, float]
    welfare: float
    clearing_price: float
    bs_utility: float
    demands: Dict[int, int] = field(default_factory=dict)


def _check_bids(bids: Sequence[SealedBid]):
    ids = [b.ue_id for b in bids]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate ue_id in bids: {sorted(ids)}")


def _solve_exact(bids: Sequence[SealedBid], capacity: int, reserve: float) -> Tuple[Tuple[int, ...], Fraction]:
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity!r}")
    r = Fraction(reserve)
    eligible = sorted(
        (b for b in bids if b.bid_per_channel >= reserve and b.demand <= capacity),
        key=lambda b: b.ue_id,
    )
    n = len(eligible)
    # Objective is lexicographic and additive: (welfare, channels used, id preference).
    # The id term gives lower ue_ids higher binary weight, which encodes
    # "prefer including the smallest id" among otherwise tied sets.
    zero = (Fraction(0), 0, 0)
    best = [(zero, ())] * (capacity + 1)
    for rank, b in enumerate(eligible):
        item = (b.demand * (Fraction(b.bid_per_channel) - r), b.demand, 1 << (n - 1 - rank))
        nxt = list(best)
        for c in range(b.demand, capacity + 1):
            prev_obj, prev_set = best[c - b.demand]
            cand = (prev_obj[0] + item[0], prev_obj[1] + item[1], prev_obj[2] + item[2])
            if cand > nxt[c][0]:
                nxt[c] = (cand, prev_set + (b.ue_id,))
        best = nxt
    obj, winners = best[capacity]
    return winners, obj[0]


def solve_welfare(bids: Sequence[SealedBid], capacity: int, reserve: float) -> Tuple[FrozenSet[int], float]:
    """Welfare-maximizing winner set subject to the channel budget.

    Bids below ``reserve`` are dropped before solving. Among allocations with
    equal welfare the one using more channels wins, then the one containing the
    smallest differing ue_id.

    Returns ``(winners, welfare)`` with welfare = sum of N_i (kappa_i - reserve).
    """
    _check_bids(bids)
    winners, welfare = _solve_exact(bids, capacity, reserve)
    return frozenset(winners), float(welfare)


def _pivots_exact(bids, capacity, reserve, winner_set) -> Dict[int, Fraction]:
    by_id = {b.ue_id: b for b in bids}
    missing = set(winner_set) - by_id.keys()
    if missing:
        raise MechanismError(f"winners {sorted(missing)} did not bid")
    r = Fraction(reserve)
    values = {i: by_id[i].demand * (Fraction(by_id[i].bid_per_channel) - r) for i in winner_set}
    if sum(by_id[i].demand for i in winner_set) > capacity:
        raise MechanismError("winner set exceeds capacity")
    if any(v < 0 for v in values.values()):
        raise MechanismError("winner set contains a bid below the reserve")
    total = sum(values.values(), Fraction(0))
    _, optimum = _solve_exact(bids, capacity, reserve)
    if total != optimum:
        raise MechanismError(f"winner set welfare {float(total)} is not optimal ({float(optimum)})")
    pivots = {}
    for i in sorted(winner_set):
        others = [b for b in bids if b.ue_id != i]
        _, without_i = _solve_exact(others, capacity, reserve)
        p = without_i - (total - values[i])
        if p < 0 or p > values[i]:
            raise MechanismError(f"pivot for ue {i} out of range: {float(p)}")
        pivots[i] = p
    return pivots


def vcg_payments(
    bids: Sequence[SealedBid], capacity: int, reserve: float, winner_set: Iterable[int]
) -> Dict[int, Tuple[float, float]]:
    """Clarke pivot payments for every bidder.

    Returns ``{ue_id: (pivot, per_channel_price)}``. Winners pay the reserve
    plus their pivot spread over their channels; losers map to ``(0.0, 0.0)``.
    """
    _check_bids(bids)
    pivots = _pivots_exact(bids, capacity, reserve, frozenset(winner_set))
    r = Fraction(reserve)
    out = {}
    for b in sorted(bids, key=lambda b: b.ue_id):
        p = pivots.get(b.ue_id)
        if p is None:
            out[b.ue_id] = (0.0, 0.0)
        else:
            out[b.ue_id] = (float(p), float(r + p / b.demand))
    return out


def run_auction(
    bids: Sequence[SealedBid],
    capacity: int,
    reserve: float,
    previous_clearing_price: Optional[float] = None,
    clearing_rule: str = "min",
) -> AuctionOutcome:
    """Resolve one auction round.

    ``clearing_rule`` is ``"min"`` (lowest per-channel price among winners) or
    ``"mean"``. With no winners the clearing price carries over from
    ``previous_clearing_price``, which defaults to the reserve.
    """
    if clearing_rule not in ("min", "mean"):
        raise ValueError(f"unknown clearing_rule {clearing_rule!r}")
    _check_bids(bids)
    winners, _ = _solve_exact(bids, capacity, reserve)
    pivots = _pivots_exact(bids, capacity, reserve, frozenset(winners))
    by_id = {b.ue_id: b for b in bids}
    r = Fraction(reserve)

    per_channel, pivot_out, total_out = {}, {}, {}
    exact_prices = []
    for b in sorted(bids, key=lambda b: b.ue_id):
        if b.ue_id in pivots:
            p = pivots[b.ue_id]
            price = r + p / b.demand
            exact_prices.append(price)
            per_channel[b.ue_id] = float(price)
            pivot_out[b.ue_id] = float(p)
            total_out[b.ue_id] = float(b.demand * r + p)
        else:
            per_channel[b.ue_id] = 0.0
            pivot_out[b.ue_id] = 0.0
            total_out[b.ue_id] = 0.0

    if exact_prices:
        if clearing_rule == "min":
            clearing = float(min(exact_prices))
        else:
            clearing = float(sum(exact_prices, Fraction(0)) / len(exact_prices))
    else:
        clearing = reserve if previous_clearing_price is None else previous_clearing_price

    welfare = sum((by_id[i].demand * (Fraction(by_id[i].bid_per_channel) - r) for i in winners), Fraction(0))
    return AuctionOutcome(
        winners=frozenset(winners),
        payment_per_channel=per_channel,
        total_pivot_payment=pivot_out,
        total_payment=total_out,
        welfare=float(welfare),
        clearing_price=clearing,
        bs_utility=float(sum(pivots.values(), Fraction(0))),
        demands={b.ue_id: b.demand for b in bids},
    )
