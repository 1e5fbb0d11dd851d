"""Bidding rules and per-UE bookkeeping across repeated rounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Tuple


class BudgetViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class StrategyParams:
    f_max: int = 5
    block_duration_episodes: int = 3

    def __post_init__(self):
        if int(self.f_max) != self.f_max or self.f_max < 2:
            raise ValueError(f"f_max must be an integer >= 2, got {self.f_max!r}")
        if int(self.block_duration_episodes) != self.block_duration_episodes or self.block_duration_episodes < 0:
            raise ValueError("block_duration_episodes must be a nonnegative integer")


@dataclass(frozen=True)
class HistoryEntry:
    episode: int
    own_bid: Optional[float]
    won: bool
    payment: float
    clearing_price: float


@dataclass(frozen=True)
class BidderState:
    ue_id: int
    remaining_budget: float
    consecutive_failures: int = 0
    blocked_until_episode: Optional[int] = None
    history: Tuple[HistoryEntry, ...] = field(default_factory=tuple)

    def is_blocked(self, episode: int) -> bool:
        return self.blocked_until_episode is not None and episode <= self.blocked_until_episode


def truthful_bid(valuation: float) -> float:
    if valuation < 0:
        raise ValueError("valuation must be nonnegative")
    return valuation


def shading_weight(failures: int, f_max: int) -> float:
    """Weight on the true valuation: log(f + 1) / log(f_max), clamped to [0, 1]."""
    if f_max < 2:
        raise ValueError(f"f_max must be >= 2, got {f_max!r}")
    if failures < 0:
        raise ValueError("failures must be nonnegative")
    beta = math.log(failures + 1) / math.log(f_max)
    return min(1.0, max(0.0, beta))


def shaded_bid(valuation: float, clearing_price: float, failures: int, f_max: int) -> float:
    """Interpolate from the last clearing price toward the valuation as failures pile up.

    The result never exceeds the valuation.
    """
    beta = shading_weight(failures, f_max)
    if beta == 1.0:
        return valuation
    if beta == 0.0:
        return min(valuation, clearing_price)
    raw = beta * valuation + (1.0 - beta) * clearing_price
    # keep rounding from leaving the interpolation interval
    raw = min(max(raw, min(valuation, clearing_price)), max(valuation, clearing_price))
    return min(valuation, raw)


def budget_cap(bid_per_channel: float, demand: int, remaining_budget: float) -> float:
    """Largest per-channel bid <= ``bid_per_channel`` whose N-fold total fits the budget.

    Exactness matters here: VCG charges at most the bid, so ``demand * result``
    must not exceed the budget even by one ulp.
    """
    if demand < 1:
        raise ValueError("demand must be >= 1")
    if remaining_budget <= 0:
        return 0.0
    cap = remaining_budget / demand
    while Fraction(cap) * demand > Fraction(remaining_budget):
        cap = math.nextafter(cap, 0.0)
    return min(bid_per_channel, cap)


def update_after_round(
    state: BidderState,
    won: bool,
    payment_total: float,
    episode: int,
    params: StrategyParams,
    own_bid: Optional[float] = None,
    clearing_price: float = 0.0,
    participated: bool = True,
) -> BidderState:
    """Advance one UE's state after an auction round.

    A UE that did not submit a bid (``participated=False``) keeps its failure
    count; only lost submissions count as failures.
    """
    if state.history and episode <= state.history[-1].episode:
        raise ValueError(f"episode {episode} does not follow {state.history[-1].episode}")
    budget = state.remaining_budget
    failures = state.consecutive_failures
    blocked = state.blocked_until_episode
    if won:
        if payment_total > budget:
            raise BudgetViolation(
                f"ue {state.ue_id}: payment {payment_total!r} exceeds budget {budget!r}"
            )
        budget = budget - payment_total
        failures = 0
    elif participated:
        failures += 1
        if failures >= params.f_max:
            blocked = episode + params.block_duration_episodes
            failures = 0
    entry = HistoryEntry(episode, own_bid, won, payment_total if won else 0.0, clearing_price)
    return replace(
        state,
        remaining_budget=budget,
        consecutive_failures=failures,
        blocked_until_episode=blocked,
        history=state.history + (entry,),
    )
