"""Repeated budget-constrained VCG spectrum auctions over a UE population."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from .core_model import (
    DEFAULT_RATE_SCALE,
    BudgetMode,
    ChannelDraw,
    InfeasibleDemandError,
    RadioConfig,
    Strategy,
    UEProfile,
    channel_draw,
    demand_ratio,
    reserve_price,
    shannon_rate,
)
from .llm_advisor import (
    DEFAULT_HISTORY_WINDOW,
    EchoValuation,
    FixedFraction,
    PromptContext,
    Replay,
    ScriptedAdvisor,
    advise_with_fallback,
    bound_bid,
)
from .mechanism import AuctionOutcome, SealedBid, run_auction
from .strategies import (
    BidderState,
    StrategyParams,
    budget_cap,
    shaded_bid,
    truthful_bid,
    update_after_round,
)

log = logging.getLogger(__name__)

#: UE ids follow a 1-based numbering; these are the two reference agents.
TRUTHFUL_REFERENCE_UE = 10
LLM_REFERENCE_UE = 13


def default_assignment() -> Dict[int, Strategy]:
    return {TRUTHFUL_REFERENCE_UE: Strategy.TRUTHFUL, LLM_REFERENCE_UE: Strategy.LLM}


@dataclass(frozen=True)
class ScenarioConfig:
    episode_count: int = 20
    ue_count: int = 16
    subchannel_count: int = 6
    bandwidth_hz: float = 180_000.0
    transmit_power_w: float = 0.2
    power_unit_price: float = 6.0
    sinr_db_range: Tuple[float, float] = (5.0, 20.0)
    alpha_range: Tuple[float, float] = (0.8, 1.2)
    # Draws whose valuation falls outside this band are rejected and redrawn.
    # None disables the filter.
    valuation_range: Optional[Tuple[float, float]] = (1.0, 3.5)
    rate_scale: float = DEFAULT_RATE_SCALE
    # Required rates, as multiples of the per-channel rate at the bottom of the
    # SINR range. Class c therefore needs at most ceil(c) sub-channels.
    service_classes: Tuple[float, ...] = (1.0,)
    redraw_sinr_each_episode: bool = False
    budget_mode: BudgetMode = BudgetMode.REFILL
    refill_epsilon: Optional[float] = None  # None -> 10% of the reserve price
    static_budget: float = 15.0
    default_strategy: Strategy = Strategy.SHADED
    strategy_assignment: Mapping[int, Strategy] = field(default_factory=default_assignment)
    f_max: int = 5
    block_duration: int = 3
    clearing_rule: str = "min"
    rng_seed: int = 0
    llm_policy: str = "echo"  # echo | fraction | replay
    llm_fraction: float = 0.85
    llm_replay: Tuple[float, ...] = ()
    history_window: int = DEFAULT_HISTORY_WINDOW
    clamp_llm_bids: bool = True
    llm_model: str = "gpt-5-mini"
    llm_timeout: float = 60.0
    llm_max_retries: int = 2
    llm_temperature: float = 0.0
    eta_grid: Tuple[float, ...] = (0.375, 0.75, 1.5)

    def __post_init__(self):
        if self.episode_count < 0:
            raise ValueError("episode_count must be >= 0")
        if any(not eta > 0 for eta in self.eta_grid):
            raise ValueError("eta_grid values must be > 0")
        for name in ("ue_count", "subchannel_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("sinr_db_range", "alpha_range", "valuation_range"):
            lo_hi = getattr(self, name)
            if lo_hi is not None and not (len(lo_hi) == 2 and lo_hi[0] <= lo_hi[1]):
                raise ValueError(f"{name} must be an ordered pair, got {lo_hi!r}")
        if self.alpha_range[0] <= 0:
            raise ValueError("alpha_range must be positive")
        if not self.service_classes or any(c <= 0 for c in self.service_classes):
            raise ValueError("service_classes must be non-empty and positive")
        if self.static_budget < 0:
            raise ValueError("static_budget must be >= 0")
        if self.refill_epsilon is not None and not 0 <= self.refill_epsilon <= self.reserve_price:
            raise ValueError("refill_epsilon must lie in [0, reserve price]")
        if self.clearing_rule not in ("min", "mean"):
            raise ValueError(f"clearing_rule must be 'min' or 'mean', got {self.clearing_rule!r}")
        if self.llm_policy not in ("echo", "fraction", "replay"):
            raise ValueError(f"llm_policy must be echo, fraction or replay, got {self.llm_policy!r}")
        bad = [i for i in self.strategy_assignment if not 1 <= i <= self.ue_count]
        if bad:
            raise ValueError(f"strategy_assignment names unknown UEs {bad}")
        StrategyParams(self.f_max, self.block_duration)
        self.radio  # validates the radio fields

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(self.bandwidth_hz, self.subchannel_count, self.transmit_power_w, self.power_unit_price)

    @property
    def reserve_price(self) -> float:
        return reserve_price(self.power_unit_price, self.transmit_power_w)

    @property
    def epsilon(self) -> float:
        return 0.1 * self.reserve_price if self.refill_epsilon is None else self.refill_epsilon

    @property
    def params(self) -> StrategyParams:
        return StrategyParams(self.f_max, self.block_duration)

    def strategy_of(self, ue_id: int) -> Strategy:
        return Strategy(self.strategy_assignment.get(ue_id, self.default_strategy))

    def script_policy(self):
        if self.llm_policy == "echo":
            return EchoValuation()
        if self.llm_policy == "fraction":
            return FixedFraction(self.llm_fraction)
        return Replay(self.llm_replay)


@dataclass
class MarketState:
    """Mutable loop state. Owned by the episode loop only."""
    profiles: Tuple[UEProfile, ...]
    draws: Dict[int, Optional[ChannelDraw]]
    states: Dict[int, BidderState]
    rngs: Dict[str, np.random.Generator]
    clearing_price: float
    clearing_history: List[float] = field(default_factory=list)
    refill_total: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class LLMTrace:
    suggested: float
    submitted: Optional[float]
    fallback: bool
    explanation: str


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    submitted_bids: Tuple[SealedBid, ...]
    outcome: AuctionOutcome
    per_ue_utility_delta: Dict[int, float]
    bs_utility_delta: float
    abstained: FrozenSet[int]
    blocked: FrozenSet[int]
    refills: Dict[int, float]
    budgets_after: Dict[int, float]
    valuations: Dict[int, float]
    llm: Dict[int, LLMTrace] = field(default_factory=dict)


@dataclass
class UEMetrics:
    ue_id: int
    strategy: Strategy
    valuation: float
    demand: int
    wins: int = 0
    win_frequency: float = 0.0
    accumulated_utility: float = 0.0
    total_payment: float = 0.0
    last_win_episode: Optional[int] = None
    initial_budget: float = 0.0
    refills: float = 0.0
    final_budget: float = 0.0


@dataclass
class MetricsTable:
    ues: Dict[int, UEMetrics]
    bs_accumulated_utility: float
    eta: float
    clearing_price_series: List[float]
    bs_utility_series: List[float]
    episode_count: int

    def last_win_by_strategy(self) -> Dict[Strategy, Optional[float]]:
        """Mean last-winning episode per strategy group, over UEs that ever won."""
        groups: Dict[Strategy, List[int]] = {}
        for m in self.ues.values():
            groups.setdefault(m.strategy, [])
            if m.last_win_episode is not None:
                groups[m.strategy].append(m.last_win_episode)
        return {s: (sum(v) / len(v) if v else None) for s, v in groups.items()}

    def mean_last_win(self) -> Optional[float]:
        wins = [m.last_win_episode for m in self.ues.values() if m.last_win_episode is not None]
        return sum(wins) / len(wins) if wins else None


@dataclass
class SimulationResult:
    config: ScenarioConfig
    metrics: MetricsTable
    episodes: List[EpisodeRecord]
    profiles: Tuple[UEProfile, ...]
    draws: Dict[int, Optional[ChannelDraw]]


def _uniform(rng: np.random.Generator, lo_hi) -> float:
    lo, hi = lo_hi
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def _draw_channel(alpha_fixed: Optional[float], required_rate: float, config: ScenarioConfig,
                  rng: np.random.Generator, max_tries: int = 10_000) -> Tuple[float, ChannelDraw]:
    for _ in range(max_tries):
        alpha = _uniform(rng, config.alpha_range) if alpha_fixed is None else alpha_fixed
        sinr = _uniform(rng, config.sinr_db_range)
        draw = channel_draw(alpha, sinr, required_rate, config.bandwidth_hz, config.rate_scale)
        vr = config.valuation_range
        if vr is None or vr[0] <= draw.valuation_per_channel <= vr[1]:
            return alpha, draw
    raise ValueError(f"no draw landed inside valuation_range {config.valuation_range} in {max_tries} tries")


def init_population(config: ScenarioConfig, rng: Optional[np.random.Generator] = None):
    """Draw every UE's profile and channel. Returns ``(profiles, draws, states)``."""
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    base_rate = shannon_rate(config.bandwidth_hz, config.sinr_db_range[0])
    initial = config.static_budget if config.budget_mode == BudgetMode.STATIC else 0.0
    profiles, draws, states = [], {}, {}
    for ue_id in range(1, config.ue_count + 1):
        cls = config.service_classes[int(rng.integers(len(config.service_classes)))]
        required = cls * base_rate
        try:
            alpha, draw = _draw_channel(None, required, config, rng)
        except InfeasibleDemandError:
            log.warning("ue %d cannot meet its QoS class and will sit out every episode", ue_id)
            alpha, draw = _uniform(rng, config.alpha_range), None
        profiles.append(UEProfile(ue_id, alpha, required, initial, config.strategy_of(ue_id)))
        draws[ue_id] = draw
        states[ue_id] = BidderState(ue_id, initial)
    return tuple(profiles), draws, states


def refill_budgets(states: Dict[int, BidderState], mode: BudgetMode, reserve: float,
                   rng: np.random.Generator, epsilon: float) -> Tuple[Dict[int, BidderState], Dict[int, float]]:
    """Reset budgets for a new episode. Returns new states and the signed top-up per UE.

    Refill mode sets each budget to a fresh U[r - eps, r + eps] draw (unspent
    credit is dropped). Static mode leaves budgets alone.
    """
    if mode == BudgetMode.STATIC:
        return dict(states), {i: 0.0 for i in states}
    out, delta = {}, {}
    for ue_id in sorted(states):
        s = states[ue_id]
        new_budget = max(0.0, _uniform(rng, (reserve - epsilon, reserve + epsilon)))
        delta[ue_id] = new_budget - s.remaining_budget
        out[ue_id] = replace(s, remaining_budget=new_budget)
    return out, delta


def new_market(config: ScenarioConfig) -> MarketState:
    children = np.random.SeedSequence(config.rng_seed).spawn(3)
    rngs = {name: np.random.default_rng(seq) for name, seq in zip(("population", "budget", "channel"), children)}
    profiles, draws, states = init_population(config, rngs["population"])
    return MarketState(profiles, draws, states, rngs, config.reserve_price,
                       refill_total={p.id: 0.0 for p in profiles})


def make_advisors(config: ScenarioConfig, profiles) -> Dict[int, ScriptedAdvisor]:
    return {p.id: ScriptedAdvisor(config.script_policy()) for p in profiles if p.strategy == Strategy.LLM}


def _outcome_label(entry) -> str:
    if entry.own_bid is None:
        return "no bid"
    if entry.won:
        return f"won, paid {entry.payment:.4f} in total"
    return "lost"


def _prompt_context(state: BidderState, draw: ChannelDraw, market: MarketState,
                    config: ScenarioConfig, episode: int) -> PromptContext:
    return PromptContext(
        valuation_per_channel=draw.valuation_per_channel,
        remaining_budget=state.remaining_budget,
        demand=draw.demand_subchannels,
        clearing_price_history=tuple(h.clearing_price for h in state.history),
        own_bid_history=tuple((h.own_bid, _outcome_label(h)) for h in state.history),
        episodes_total=config.episode_count,
        episodes_remaining=config.episode_count - episode + 1,
        budget_mode=config.budget_mode,
    )


def _redraw_channels(market: MarketState, config: ScenarioConfig):
    for p in market.profiles:
        if market.draws.get(p.id) is None:
            continue
        try:
            _, market.draws[p.id] = _draw_channel(p.alpha, p.required_rate_bps, config, market.rngs["channel"])
        except InfeasibleDemandError:
            market.draws[p.id] = None


def run_episode(market: MarketState, config: ScenarioConfig, advisors: Mapping[int, object],
                episode: int) -> EpisodeRecord:
    """Play one auction round and advance ``market`` in place."""
    r = config.reserve_price
    params = config.params
    if config.redraw_sinr_each_episode and episode > 1:
        _redraw_channels(market, config)
    market.states, refills = refill_budgets(market.states, config.budget_mode, r,
                                            market.rngs["budget"], config.epsilon)
    for ue_id, d in refills.items():
        market.refill_total[ue_id] += d

    blocked, abstained = set(), set()
    planned: Dict[int, float] = {}
    llm_ids = []
    for p in market.profiles:
        state, draw = market.states[p.id], market.draws[p.id]
        if state.is_blocked(episode):
            blocked.add(p.id)
            continue
        if draw is None:
            abstained.add(p.id)
            continue
        v = draw.valuation_per_channel
        if p.strategy == Strategy.TRUTHFUL:
            planned[p.id] = truthful_bid(v)
        elif p.strategy == Strategy.SHADED:
            planned[p.id] = shaded_bid(v, market.clearing_price, state.consecutive_failures, params.f_max)
        else:
            llm_ids.append(p.id)

    llm_traces: Dict[int, LLMTrace] = {}
    if llm_ids:
        jobs = []
        for ue_id in llm_ids:
            state, draw = market.states[ue_id], market.draws[ue_id]
            fallback = shaded_bid(draw.valuation_per_channel, market.clearing_price,
                                  state.consecutive_failures, params.f_max)
            jobs.append((advisors[ue_id], _prompt_context(state, draw, market, config, episode), fallback))
        if len(jobs) > 1 and any(getattr(a, "concurrent_io", False) for a, _, _ in jobs):
            with ThreadPoolExecutor(max_workers=min(8, len(jobs))) as pool:
                replies = list(pool.map(lambda j: advise_with_fallback(*j), jobs))
        else:
            replies = [advise_with_fallback(*j) for j in jobs]
        # replies are applied in ascending ue_id order regardless of arrival order
        for ue_id, reply in zip(llm_ids, replies):
            draw, state = market.draws[ue_id], market.states[ue_id]
            planned[ue_id] = bound_bid(reply.bid_value, draw.valuation_per_channel, draw.demand_subchannels,
                                       state.remaining_budget, config.clamp_llm_bids)
            llm_traces[ue_id] = LLMTrace(reply.bid_value, None, reply.fallback, reply.explanation)

    bids = []
    for ue_id in sorted(planned):
        draw, state = market.draws[ue_id], market.states[ue_id]
        bid = budget_cap(planned[ue_id], draw.demand_subchannels, state.remaining_budget)
        if bid < r:
            abstained.add(ue_id)
            continue
        bids.append(SealedBid(ue_id, draw.demand_subchannels, bid))
    for ue_id, t in llm_traces.items():
        submitted = next((b.bid_per_channel for b in bids if b.ue_id == ue_id), None)
        llm_traces[ue_id] = replace(t, submitted=submitted)

    outcome = run_auction(bids, config.subchannel_count, r, market.clearing_price, config.clearing_rule)
    submitted = {b.ue_id: b for b in bids}
    utility = {}
    for p in market.profiles:
        state = market.states[p.id]
        won = p.id in outcome.winners
        bid = submitted.get(p.id)
        pay = outcome.total_payment.get(p.id, 0.0) if won else 0.0
        if won:
            draw = market.draws[p.id]
            utility[p.id] = draw.demand_subchannels * (draw.valuation_per_channel - outcome.payment_per_channel[p.id])
        else:
            utility[p.id] = 0.0
        market.states[p.id] = update_after_round(
            state, won, pay, episode, params,
            own_bid=None if bid is None else bid.bid_per_channel,
            clearing_price=outcome.clearing_price,
            participated=bid is not None,
        )
    market.clearing_price = outcome.clearing_price
    market.clearing_history.append(outcome.clearing_price)
    return EpisodeRecord(
        episode=episode,
        submitted_bids=tuple(bids),
        outcome=outcome,
        per_ue_utility_delta=utility,
        bs_utility_delta=outcome.bs_utility,
        abstained=frozenset(abstained),
        blocked=frozenset(blocked),
        refills=refills,
        budgets_after={i: s.remaining_budget for i, s in market.states.items()},
        valuations={i: d.valuation_per_channel for i, d in market.draws.items() if d is not None},
        llm=llm_traces,
    )


def run_simulation(config: ScenarioConfig, advisors: Optional[Mapping[int, object]] = None) -> SimulationResult:
    """Run ``config.episode_count`` rounds. LLM UEs without an advisor get the
    scripted policy named in the config."""
    market = new_market(config)
    advisors = {**make_advisors(config, market.profiles), **(advisors or {})}
    initial = {i: s.remaining_budget for i, s in market.states.items()}
    episodes = [run_episode(market, config, advisors, t) for t in range(1, config.episode_count + 1)]

    ues = {}
    for p in market.profiles:
        draw = market.draws[p.id]
        ues[p.id] = UEMetrics(
            ue_id=p.id, strategy=p.strategy,
            valuation=draw.valuation_per_channel if draw else 0.0,
            demand=draw.demand_subchannels if draw else 0,
            initial_budget=initial[p.id],
            refills=market.refill_total[p.id],
            final_budget=market.states[p.id].remaining_budget,
        )
    bs_total = 0.0
    for rec in episodes:
        bs_total += rec.bs_utility_delta
        for ue_id, m in ues.items():
            m.accumulated_utility += rec.per_ue_utility_delta[ue_id]
            if ue_id in rec.outcome.winners:
                m.wins += 1
                m.total_payment += rec.outcome.total_payment[ue_id]
                m.last_win_episode = rec.episode
    for m in ues.values():
        m.win_frequency = m.wins / config.episode_count if config.episode_count else 0.0

    demands = [d.demand_subchannels for d in market.draws.values() if d is not None]
    eta = demand_ratio(config.subchannel_count, demands) if demands else math.inf
    metrics = MetricsTable(
        ues=ues,
        bs_accumulated_utility=bs_total,
        eta=eta,
        clearing_price_series=[rec.outcome.clearing_price for rec in episodes],
        bs_utility_series=[rec.bs_utility_delta for rec in episodes],
        episode_count=config.episode_count,
    )
    return SimulationResult(config, metrics, episodes, market.profiles, dict(market.draws))
