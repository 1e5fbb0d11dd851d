import dataclasses
import math

import httpx
import numpy as np
import pytest

from spectrum_auction.core_model import BudgetMode, Strategy
from spectrum_auction.llm_advisor import ChatCompletionAdvisor, EndpointConfig, Replay, ScriptedAdvisor
from spectrum_auction.simulation import (
    ScenarioConfig,
    init_population,
    new_market,
    refill_budgets,
    run_episode,
    run_simulation,
)
from spectrum_auction.strategies import BidderState

STATIC = ScenarioConfig(budget_mode=BudgetMode.STATIC)


def test_population_is_seeded():
    a = init_population(ScenarioConfig(rng_seed=4))
    b = init_population(ScenarioConfig(rng_seed=4))
    assert a == b
    assert a != init_population(ScenarioConfig(rng_seed=5))


def test_default_valuations_inside_band():
    for seed in range(20):
        _, draws, _ = init_population(ScenarioConfig(rng_seed=seed))
        assert all(1.0 <= d.valuation_per_channel <= 3.5 for d in draws.values())
        assert all(d.demand_subchannels == 1 for d in draws.values())


def test_default_eta():
    assert run_simulation(dataclasses.replace(STATIC, episode_count=1)).metrics.eta == 0.375


def test_refill_interval():
    states = {i: BidderState(i, 3.0) for i in range(1, 200)}
    out, delta = refill_budgets(states, BudgetMode.REFILL, 1.2, np.random.default_rng(0), 0.12)
    assert all(1.08 <= s.remaining_budget <= 1.32 for s in out.values())
    assert all(delta[i] == out[i].remaining_budget - 3.0 for i in states)
    same, zero = refill_budgets(states, BudgetMode.STATIC, 1.2, np.random.default_rng(0), 0.12)
    assert same == states and set(zero.values()) == {0.0}


def test_default_epsilon_is_a_tenth_of_reserve():
    assert ScenarioConfig().epsilon == pytest.approx(0.12)


def test_static_budget_limits_wins_at_reserve():
    # abundance, so every win costs exactly the reserve: floor(15 / 1.2) = 12 wins
    cfg = dataclasses.replace(STATIC, ue_count=4, subchannel_count=4, default_strategy=Strategy.TRUTHFUL,
                              strategy_assignment={})
    m = run_simulation(cfg).metrics
    for u in m.ues.values():
        assert u.wins == 12 and u.last_win_episode == 12
        assert u.final_budget == pytest.approx(15 - 12 * 1.2)


def test_all_abstain():
    cfg = ScenarioConfig(valuation_range=(1.0, 1.1), default_strategy=Strategy.TRUTHFUL, strategy_assignment={},
                         budget_mode=BudgetMode.STATIC)
    market = new_market(cfg)
    rec = run_episode(market, cfg, {}, 1)
    assert rec.submitted_bids == () and rec.outcome.winners == frozenset()
    assert set(rec.per_ue_utility_delta.values()) == {0.0} and rec.bs_utility_delta == 0.0
    assert rec.abstained == frozenset(range(1, 17))


def test_single_truthful_ue():
    cfg = dataclasses.replace(STATIC, ue_count=1, strategy_assignment={}, default_strategy=Strategy.TRUTHFUL)
    res = run_simulation(dataclasses.replace(cfg, episode_count=1))
    rec = res.episodes[0]
    v = res.draws[1].valuation_per_channel
    assert rec.outcome.winners == {1}
    assert rec.per_ue_utility_delta[1] == pytest.approx(v - 1.2)


def test_abundance_everyone_wins_at_reserve():
    cfg = dataclasses.replace(STATIC, subchannel_count=24, static_budget=30.0, valuation_range=(1.5, 3.5),
                              llm_policy="fraction")
    res = run_simulation(cfg)
    assert all(u.win_frequency == 1.0 for u in res.metrics.ues.values())
    assert set(res.metrics.clearing_price_series) == {1.2}


def test_zero_episodes():
    m = run_simulation(ScenarioConfig(episode_count=0)).metrics
    assert m.bs_accumulated_utility == 0.0 and m.clearing_price_series == []
    assert all(u.wins == 0 and u.accumulated_utility == 0.0 and u.win_frequency == 0.0 for u in m.ues.values())


@pytest.mark.parametrize("mode", [BudgetMode.REFILL, BudgetMode.STATIC])
def test_conservation_and_ledger(mode):
    res = run_simulation(ScenarioConfig(budget_mode=mode, rng_seed=3, llm_policy="fraction"))
    total_pivots = math.fsum(p for rec in res.episodes for i, p in rec.outcome.total_pivot_payment.items()
                             if i in rec.outcome.winners)
    assert res.metrics.bs_accumulated_utility == pytest.approx(total_pivots, abs=1e-9)
    for u in res.metrics.ues.values():
        assert u.initial_budget + u.refills - u.total_payment == pytest.approx(u.final_budget, abs=1e-9)
        # utility + payments == N * v * wins
        assert u.accumulated_utility + u.total_payment == pytest.approx(u.demand * u.valuation * u.wins, abs=1e-9)
    for rec in res.episodes:
        assert all(b >= 0 for b in rec.budgets_after.values())
        losers = set(rec.per_ue_utility_delta) - rec.outcome.winners
        assert all(rec.per_ue_utility_delta[i] == 0.0 for i in losers)


def test_echo_matches_truthful():
    llm = run_simulation(ScenarioConfig(llm_policy="echo"))
    truthful = run_simulation(ScenarioConfig(strategy_assignment={10: Strategy.TRUTHFUL, 13: Strategy.TRUTHFUL}))
    a, b = llm.metrics.ues[13], truthful.metrics.ues[13]
    assert dataclasses.replace(a, strategy=Strategy.TRUTHFUL) == b


def test_multi_class_demands_and_redraw():
    cfg = ScenarioConfig(service_classes=(1.0, 2.0, 3.0), budget_mode=BudgetMode.STATIC, subchannel_count=10,
                         redraw_sinr_each_episode=True, rng_seed=2)
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert a.metrics == b.metrics
    demands = {rec.outcome.demands.get(i) for rec in a.episodes for i in rec.outcome.demands}
    assert len(demands) > 1
    for rec in a.episodes:
        assert sum(rec.outcome.demands[i] for i in rec.outcome.winners) <= 10


def test_blocked_ue_sits_out():
    res = run_simulation(ScenarioConfig(budget_mode=BudgetMode.STATIC, default_strategy=Strategy.TRUTHFUL,
                                        strategy_assignment={}))
    blocked = [rec for rec in res.episodes if rec.blocked]
    assert blocked
    for rec in blocked:
        assert not rec.blocked & {b.ue_id for b in rec.submitted_bids}


def test_live_advisors_with_fallback():
    calls = []

    def handler(request):
        calls.append(request)
        if len(calls) % 2:
            return httpx.Response(503)
        return httpx.Response(200, json={"choices": [{"message": {"content": "Bid value: 99\nExplanation: x"}}]})

    endpoint = EndpointConfig(base_url="http://llm.test/v1", max_retries=0)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    cfg = ScenarioConfig(strategy_assignment={12: Strategy.LLM, 13: Strategy.LLM}, episode_count=4)
    advisors = {i: ChatCompletionAdvisor(endpoint, client) for i in (12, 13)}
    res = run_simulation(cfg, advisors)
    traces = [rec.llm[i] for rec in res.episodes for i in rec.llm]
    assert any(t.fallback for t in traces) and any(not t.fallback for t in traces)
    for rec in res.episodes:
        for i, t in rec.llm.items():
            if t.submitted is not None:
                assert t.submitted <= rec.valuations[i]


def test_replay_exhaustion_propagates():
    cfg = ScenarioConfig(episode_count=3)
    with pytest.raises(Exception, match="exhausted"):
        run_simulation(cfg, {13: ScriptedAdvisor(Replay([2.0]))})


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(ue_count=0)
    with pytest.raises(ValueError):
        ScenarioConfig(sinr_db_range=(20.0, 5.0))
    with pytest.raises(ValueError):
        ScenarioConfig(strategy_assignment={17: Strategy.LLM})
    with pytest.raises(ValueError):
        ScenarioConfig(f_max=1)
