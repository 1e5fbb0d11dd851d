"""Repeated VCG spectrum auctions with truthful, shaded and LLM-advised bidders."""
from .core_model import (
    BudgetMode,
    ChannelDraw,
    RadioConfig,
    Strategy,
    UEProfile,
    demand_ratio,
    required_subchannels,
    reserve_price,
    shannon_rate,
    valuation,
)
from .mechanism import AuctionOutcome, SealedBid, run_auction, solve_welfare, vcg_payments
from .simulation import ScenarioConfig, run_simulation
from .strategies import BidderState, StrategyParams, budget_cap, shaded_bid, truthful_bid

__version__ = "0.1.0"
