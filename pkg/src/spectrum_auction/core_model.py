"""Radio and economic primitives: link rate, QoS demand, valuation, reserve price."""
from __future__ import annotations

import math
from decimal import Decimal
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

#: Rate normalization (bps per monetary unit of rate) used by default.
#: A UE with alpha=1.2 and 904,997 bps is worth 3.0 per sub-channel.
DEFAULT_RATE_SCALE = 362_000.0

#: dB value standing in for a zero linear SINR.
NEG_INF_DB = -300.0


class InfeasibleDemandError(ValueError):
    """The UE cannot reach its required rate on any number of sub-channels."""


class Strategy(str, Enum):
    TRUTHFUL = "truthful"
    SHADED = "shaded"
    LLM = "llm"


@dataclass(frozen=True)
class RadioConfig:
    bandwidth_per_subchannel_hz: float = 180_000.0
    subchannel_count: int = 6
    transmit_power_w: float = 0.2
    power_unit_price: float = 6.0

    def __post_init__(self):
        for name in ("bandwidth_per_subchannel_hz", "transmit_power_w", "power_unit_price"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if int(self.subchannel_count) != self.subchannel_count or self.subchannel_count < 1:
            raise ValueError(f"subchannel_count must be a positive integer, got {self.subchannel_count!r}")

    @property
    def reserve_price(self) -> float:
        return reserve_price(self.power_unit_price, self.transmit_power_w)


@dataclass(frozen=True)
class UEProfile:
    id: int
    alpha: float
    required_rate_bps: float
    initial_budget: float
    strategy: Strategy


@dataclass(frozen=True)
class ChannelDraw:
    sinr_db: float
    achievable_rate_bps: float
    valuation_per_channel: float
    demand_subchannels: int


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def shannon_rate(bandwidth_hz: float, sinr_db: float) -> float:
    """Per-sub-channel Shannon capacity in bps for an SINR given in dB."""
    _check_finite(bandwidth_hz=bandwidth_hz, sinr_db=sinr_db)
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth_hz must be > 0, got {bandwidth_hz!r}")
    return bandwidth_hz * math.log2(1.0 + db_to_linear(sinr_db))


def required_subchannels(required_rate_bps: float, per_channel_rate_bps: float) -> int:
    """Smallest N with N * per_channel_rate_bps >= required_rate_bps."""
    _check_finite(required_rate_bps=required_rate_bps, per_channel_rate_bps=per_channel_rate_bps)
    if required_rate_bps <= 0:
        raise ValueError(f"required_rate_bps must be > 0, got {required_rate_bps!r}")
    if per_channel_rate_bps <= 0:
        raise InfeasibleDemandError(
            f"per-channel rate {per_channel_rate_bps!r} bps cannot carry {required_rate_bps!r} bps"
        )
    n = max(1, math.ceil(required_rate_bps / per_channel_rate_bps))
    # guard the ceil against division rounding in either direction
    while n * per_channel_rate_bps < required_rate_bps:
        n += 1
    while n > 1 and (n - 1) * per_channel_rate_bps >= required_rate_bps:
        n -= 1
    return n


def valuation(alpha: float, rate_bps: float, rate_scale: float = DEFAULT_RATE_SCALE) -> float:
    """Per-channel monetary valuation, linear in both alpha and rate."""
    _check_finite(alpha=alpha, rate_bps=rate_bps, rate_scale=rate_scale)
    if alpha < 0 or rate_bps < 0:
        raise ValueError("alpha and rate_bps must be nonnegative")
    if rate_scale <= 0:
        raise ValueError(f"rate_scale must be > 0, got {rate_scale!r}")
    return alpha * (rate_bps / rate_scale)


def reserve_price(power_unit_price: float, transmit_power_w: float) -> float:
    """BS per-channel energy cost, used as the reserve price.

    The product is taken on the decimal values as written (6 * 0.2 -> 1.2, not
    1.2000000000000002) and rounded once.
    """
    _check_finite(power_unit_price=power_unit_price, transmit_power_w=transmit_power_w)
    return float(Decimal(repr(float(power_unit_price))) * Decimal(repr(float(transmit_power_w))))


def demand_ratio(subchannel_count: int, demands: Sequence[int]) -> float:
    """K / sum(N_i). Below 1 is scarcity, above 1 abundance."""
    if len(demands) == 0:
        raise ValueError("resource-demand ratio is undefined for an empty demand list")
    total = sum(demands)
    if total <= 0:
        raise ValueError("total demand must be positive")
    return subchannel_count / total


def classify_regime(eta: float, tol: float = 1e-9) -> str:
    if abs(eta - 1.0) <= tol:
        return "balanced"
    return "scarcity" if eta < 1.0 else "abundant"


def channel_draw(
    alpha: float,
    sinr_db: float,
    required_rate_bps: float,
    bandwidth_hz: float,
    rate_scale: float = DEFAULT_RATE_SCALE,
) -> ChannelDraw:
    """Evaluate rate, valuation and demand for one UE at a given SINR."""
    rate = shannon_rate(bandwidth_hz, sinr_db)
    return ChannelDraw(
        sinr_db=sinr_db,
        achievable_rate_bps=rate,
        valuation_per_channel=valuation(alpha, rate, rate_scale),
        demand_subchannels=required_subchannels(required_rate_bps, rate),
    )


class BudgetMode(str, Enum):
    REFILL = "refill"
    STATIC = "static"
