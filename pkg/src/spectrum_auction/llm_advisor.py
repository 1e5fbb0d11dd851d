"""LLM bid advice: prompt construction, reply parsing, HTTP transport, scripted doubles."""
from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import httpx

from .core_model import BudgetMode
from .strategies import budget_cap

log = logging.getLogger(__name__)

ENV_BASE_URL = "SPECTRUM_LLM_BASE_URL"
ENV_API_KEY = "SPECTRUM_LLM_API_KEY"
DEFAULT_MODEL = "gpt-5-mini"
DEFAULT_HISTORY_WINDOW = 10

PACING_INSTRUCTION = (
    "Objective: maximize cumulative utility while never exhausting the budget "
    "before the last episode."
)


class AdvisorError(RuntimeError):
    """Advice could not be obtained; callers fall back to the shaded heuristic."""


class ParseError(AdvisorError, ValueError):
    pass


class ReplayExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class PromptContext:
    valuation_per_channel: float
    remaining_budget: float
    demand: int
    clearing_price_history: Tuple[float, ...] = ()
    # (bid or None when no bid was submitted, outcome label)
    own_bid_history: Tuple[Tuple[Optional[float], str], ...] = ()
    episodes_total: int = 20
    episodes_remaining: int = 20
    budget_mode: BudgetMode = BudgetMode.REFILL

    def __post_init__(self):
        if len(self.clearing_price_history) != len(self.own_bid_history):
            raise ValueError("clearing price and own bid histories must be episode-aligned")
        if not 0 <= self.episodes_remaining <= self.episodes_total:
            raise ValueError("episodes_remaining must lie in [0, episodes_total]")


@dataclass(frozen=True)
class AdvisorReply:
    bid_value: float
    explanation: str
    raw_response: str
    fallback: bool = False


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str = DEFAULT_MODEL
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    api_key: Optional[str] = field(default=None, repr=False)

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        base_url = os.environ.get(ENV_BASE_URL, "").strip()
        api_key = os.environ.get(ENV_API_KEY, "").strip()
        if not base_url or not api_key:
            raise AdvisorError(
                f"live LLM bidding needs {ENV_BASE_URL} and {ENV_API_KEY} set in the environment"
            )
        return cls(base_url=base_url, api_key=api_key, **overrides)


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def build_prompt(ctx: PromptContext, history_window: int = DEFAULT_HISTORY_WINDOW) -> str:
    prices = ctx.clearing_price_history[-history_window:] if history_window > 0 else ()
    bids = ctx.own_bid_history[-history_window:] if history_window > 0 else ()
    price_text = ", ".join(_fmt(p) for p in prices) if prices else "none (first episode)"
    if bids:
        bid_text = "; ".join(
            f"{'no bid' if b is None else _fmt(b)} -> {outcome}" for b, outcome in bids
        )
    else:
        bid_text = "none (first episode)"
    episode = ctx.episodes_total - ctx.episodes_remaining + 1
    lines = [
        "Given the following network and economic context:",
        f"- Your true valuation for the BS spectrum: {_fmt(ctx.valuation_per_channel)} per sub-channel",
        f"- Your budget: {_fmt(ctx.remaining_budget)}",
        f"- Number of sub-channels required: {ctx.demand}",
        f"- Previous clearing prices: {price_text}",
        f"- Previous own bids and auction outcomes: {bid_text}",
        f"- Auction episode {episode} of {ctx.episodes_total} ({ctx.episodes_remaining} remaining, including this one)",
        "Please analyze and provide:",
        "1. Recommended bid value for the spectrum.",
        "2. A brief explanation of your reasoning.",
    ]
    if ctx.budget_mode == BudgetMode.STATIC:
        lines.append(PACING_INSTRUCTION)
    lines += [
        "Respond in exactly this format (the bid is per sub-channel):",
        "Bid value: [value]",
        'Explanation: "[Short textual reasoning]"',
    ]
    return "\n".join(lines)


_BID_RE = re.compile(
    r"bid\s*value\s*\**\s*[:=]\s*\**\s*\[?\s*\$?\s*"
    r"([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)",
    re.IGNORECASE,
)
_EXPLANATION_RE = re.compile(r"explanation\s*\**\s*:\s*\**\s*(.*)", re.IGNORECASE | re.DOTALL)


def parse_reply(raw: Union[str, bytes]) -> AdvisorReply:
    """Pull ``Bid value: <x>`` and the explanation out of free-form model text."""
    if isinstance(raw, (bytes, bytearray)):
        raw = bytes(raw).decode("utf-8", errors="replace")
    if not raw or not raw.strip():
        raise ParseError("empty reply")
    m = _BID_RE.search(raw)
    if m is None:
        raise ParseError("reply has no 'Bid value:' field")
    try:
        value = float(m.group(1))
    except ValueError as exc:  # pragma: no cover - regex only admits float literals
        raise ParseError(f"bid {m.group(1)!r} is not numeric") from exc
    if not math.isfinite(value):
        raise ParseError(f"bid {m.group(1)!r} is not finite")
    if value < 0:
        raise ParseError(f"bid {value!r} is negative")
    e = _EXPLANATION_RE.search(raw, m.end())
    explanation = ""
    if e is not None:
        explanation = e.group(1).strip().strip('"').strip("“”").strip()
    return AdvisorReply(bid_value=value, explanation=explanation, raw_response=raw)


def _first_text(payload) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise AdvisorError(f"malformed chat-completion response: {exc!r}") from exc
    if isinstance(content, list):
        for block in content:
            if isinstance(block, dict) and isinstance(block.get("text"), str):
                return block["text"]
        raise AdvisorError("response has no text block")
    if not isinstance(content, str):
        raise AdvisorError("response content is not text")
    return content


class ChatCompletionAdvisor:
    """Asks a chat-completion endpoint for a bid, retrying on transport or parse failure."""

    concurrent_io = True

    def __init__(self, endpoint: EndpointConfig, client: Optional[httpx.Client] = None,
                 history_window: int = DEFAULT_HISTORY_WINDOW):
        self.endpoint = endpoint
        self.history_window = history_window
        self._client = client or httpx.Client(timeout=endpoint.timeout)

    def _url(self) -> str:
        base = self.endpoint.base_url.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"

    def _request(self, prompt: str) -> str:
        headers = {}
        if self.endpoint.api_key:
            headers["Authorization"] = f"Bearer {self.endpoint.api_key}"
        body = {
            "model": self.endpoint.model_name,
            "temperature": self.endpoint.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        resp = self._client.post(self._url(), json=body, headers=headers, timeout=self.endpoint.timeout)
        resp.raise_for_status()
        return _first_text(resp.json())

    def advise(self, ctx: PromptContext) -> AdvisorReply:
        prompt = build_prompt(ctx, self.history_window)
        last_error: Optional[Exception] = None
        for attempt in range(self.endpoint.max_retries + 1):
            try:
                return parse_reply(self._request(prompt))
            except (httpx.HTTPError, ValueError, AdvisorError) as exc:
                last_error = exc
                log.warning("LLM bid attempt %d failed: %s", attempt + 1, exc)
        raise AdvisorError(f"no usable reply after {self.endpoint.max_retries + 1} attempts: {last_error}")


def advise_with_fallback(advisor, ctx: PromptContext, fallback_bid: float) -> AdvisorReply:
    try:
        return advisor.advise(ctx)
    except AdvisorError as exc:
        log.info("falling back to shaded bid %.4f: %s", fallback_bid, exc)
        return AdvisorReply(fallback_bid, f"fallback to shaded heuristic ({exc})", "", fallback=True)


def request_bid(ctx: PromptContext, endpoint: EndpointConfig, fallback_bid: float,
                client: Optional[httpx.Client] = None,
                history_window: int = DEFAULT_HISTORY_WINDOW) -> AdvisorReply:
    """One live bid request. Never raises on transport or parse trouble; the
    shaded ``fallback_bid`` is returned with ``fallback=True`` instead."""
    return advise_with_fallback(ChatCompletionAdvisor(endpoint, client, history_window), ctx, fallback_bid)


def bound_bid(raw_bid: float, valuation: float, demand: int, remaining_budget: float,
              clamp_to_valuation: bool = True) -> float:
    bid = raw_bid
    if clamp_to_valuation:
        bid = min(max(bid, 0.0), valuation)
    return budget_cap(bid, demand, remaining_budget)


# -- scripted doubles -------------------------------------------------------

@dataclass(frozen=True)
class EchoValuation:
    pass


@dataclass(frozen=True)
class FixedFraction:
    fraction: float

    def __post_init__(self):
        if not (math.isfinite(self.fraction) and self.fraction >= 0):
            raise ValueError("fraction must be finite and >= 0")


@dataclass(frozen=True)
class Replay:
    bids: Tuple[float, ...]

    def __init__(self, bids: Sequence[float]):
        object.__setattr__(self, "bids", tuple(float(b) for b in bids))


ScriptPolicy = Union[EchoValuation, FixedFraction, Replay]


class ScriptedAdvisor:
    """Deterministic offline stand-in for the LLM. Replies go through
    :func:`parse_reply` so they exercise the same response format."""

    concurrent_io = False

    def __init__(self, policy: ScriptPolicy):
        if not isinstance(policy, (EchoValuation, FixedFraction, Replay)):
            raise TypeError(f"unsupported scripted policy {policy!r}")
        self.policy = policy
        self._cursor = 0

    def advise(self, ctx: PromptContext) -> AdvisorReply:
        p = self.policy
        if isinstance(p, EchoValuation):
            bid, why = ctx.valuation_per_channel, "bid the true valuation"
        elif isinstance(p, FixedFraction):
            bid, why = p.fraction * ctx.valuation_per_channel, f"shade to {p.fraction:g} of valuation"
        else:
            if self._cursor >= len(p.bids):
                raise ReplayExhausted(f"replay script of {len(p.bids)} bids exhausted")
            bid, why = p.bids[self._cursor], "replayed"
            self._cursor += 1
        raw = f'Bid value: {bid!r}\nExplanation: "{why}"'
        reply = parse_reply(raw)
        # repr round-trips, so the parsed value is the scripted one bit for bit
        assert reply.bid_value == bid
        return reply


def scripted_advisor(policy: ScriptPolicy) -> ScriptedAdvisor:
    return ScriptedAdvisor(policy)
