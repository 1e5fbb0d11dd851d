"""Batch front end: preset experiments, CSV emission and run manifests.

Usage::

    spectrum-auction run --preset static --seed 0 --out results/static
    spectrum-auction run --config my.yaml --out results/custom
    spectrum-auction run --manifest results/static/manifest.json --out results/again

Live LLM bidding (``--live-llm``) reads the endpoint from the environment
variables SPECTRUM_LLM_BASE_URL and SPECTRUM_LLM_API_KEY.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .config import (
    ConfigError,
    build_config,
    config_to_mapping,
    parse_config_mapping,
    read_config_file,
)
from .core_model import BudgetMode, Strategy
from .llm_advisor import ENV_API_KEY, ENV_BASE_URL, AdvisorError, ChatCompletionAdvisor, EndpointConfig
from .simulation import ScenarioConfig, SimulationResult, new_market, run_simulation

log = logging.getLogger(__name__)

METRICS_HEADER = ["ue_id", "strategy", "win_frequency", "accumulated_utility", "last_win_episode"]
BS_HEADER = ["episode", "bs_utility_delta", "clearing_price"]
BIDS_HEADER = ["episode", "ue_id", "demand", "bid_per_channel", "won", "payment_per_channel", "utility_delta"]
SUMMARY_HEADER = ["preset", "bs_accumulated_utility", "ue_accumulated_utility", "mean_last_win_episode",
                  "eta", "subchannel_count"]
SWEEP_HEADER = ["eta", "subchannel_count", "mean_win_frequency", "truthful_utility", "shaded_utility",
                "llm_utility", "bs_accumulated_utility", "min_clearing_price", "max_clearing_price",
                "all_payments_at_reserve"]

_STATIC = {"budget_mode": BudgetMode.STATIC, "static_budget": 15.0, "llm_policy": "fraction", "llm_fraction": 0.85}

#: Scenario overrides per preset, applied before any user config file.
PRESETS: Dict[str, Dict[str, Any]] = {
    "refill": {"budget_mode": BudgetMode.REFILL, "llm_policy": "echo"},
    "static": dict(_STATIC),
    # Budgets cover every episode at the reserve price and every valuation
    # clears the reserve even after 0.85 shading, so only the supply/demand
    # balance changes along the sweep.
    "eta_sweep": {**_STATIC, "static_budget": 30.0, "valuation_range": (1.5, 3.5)},
    "all_truthful": {**_STATIC, "default_strategy": Strategy.TRUTHFUL, "strategy_assignment": {}},
    "all_heuristic": {**_STATIC, "default_strategy": Strategy.SHADED, "strategy_assignment": {}},
    "all_llm": {**_STATIC, "default_strategy": Strategy.LLM, "strategy_assignment": {}},
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: List[str], rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def summary_row(name: str, result: SimulationResult) -> list:
    m = result.metrics
    return [name, m.bs_accumulated_utility, math.fsum(u.accumulated_utility for u in m.ues.values()),
            m.mean_last_win(), m.eta, result.config.subchannel_count]


def emit_outputs(result: SimulationResult, out_dir, preset: str = "custom",
                 advisor_mode: str = "scripted", extra_files=()) -> Dict[str, str]:
    """Write metrics.csv, bs.csv, bids.csv, summary.csv and manifest.json.

    Returns the checksum map recorded in the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = result.metrics
    _write_csv(out / "metrics.csv", METRICS_HEADER, (
        [u.ue_id, u.strategy.value, u.win_frequency, u.accumulated_utility, u.last_win_episode]
        for u in sorted(m.ues.values(), key=lambda u: u.ue_id)
    ))
    _write_csv(out / "bs.csv", BS_HEADER, (
        [rec.episode, rec.bs_utility_delta, rec.outcome.clearing_price] for rec in result.episodes
    ))
    bid_rows = []
    for rec in result.episodes:
        for b in rec.submitted_bids:
            won = b.ue_id in rec.outcome.winners
            bid_rows.append([rec.episode, b.ue_id, b.demand, b.bid_per_channel, won,
                             rec.outcome.payment_per_channel[b.ue_id], rec.per_ue_utility_delta[b.ue_id]])
    _write_csv(out / "bids.csv", BIDS_HEADER, bid_rows)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, [summary_row(preset, result)])

    files = ["metrics.csv", "bs.csv", "bids.csv", "summary.csv", *extra_files]
    checksums = {name: _sha256(out / name) for name in files}
    manifest = {
        "preset": preset,
        "seed": result.config.rng_seed,
        "advisor_mode": advisor_mode,
        "output_dir": str(out),
        "config": config_to_mapping(result.config),
        "checksums": checksums,
    }
    try:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing {out / 'manifest.json'}: {exc}") from exc
    return checksums


def preset_config(name: str, user_overrides: Optional[Mapping[str, Any]] = None,
                  seed: Optional[int] = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    overrides = {**PRESETS[name], **(user_overrides or {})}
    if seed is not None:
        overrides["rng_seed"] = seed
    return build_config(overrides)


def live_advisors(config: ScenarioConfig) -> Dict[int, ChatCompletionAdvisor]:
    endpoint = EndpointConfig.from_env(
        model_name=config.llm_model, timeout=config.llm_timeout,
        max_retries=config.llm_max_retries, temperature=config.llm_temperature,
    )
    ids = [i for i in range(1, config.ue_count + 1) if config.strategy_of(i) == Strategy.LLM]
    return {i: ChatCompletionAdvisor(endpoint, history_window=config.history_window) for i in ids}


def sweep_configs(config: ScenarioConfig) -> List[ScenarioConfig]:
    """One config per eta in the grid, with K = round(eta * D) for the fixed population."""
    market = new_market(config)
    total_demand = sum(d.demand_subchannels for d in market.draws.values() if d is not None)
    if total_demand == 0:
        raise ConfigError("eta sweep needs at least one UE with feasible demand")
    ks = []
    for eta in config.eta_grid:
        k = max(1, round(eta * total_demand))
        if k not in ks:
            ks.append(k)
    return [dataclasses.replace(config, subchannel_count=k) for k in ks]


def _sweep_row(result: SimulationResult) -> list:
    m = result.metrics
    r = result.config.reserve_price

    def group_mean(strategy):
        vals = [u.accumulated_utility for u in m.ues.values() if u.strategy == strategy]
        return math.fsum(vals) / len(vals) if vals else None

    prices = [p for rec in result.episodes for i, p in rec.outcome.payment_per_channel.items()
              if i in rec.outcome.winners]
    return [
        m.eta, result.config.subchannel_count,
        math.fsum(u.win_frequency for u in m.ues.values()) / len(m.ues),
        group_mean(Strategy.TRUTHFUL), group_mean(Strategy.SHADED), group_mean(Strategy.LLM),
        m.bs_accumulated_utility,
        min(m.clearing_price_series) if m.clearing_price_series else None,
        max(m.clearing_price_series) if m.clearing_price_series else None,
        all(p == r for p in prices),
    ]


def run_preset(name: str, out_dir=None, user_overrides: Optional[Mapping[str, Any]] = None,
               seed: Optional[int] = None, live_llm: bool = False) -> List[SimulationResult]:
    """Run a named experiment; write outputs when ``out_dir`` is given.

    Returns one result for ordinary presets and one per grid point for
    ``eta_sweep``.
    """
    config = preset_config(name, user_overrides, seed)
    return run_config(config, out_dir, preset=name, live_llm=live_llm)


def run_config(config: ScenarioConfig, out_dir=None, preset: str = "custom",
               live_llm: bool = False) -> List[SimulationResult]:
    mode = "live" if live_llm else "scripted"
    if preset != "eta_sweep":
        advisors = live_advisors(config) if live_llm else None
        result = run_simulation(config, advisors)
        if out_dir is not None:
            emit_outputs(result, out_dir, preset, mode)
        return [result]

    results = []
    for point in sweep_configs(config):
        advisors = live_advisors(point) if live_llm else None
        results.append(run_simulation(point, advisors))
    if out_dir is not None:
        out = Path(out_dir)
        for res in results:
            emit_outputs(res, out / f"k{res.config.subchannel_count}", preset, mode)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "eta_sweep.csv", SWEEP_HEADER, [_sweep_row(r) for r in results])
        manifest = {
            "preset": preset, "seed": config.rng_seed, "advisor_mode": mode, "output_dir": str(out),
            "config": config_to_mapping(config),
            "checksums": {"eta_sweep.csv": _sha256(out / "eta_sweep.csv")},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return results


def load_manifest(path) -> tuple:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    config = build_config(parse_config_mapping(data["config"]))
    return data.get("preset", "custom"), config, data.get("advisor_mode", "scripted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectrum-auction",
        description="Repeated budget-constrained VCG spectrum auctions.",
        epilog=f"Live LLM bidding reads {ENV_BASE_URL} (chat-completion base URL) and "
               f"{ENV_API_KEY} (bearer token) from the environment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser(
        "run", help="run a preset or a config file",
        epilog=f"--live-llm requires {ENV_BASE_URL} and {ENV_API_KEY}.",
    )
    run.add_argument("--config", help="YAML scenario file (sections: " + ", ".join(
        ["scenario", "radio", "population", "budget", "strategies", "llm", "sweep"]) + ")")
    run.add_argument("--manifest", help="re-run the scenario recorded in a manifest.json")
    run.add_argument("--seed", type=int, help="override the RNG seed")
    run.add_argument("--preset", choices=sorted(PRESETS), help="named experiment")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--live-llm", action="store_true",
                     help=f"query a live chat-completion endpoint ({ENV_BASE_URL}, {ENV_API_KEY})")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.manifest:
            if args.config or args.preset:
                raise ConfigError("--manifest cannot be combined with --config or --preset")
            preset, config, _ = load_manifest(args.manifest)
            if args.seed is not None:
                config = dataclasses.replace(config, rng_seed=args.seed)
            results = run_config(config, args.out, preset=preset, live_llm=args.live_llm)
        else:
            overrides = read_config_file(args.config) if args.config else {}
            if args.preset:
                results = run_preset(args.preset, args.out, overrides, args.seed, args.live_llm)
            else:
                if args.seed is not None:
                    overrides["rng_seed"] = args.seed
                results = run_config(build_config(overrides), args.out, live_llm=args.live_llm)
    except (ConfigError, AdvisorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for res in results:
        m = res.metrics
        print(f"K={res.config.subchannel_count} eta={m.eta:.3f} BS utility={m.bs_accumulated_utility:.4f} "
              f"UE utility={math.fsum(u.accumulated_utility for u in m.ues.values()):.4f} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
