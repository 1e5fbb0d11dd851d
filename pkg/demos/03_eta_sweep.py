# %% [markdown]
# # Supply vs demand
#
# Hold the 16-UE population fixed and vary the number of sub-channels so the
# resource-demand ratio K/D walks from scarcity into abundance.

# %%
from spectrum_auction.cli import run_preset
from spectrum_auction.core_model import Strategy, classify_regime

for res in run_preset("eta_sweep", user_overrides={"eta_grid": (0.375, 0.75, 1.0, 1.5)}):
    m = res.metrics
    by_group = {}
    for u in m.ues.values():
        by_group.setdefault(u.strategy.value, []).append(u.accumulated_utility)
    means = {k: sum(v) / len(v) for k, v in by_group.items()}
    print(f"K={res.config.subchannel_count:2d} eta={m.eta:.3f} ({classify_regime(m.eta)}): "
          f"BS {m.bs_accumulated_utility:7.3f}, clearing prices "
          f"{min(m.clearing_price_series):.3f}..{max(m.clearing_price_series):.3f}, "
          + ", ".join(f"{k} {v:.2f}" for k, v in sorted(means.items())))

# In the abundant rows every clearing price is the reserve and the BS earns
# nothing above its energy cost.
