# %% [markdown]
# # Budget refill vs static budgets
#
# 16 UEs, 6 sub-channels, 20 episodes. UE 10 bids truthfully, UE 13 is the
# LLM slot (scripted here), everyone else uses the shaded heuristic.
#
# * refill: each episode starts with a fresh budget near the reserve price,
#   and the LLM slot echoes its valuation.
# * static: a single budget of 15 for the whole horizon, and the LLM slot
#   shades to 85% of its valuation.

# %%
import sys

import numpy as np

from spectrum_auction.cli import run_preset

results = {name: run_preset(name)[0] for name in ("refill", "static")}

for name, res in results.items():
    m = res.metrics
    print(f"\n== {name}: eta={m.eta:.3f}, BS utility {m.bs_accumulated_utility:.3f}")
    print(" ue  strategy   v      wins  utility  last win")
    for u in m.ues.values():
        print(f"{u.ue_id:3d}  {u.strategy.value:9s} {u.valuation:5.2f}  {u.wins:4d}  {u.accumulated_utility:7.3f}"
              f"  {u.last_win_episode}")
    print("mean last win by strategy:", {k.value: v for k, v in m.last_win_by_strategy().items()})

# %% [markdown]
# Win-rate and utility bars, if matplotlib is around.

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)

fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
for col, (name, res) in enumerate(results.items()):
    ues = sorted(res.metrics.ues.values(), key=lambda u: u.ue_id)
    ids = np.array([u.ue_id for u in ues])
    colors = ["C1" if u.strategy.value == "truthful" else "C2" if u.strategy.value == "llm" else "C0" for u in ues]
    axes[0, col].bar(ids, [u.win_frequency for u in ues], color=colors)
    axes[0, col].set_title(f"{name}: winning frequency")
    axes[1, col].bar(ids, [u.accumulated_utility for u in ues], color=colors)
    axes[1, col].set_title(f"{name}: accumulated utility")
    axes[1, col].set_xlabel("UE")
fig.tight_layout()
fig.savefig("refill_vs_static.png", dpi=120)
print("wrote refill_vs_static.png")
