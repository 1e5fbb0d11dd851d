# %% [markdown]
# # Who captures the surplus?
#
# Static budgets, every UE on the same strategy: truthful, shaded heuristic,
# or the 0.85 pacing script standing in for an LLM. The default seed is one
# draw; the loop afterwards shows how much the ordering moves across seeds.

# %%
import statistics

from spectrum_auction.cli import run_preset

names = ("all_truthful", "all_heuristic", "all_llm")
for name in names:
    m = run_preset(name)[0].metrics
    ue_total = sum(u.accumulated_utility for u in m.ues.values())
    print(f"{name:14s} BS {m.bs_accumulated_utility:7.3f}  UEs {ue_total:7.3f}  mean last win {m.mean_last_win():.2f}")

# %%
seeds = range(20)
bs = {n: [] for n in names}
last = {n: [] for n in names}
for seed in seeds:
    for n in names:
        m = run_preset(n, seed=seed)[0].metrics
        bs[n].append(m.bs_accumulated_utility)
        last[n].append(m.mean_last_win())
for n in names:
    print(f"{n:14s} BS mean {statistics.mean(bs[n]):7.3f} (sd {statistics.stdev(bs[n]):.3f}), "
          f"mean last win {statistics.mean(last[n]):.2f}")
ordered = sum(t >= h >= l and t > l for t, h, l in zip(*(bs[n] for n in names)))
print(f"truthful >= heuristic >= paced holds on {ordered}/{len(seeds)} seeds")
