# %% [markdown]
# # Live LLM bidders
#
# Point SPECTRUM_LLM_BASE_URL at any chat-completion endpoint (".../v1") and
# put the bearer token in SPECTRUM_LLM_API_KEY. Failed or unparseable replies
# fall back to the shaded heuristic, so the run always completes.
#
# The same thing from the shell:
#
#     spectrum-auction run --preset static --live-llm --out results/static-live

# %%
import os
import sys

from spectrum_auction.cli import live_advisors, preset_config
from spectrum_auction.llm_advisor import ENV_API_KEY, ENV_BASE_URL, PromptContext, build_prompt
from spectrum_auction.core_model import BudgetMode
from spectrum_auction.simulation import run_simulation

# What the model sees on its first static-budget episode:
print(build_prompt(PromptContext(2.31, 15.0, 1, episodes_total=20, episodes_remaining=20,
                                 budget_mode=BudgetMode.STATIC)))

if not (os.environ.get(ENV_BASE_URL) and os.environ.get(ENV_API_KEY)):
    print(f"\nset {ENV_BASE_URL} and {ENV_API_KEY} to run against a live model")
    sys.exit(0)

config = preset_config("static", {"episode_count": 5})
res = run_simulation(config, live_advisors(config))
for rec in res.episodes:
    for ue, trace in rec.llm.items():
        print(rec.episode, ue, trace)
