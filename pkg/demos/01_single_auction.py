# %% [markdown]
# # One VCG round, by hand
#
# Three UEs each want a single sub-channel; the BS has two to sell and a
# reserve of 1.2 per channel (6 monetary units/W at 0.2 W).

# %%
from spectrum_auction import SealedBid, run_auction, solve_welfare, vcg_payments
from spectrum_auction.core_model import reserve_price

r = reserve_price(6.0, 0.2)
bids = [SealedBid(1, 1, 3.0), SealedBid(2, 1, 2.0), SealedBid(3, 1, 2.5)]

winners, welfare = solve_welfare(bids, capacity=2, reserve=r)
print("winners", sorted(winners), "welfare", round(welfare, 6))

# Each winner pays the reserve plus the surplus it displaces (UE 2's 0.8).
for ue, (pivot, price) in vcg_payments(bids, 2, r, winners).items():
    print(f"UE {ue}: pivot {pivot:.3f}, price per channel {price:.3f}")

# %% [markdown]
# Multi-channel demands make winner determination a knapsack. Two 3-channel
# requests beat one 4-channel request, since nothing else fits next to the
# 4-channel one.

# %%
bids = [SealedBid(1, 4, 2.0), SealedBid(2, 3, 2.2), SealedBid(3, 3, 2.1)]
out = run_auction(bids, capacity=6, reserve=r)
print(sorted(out.winners), out.payment_per_channel, "BS utility", round(out.bs_utility, 6))

# %% [markdown]
# With more channels than demand nobody imposes an externality and every
# price collapses to the reserve.

# %%
out = run_auction(bids, capacity=10, reserve=r)
print(out.payment_per_channel, out.clearing_price)
