# %% [markdown]
# # Sampling rounds
#
# Each round draws its four outcomes from a counter-based stream keyed by
# (seed, lane, round), so the counts do not depend on how many worker threads
# share the work.

# %%
import time

from friendly_wigner import Protocol, evolve_exact, joint_distribution, monte_carlo

protocol = Protocol.default()
exact = joint_distribution(evolve_exact(protocol))

# %%
t0 = time.perf_counter()
freq = monte_carlo(protocol, 10**6, seed=2024, workers=4)
print(f"10^6 rounds in {time.perf_counter() - t0:.2f} s")

zs = freq.z_scores(exact)
for wbar, w, p in exact.cells():
    print(f"{wbar:8s} {w:6s} exact {p:.6f}  sampled {freq.frequency(wbar, w):.6f}  z {zs[(wbar, w)]:+.2f}")

# %% Same seed, one worker: identical counts
assert monte_carlo(protocol, 10**6, seed=2024, workers=1).joint_counts == freq.joint_counts
print("worker count does not change the result")
