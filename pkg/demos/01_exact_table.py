# %% [markdown]
# # One round, exactly
#
# Build the default protocol, push the state through the five steps and read
# off the joint table of the two Wigners' results.

# %%
from pathlib import Path

from friendly_wigner import Protocol, evolve_exact, joint_distribution
from friendly_wigner.config import load_config

config = load_config(Path(__file__).with_name("default.toml"))
protocol = Protocol(config)
tree = evolve_exact(protocol)

# %% The global state after each step
for key in ("init", "fbar_sets_spin", "fbar_sends_spin", "f_measures_s"):
    print(f"{key:16s} {tree.rows[key]}")

# %% Wbar's measurement splits the state in two
for wbar, (p, post) in tree.wbar_branches().items():
    print(f"wbar={wbar:8s} p={p:.6f}  {post}")

# %% Joint table: w=ok together with wbar=okbar happens one round in twelve
table = joint_distribution(tree)
for wbar, w, p in table.cells():
    print(f"{wbar:8s} {w:6s} {p:.6f}")
print("P(ok | okbar)    =", round(table.conditional("ok", "okbar"), 12))
print("P(ok | failsbar) =", round(table.conditional("ok", "failsbar"), 12))
