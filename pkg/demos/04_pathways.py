# %% [markdown]
# # Nine ways for W to reason
#
# W at t3 can cite Wbar, F and Fbar at different times.  Only the route where
# all four reason at t3 survives the equal-time lifting rule, and it agrees
# with the quantum conditional P(ok | okbar) = 1/2.  The backward route
# t3 -> t2 -> t1 predicts that w=ok never happens.

# %%
from friendly_wigner import Protocol, consistency_report, evaluate_pathway, enumerate_pathways
from friendly_wigner.experiment import ProtocolConfig
from friendly_wigner.reasoning import Pathway

for p in enumerate_pathways():
    v = evaluate_pathway(p)
    print(f"{p.notation:32s} {v.name}")

# %% The full report
rep = consistency_report()
print("overall:", rep.as_dict()["overall"])
for line in rep.transcript[:2]:
    print(line)

# %% [markdown]
# The message model is not a general theorem.  Swap which W result counts as
# "ok" and the equal-time chain still averages the same record claims to 1/2,
# while quantum theory now gives 1.

# %%
swapped = Protocol(ProtocolConfig(w_basis={"ok": {"plus": -1.0}, "fails": {"minus": 1.0}}))
print(evaluate_pathway(Pathway.parse("WBAR:t3,F:t3,FBAR:t3"), swapped).kind)
