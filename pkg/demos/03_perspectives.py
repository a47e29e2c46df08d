# %% [markdown]
# # Who assigns what
#
# The agents describe the same labs differently.  Wbar, having seen okbar,
# holds a pure state for L.  F knows z=+1/2 but not Wbar's result, so F's
# description of Lbar is an even mixture.  Fbar, inside Lbar, sees its own
# record as a superposition of two non-orthogonal records of L.

# %%
import numpy as np

from friendly_wigner import Protocol, assign_state, open_lab_message
from friendly_wigner.perspectives import record_overlap

protocol = Protocol.default()
print("Wbar, t3, okbar, lab L:", assign_state("WBAR", "t3", {"wbar": "okbar"}, "L").body)

rho = assign_state("F", "t3", {"z": "plus"}, "Lbar").body
kets = [protocol.wbar_basis[b] for b in ("okbar", "failsbar")]
print("F, t3, lab Lbar in the okbar/failsbar basis:\n", np.round(rho.in_basis(kets).real, 12))

# %% Fbar's records overlap
rs = assign_state("FBAR", "t3", {"lbar": "okbar"}, "L").body
print("normalization", rs.normalization)
print("Gram matrix\n", np.round(record_overlap(rs).real, 12))

# %% Messages on opening the lab: quasi-weights above 1, effective probabilities that match Born
for branch in ("okbar", "failsbar"):
    msg = open_lab_message(branch)
    print(branch, [round(q, 6) for q, _ in msg.entries], "effective", round(msg.effective_probability, 9),
          "Born", round(msg.born_probability, 9))
