"""
Coupling consecutive snapshots
==============================

Given the urn, a uniform ball at time T_{n+1} and "a uniform ball at time T_n
plus a displacement with probability p_n" have box laws that can be computed
exactly.  Their L1 distance shrinks with n, and a maximal coupling makes the
two draws share a box except with probability half that distance.
"""

# %%
import numpy as np

from urnlab import DisplacementModel, derive_rng, simulate_urn
from urnlab.coupling import couple_samples, main2_discrepancy, schedule_window

model = DisplacementModel.cauchy()
urn = simulate_urn(model, schedule_window(40)[1], seed=1)

# %%
for n in (8, 16, 27, 40):
    r = main2_discrepancy(urn, n, h=0.05)
    print(f"n={n:2d} T={r.T_n:6d} L1={r.discrepancy:.4f} 3n^(-4/3)={r.benchmark:.4f} modif={r.modif_prob:.5f} p_n^2={r.modif_benchmark:.5f}")

# %%
c = couple_samples(urn, 16, 0.05, derive_rng(1, 0, "demo"), 100_000)
print("mismatch frequency", c.mismatches / 1e5, "target", c.mismatch_prob)
print("largest matched gap", np.abs(c.a - c.b)[c.matched].max())
