"""
Growing a random-walk urn
=========================

Each new ball picks a uniform earlier ball and copies its colour plus an
independent displacement.  This walk-through grows a Cauchy urn, checks the
parent structure, and compares the last ball with the record representation.
"""

# %%
import numpy as np

from urnlab import DisplacementModel, derive_rng, simulate_urn
from urnlab.measure import ks_critical, ks_two_sample
from urnlab.urn import record_rep_samples

model = DisplacementModel.cauchy()
urn = simulate_urn(model, 100_000, seed=0)
print(urn.n, "balls; first colours", np.round(urn.colors[:5, 0], 3))

# %%
# Parents are stored 0-based: ball i (0-based) descends from parents[i - 1].
urn.check_parents()
depth = np.zeros(urn.n, dtype=int)
for i in range(1, urn.n):
    depth[i] = depth[urn.parents[i - 1]] + 1
print("mean depth", depth.mean(), "max depth", depth.max())

# %%
# The colour of ball n is a sum of displacements along its ancestry.  Its law
# matches sum_i B_i D_i with B_i ~ Bernoulli(1/i), one draw per fresh urn.
n, reps = 2000, 2000
last = np.array([simulate_urn(model, n, 0, r).colors[-1, 0] for r in range(reps)])
rec, counts = record_rep_samples(model, n, reps, derive_rng(0, 0, "demo"))
print("KS", ks_two_sample(last, rec[:, 0]), "critical", ks_critical(reps, reps))
print("mean record count", counts.mean(), "vs H_n", np.sum(1 / np.arange(1, n + 1)))
