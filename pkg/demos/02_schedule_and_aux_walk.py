"""
The time schedule and the auxiliary walk
========================================

Snapshots are taken at T_n = floor(exp(3 n^(1/3))).  Between consecutive
snapshots a uniform ball is "new" with probability p_n ~ n^(-2/3), so the
walk that adds a displacement with probability p_n collects about log T_n
jumps by step n.
"""

# %%
import numpy as np
from scipy import stats

from urnlab import DisplacementModel, derive_rng
from urnlab.measure import ks_distance
from urnlab.schedule import Schedule, representability_cutoff, sample_aux_sums

sched = Schedule(40)
for n, t, log_t, p, sum_p, ratio in list(sched.rows())[:10]:
    print(f"{n:3d} {t:8d} {log_t:8.4f} {p:.5f} {sum_p:8.4f} {ratio:.4f}")
print("exact T_n up to n =", representability_cutoff())

# %%
# S_n / log T_n approaches the Cauchy law for Cauchy displacements.
model = DisplacementModel.cauchy()
for n in (30, 300, 3000):
    sums, counts = sample_aux_sums(model, n, 10_000, derive_rng(1, n, "demo"))
    ks = ks_distance(sums[:, 0] / (3 * n ** (1 / 3)), stats.cauchy.cdf)
    print(f"n={n:5d}  mean jumps {counts.mean():7.3f}  KS {ks:.4f}")
