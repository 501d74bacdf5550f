"""
How fast does the colour measure settle?
========================================

Rescaled by log n, the empirical colour measure of a Cauchy urn converges to
the Cauchy law.  All balls descend from a handful of early ancestors, so
their displacements shift the whole measure together, and that shift fades
only like 1/log n.  Seeds therefore differ a lot at any feasible n.
"""

# %%
import numpy as np
from scipy import stats

from urnlab import DisplacementModel, simulate_urn
from urnlab.measure import ks_distance

model = DisplacementModel.cauchy()
urns = [simulate_urn(model, 10**6, seed=0, replica=r) for r in range(5)]
for r, urn in enumerate(urns):
    ks = [ks_distance(urn.colors[:n, 0] / np.log(n), stats.cauchy.cdf) for n in (10**3, 10**4, 10**5, 10**6)]
    print(f"replica {r}: KS " + "  ".join(f"{k:.3f}" for k in ks))

# %%
# Re-centring each measure at its own median removes most of the error,
# so what is left at n = 1e6 is mainly a random location shift.
for r, urn in enumerate(urns):
    x = urn.colors[:, 0] / np.log(10**6)
    med = np.median(x)
    print(f"replica {r}: median {med:+.3f}  KS {ks_distance(x, stats.cauchy.cdf):.3f} -> {ks_distance(x - med, stats.cauchy.cdf):.3f}")
