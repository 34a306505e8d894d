"""
Covering, deviation and identifiability bounds
==============================================

Closed-form quantities that say how large a sieve may grow with n.
"""

import numpy as np

from ennlab.bounds import (BoundInputs, GrowthSchedule, deviation_bound, growth_condition_ratio,
                           identifiability_threshold, log_covering_bound, log_deviation_bound)
from ennlab import SieveSpec

sieve = SieveSpec(r=1, v=8.0, m=1.0, d=1)
print("log covering number at eps=1:", log_covering_bound(1.0, sieve))

# At n = 1000 the bound is vacuous and clamps to one; it collapses soon after.
for n in (1000, 2000, 4000, 8000):
    inputs = BoundInputs(eps=1.0, n=n, b=3.0, sieve=sieve)
    print(f"n={n:5d}  log bound={log_deviation_bound(inputs):9.3f}  bound={deviation_bound(inputs):.3g}")

# The width schedule r_n = ceil(n^(1/4)) keeps p ln p / n heading to zero.
sched = GrowthSchedule("power", 0.25, d=1)
for n in (10**2, 10**4, 10**6):
    print(f"n={n:>8d}  r_n={sched.r(n):3d}  ratio={growth_condition_ratio(sched, n):.5f}")

# Below this distance the population risk cannot separate f from f0.
for tau in np.linspace(0.5, 0.9, 5):
    print(f"tau={tau:.1f}  threshold={identifiability_threshold(tau, 1.0):.4f}")
