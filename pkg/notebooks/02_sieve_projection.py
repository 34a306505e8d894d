"""
Sieve budgets and Euclidean projection
======================================

The sieve caps the L1 norm of the output layer (bias included) by V and of
every hidden row (bias included) by M. Projection is exact and per group.
"""

import numpy as np

from ennlab import EnnParams, SieveSpec, in_sieve, project_sieve
from ennlab.core import l1_norm, project_l1_ball
from ennlab import sample_sieve

# Projecting a vector onto the L1 ball soft-thresholds it.
v = np.array([3.0, -1.0, 0.5])
p = project_l1_ball(v, 2.0)
print("projection of", v, "->", p, "with norm", l1_norm(p))

# On a sieve, the output group and each hidden row are projected separately.
sieve = SieveSpec(r=2, v=4.0, m=3.0, d=1)
wild = EnnParams(2.0, [5.0, -1.0], [[8.0], [1.0]], [1.0, 0.5])
tame = project_sieve(wild, sieve)
print("inside before:", in_sieve(wild, sieve), " after:", in_sieve(tame, sieve))
print("output budget used:", l1_norm(np.r_[tame.alpha0, tame.alpha]))
print("row budgets used:", [l1_norm(np.r_[tame.gamma0[j], tame.gamma[j]]) for j in range(2)])
print("second projection changes nothing:", project_sieve(tame, sieve) == tame)

# Random feasible networks are what the uniform-deviation study samples.
draws = [sample_sieve(sieve, seed) for seed in range(1000)]
print("all 1000 draws feasible:", all(in_sieve(q, sieve) for q in draws))
