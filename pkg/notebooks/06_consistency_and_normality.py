"""
Consistency, approximation and the normal limit
===============================================

Three small Monte Carlo studies; the shipped configs in configs/ run the same
studies at full size through ``ennlab experiment``.
"""

from ennlab import EnnParams, TrainConfig
from ennlab.mclab import (NoiseSpec, SieveSchedule, TargetSpec, approximation_experiment,
                          consistency_experiment, normality_experiment)

truth = TargetSpec.enn(EnnParams(0.5, [1.5, -1.0], [[6.0], [-4.0]], [-3.0, 2.0]))
quick = TrainConfig(max_iters=500, restarts=1)

# At tau = 0.9 the fit tracks f0 plus the noise expectile, not f0 itself.
rep = consistency_experiment(truth, NoiseSpec.gaussian(0.25), [0.5, 0.9], SieveSchedule.power(),
                             [250, 1000], replications=4, cfg=quick, seed=3)
for c in rep.cells:
    print(f"tau={c.params['tau']} n={c.params['n']:5d}  ||f-f0||_n={c.aggregates['norm']['median']:.3f}"
          f"  to expectile curve={c.aggregates['norm_to_expectile_curve']['median']:.3f}")

# Wider networks approximate a sine better.
rep = approximation_experiment(TargetSpec.sine(), [1, 4, 8], n=500, replications=2, cfg=quick)
for c in rep.cells:
    print(f"r={c.params['r']:2d}  integrated squared error={c.aggregates['l2_error']['median']:.2e}")

# The centered sum of fitted values is close to N(0, Var f0(X)).
rep = normality_experiment(TargetSpec.linear(1.0, 0.0), NoiseSpec.gaussian(0.25), 0.5, 500,
                           replications=200, cfg=TrainConfig(max_iters=200, restarts=1), seed=4)
agg = rep.cells[0].aggregates
print(f"v0={agg['v0']:.4f}  sd(S)^2={agg['statistic_sd']**2:.4f}  KS={agg['ks_statistic']:.3f}"
      f"  pass={rep.passed}")
