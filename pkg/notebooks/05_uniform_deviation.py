"""
Uniform law of large numbers, by simulation
===========================================

The largest gap between empirical and population risk over a sample of
networks from the growing sieve shrinks as n grows.
"""

from ennlab.mclab import NoiseSpec, SieveSchedule, TargetSpec, ulln_experiment

report = ulln_experiment(TargetSpec.sine(), NoiseSpec.gaussian(0.25), tau=0.9,
                         schedule=SieveSchedule.power(0.25), ns=[100, 1000, 10000],
                         k_nets=200, replications=10, seed=2024)
for cell in report.cells:
    print(f"n={cell.params['n']:6d} r={cell.params['r']}  median sup deviation "
          f"{cell.aggregates['sup_deviation']['median']:.4f}")
for check in report.checks:
    print(check["name"], "=", round(check["value"], 4), "pass" if check["pass"] else "FAIL")
