"""
The expectile network and its loss
===================================

A one-hidden-layer sigmoid network, the asymmetric squared loss, and a
finite-difference check of the analytic gradient.
"""

import numpy as np

from ennlab import Dataset, EnnParams, empirical_risk, grad_params, loss_tau, predict

# Two hidden units on one input: a bump built from two opposing sigmoids.
params = EnnParams(alpha0=0.5, alpha=[1.5, -1.0], gamma=[[6.0], [-4.0]], gamma0=[-3.0, 2.0])
x = np.linspace(0, 1, 5)[:, None]
print("f(x) =", np.round(predict(params, x), 4))

# The loss weights positive residuals by tau and negative ones by 1 - tau.
for tau in (0.1, 0.5, 0.9):
    print(f"tau={tau}: L(y=1, f=0) = {loss_tau(tau, 1.0, 0.0):.2f}, "
          f"L(y=0, f=1) = {loss_tau(tau, 0.0, 1.0):.2f}")

# Analytic gradient against central differences with step 1e-5.
rng = np.random.default_rng(0)
data = Dataset(rng.uniform(size=(30, 1)), rng.normal(size=30))
theta = params.to_vector()
fd = np.empty_like(theta)
for i in range(theta.size):
    up, dn = theta.copy(), theta.copy()
    up[i] += 1e-5
    dn[i] -= 1e-5
    fd[i] = (empirical_risk(0.7, EnnParams.from_vector(up, 2, 1), data)
             - empirical_risk(0.7, EnnParams.from_vector(dn, 2, 1), data)) / 2e-5
g = grad_params(0.7, params, data).to_vector()
print("max |analytic - numeric| =", np.max(np.abs(g - fd)))
