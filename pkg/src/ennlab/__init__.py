"""Expectile neural networks on a constrained sieve, with bounds and Monte Carlo checks."""
from .core import (Dataset, EnnParams, SieveSpec, empirical_risk, forward, grad_params,
                   in_sieve, loss_grad_f, loss_tau, predict, project_sieve, sample_sieve)
from .exceptions import ConfigError, DomainError, NumericalFailure
from .train import FittedModel, TrainConfig, empirical_norm, expectile_oracle, fit, fit_constant

__version__ = "0.1.0"
