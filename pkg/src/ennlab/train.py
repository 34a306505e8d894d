"""Sieve-constrained empirical risk minimization.

`fit` runs projected gradient descent from several random feasible starts and
keeps the one with the lowest training risk. Each step moves along the
negative gradient and projects back onto the sieve. The trial step length is
the Barzilai-Borwein estimate from the previous move; a step that raises the
risk is retried at half the length, so the risk never increases.
"""
import bisect
from dataclasses import dataclass

import numpy as np

from .core import (EnnParams, check_tau, empirical_risk, l1_norm, predict,
                   project_l1_ball, risk_and_grad_vector, sample_sieve, unpack_vector,
                   _check_data, _check_sieve)
from .exceptions import NumericalFailure
from .seeding import derive_seed

__all__ = ["TrainConfig", "FittedModel", "fit", "fit_constant", "expectile_oracle",
           "empirical_norm", "restart_seed"]

_MIN_STEP_RATIO = 1e-10
_MAX_STEP = 1e4


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 1.0
    max_iters: int = 2000
    grad_tol: float = 1e-6
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ValueError("restarts must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class FittedModel:
    params: EnnParams
    risk: float
    iterations: int
    converged: bool
    restart_index: int

    def predict(self, x):
        return predict(self.params, x)


def restart_seed(seed, restart):
    return derive_seed(seed, restart)


class _Problem:
    """Risk, gradient and projection on the flat parameter vector."""

    def __init__(self, tau, data, sieve):
        self.tau, self.data, self.sieve = tau, data, sieve
        self.r, self.d = sieve.r, sieve.d

    def risk_grad(self, theta):
        with np.errstate(over="ignore", invalid="ignore"):
            return risk_and_grad_vector(self.tau, theta, self.data.x, self.data.y, self.r, self.d)

    def project(self, theta):
        r, d = self.r, self.d
        out = theta.copy()
        out[:1 + r] = project_l1_ball(theta[:1 + r], self.sieve.v)
        _, _, gamma, gamma0 = unpack_vector(out, r, d)
        for j in range(r):
            row = np.concatenate([[gamma0[j]], gamma[j]])
            if l1_norm(row) > self.sieve.m:
                row = project_l1_ball(row, self.sieve.m)
                gamma0[j] = row[0]
                gamma[j] = row[1:]
        return out

    def params(self, theta):
        return EnnParams.from_vector(theta, self.r, self.d)


def _descend(problem, cfg, params, restart, callback):
    theta = params.to_vector()
    risk, grad = problem.risk_grad(theta)
    if not np.isfinite(risk):
        raise NumericalFailure(f"non-finite risk at the start of restart {restart}")
    trial = cfg.step_size
    converged = False
    it = 0
    while it < cfg.max_iters:
        step = trial
        while True:
            cand = problem.project(theta - step * grad)
            if step == trial:
                # gradient mapping at the trial step; the plain gradient norm in the interior
                gmap = np.linalg.norm(theta - cand) / step
                if gmap < cfg.grad_tol:
                    converged = True
                    break
            cand_risk, cand_grad = problem.risk_grad(cand)
            if not np.isfinite(cand_risk):
                raise NumericalFailure(
                    f"non-finite risk in restart {restart} at iteration {it}")
            if cand_risk <= risk:
                break
            step /= 2.0
            if step < _MIN_STEP_RATIO * trial:
                cand = None
                break
        if converged or cand is None:
            break
        it += 1
        # Barzilai-Borwein trial step for the next iteration, clipped to a sane range
        s_vec, y_vec = cand - theta, cand_grad - grad
        sy = float(s_vec @ y_vec)
        trial = float(s_vec @ s_vec) / sy if sy > 0 else cfg.step_size
        trial = min(max(trial, _MIN_STEP_RATIO * cfg.step_size), _MAX_STEP)
        theta, risk, grad = cand, cand_risk, cand_grad
        if callback is not None:
            callback(restart, it, problem.params(theta), risk)
    return FittedModel(problem.params(theta), risk, it, converged, restart)


def fit(data, tau, sieve, cfg, callback=None):
    """Best-of-`restarts` projected gradient descent inside the sieve.

    Restart k starts from sample_sieve(sieve, restart_seed(cfg.seed, k)).
    `callback(restart, iteration, params, risk)` sees every accepted iterate.
    Ties in final risk go to the lowest restart index.
    """
    tau = check_tau(tau)
    if data.n == 0:
        raise ValueError("empty dataset")
    init0 = EnnParams.zeros(sieve.r, sieve.d)
    _check_sieve(init0, sieve)
    _check_data(init0, data)
    problem = _Problem(tau, data, sieve)
    best = None
    for k in range(cfg.restarts):
        start = sample_sieve(sieve, restart_seed(cfg.seed, k))
        model = _descend(problem, cfg, start, k, callback)
        if best is None or model.risk < best.risk:
            best = model
    # the reported risk must match a fresh evaluation of the returned params
    risk = empirical_risk(tau, best.params, data)
    return FittedModel(best.params, risk, best.iterations, best.converged, best.restart_index)


def _check_sample(y):
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(y)):
        raise ValueError("sample contains non-finite values")
    return y


def fit_constant(y, tau, tol=1e-12, max_iter=10_000):
    """The tau-expectile of y by the weighted-mean fixed point.

    m <- sum(w y) / sum(w) with w = tau on {y >= m} and 1 - tau elsewhere.
    The weights only change when m crosses a data point, so the iteration
    terminates after finitely many distinct weight patterns.
    """
    tau = check_tau(tau)
    y = _check_sample(y)
    lo, hi = float(y.min()), float(y.max())
    m = float(np.mean(y))
    for _ in range(max_iter):
        w = np.where(y >= m, tau, 1.0 - tau)
        # a weighted mean lies in [min y, max y]; clipping removes rounding drift
        new = min(max(float(np.sum(w * y) / np.sum(w)), lo), hi)
        if abs(new - m) <= tol:
            return new
        m = new
    raise NumericalFailure("expectile fixed point did not converge")


def expectile_oracle(y, tau, tol=1e-12):
    """The tau-expectile of y by bisection on the first-order condition.

    Solves sum |tau - 1{y < m}| (y - m) = 0, a strictly decreasing function of
    m, on [min y, max y].
    """
    tau = check_tau(tau)
    y = np.sort(_check_sample(y))
    # prefix sums make each evaluation O(log n): below[k] = sum of the k smallest
    below = np.concatenate(([0.0], np.cumsum(y))).tolist()
    above = np.concatenate((np.cumsum(y[::-1])[::-1], [0.0])).tolist()
    n = y.size
    y = y.tolist()

    def foc(m):
        k = bisect.bisect_left(y, m)
        return (1.0 - tau) * (below[k] - k * m) + tau * (above[k] - (n - k) * m)

    lo, hi = y[0], y[-1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if foc(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def empirical_norm(f_hat, f0, x):
    """Root mean square of f_hat - f0 over the rows of x.

    f_hat may be a FittedModel, EnnParams or a callable on (n, d) arrays.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("design must be a nonempty 2-d array")
    if isinstance(f_hat, FittedModel):
        f_hat = f_hat.params
    fitted = predict(f_hat, x) if isinstance(f_hat, EnnParams) else np.asarray(f_hat(x))
    return float(np.sqrt(np.mean((fitted - np.asarray(f0(x))) ** 2)))
