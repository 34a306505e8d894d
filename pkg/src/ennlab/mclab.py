"""Monte Carlo experiments for the expectile network sieve estimator.

Four experiments, each returning an ExperimentReport:

* ulln_experiment         sup over sampled networks of |empirical risk - population risk|
* consistency_experiment  empirical norm between the fit and the truth as n grows
* approximation_experiment  L2 error of noiseless fits as the width grows
* normality_experiment    distribution of the centered plug-in mean statistic

Covariates are uniform on [0, 1]^d. Population quantities come from a
PopulationOracle: a fixed-seed Monte Carlo sample, or Romberg quadrature on
2049 nodes when d = 1. Every replication draws from its own stream keyed by
(master seed, cell index, replication index, purpose), so results do not
depend on execution order or on the number of worker processes.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, stats

from . import bounds
from .core import (Dataset, EnnParams, SieveSpec, check_tau, empirical_risk, in_sieve,
                   loss_split, predict, sample_sieve)
from .exceptions import ConfigError
from .seeding import derive_seed
from .train import TrainConfig, empirical_norm, fit

__all__ = [
    "TargetSpec", "NoiseSpec", "SieveSchedule", "PopulationOracle", "Cell",
    "ExperimentReport", "gen_data", "ks_statistic", "population_split",
    "centered_risk_deviation",
    "ulln_experiment", "consistency_experiment", "approximation_experiment",
    "normality_experiment", "loglog_slope", "summarize",
]

# stream purposes inside one replication
_DATA, _TRAIN, _NETS, _FIXED = 0, 1, 2, 3


@dataclass(frozen=True)
class TargetSpec:
    """True regression function on [0, 1]^d.

    kinds and their params:
      constant  {"c"}                      f(x) = c
      linear    {"a", "b"}                 f(x) = a * sum(x) + b
      sine      {"amplitude", "frequency"} f(x) = amplitude * sin(2 pi frequency x_1)
      enn       {"params": EnnParams}      a fixed network
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        required = {"constant": ("c",), "linear": ("a", "b"),
                    "sine": ("amplitude", "frequency"), "enn": ("params",)}
        if self.kind not in required:
            raise ConfigError(f"unknown target {self.kind!r}")
        missing = [k for k in required[self.kind] if k not in self.params]
        if missing:
            raise ConfigError(f"target {self.kind!r} is missing {missing}")
        if self.kind == "enn" and not isinstance(self.params["params"], EnnParams):
            object.__setattr__(self, "params",
                               {**self.params, "params": EnnParams.from_dict(self.params["params"])})

    @classmethod
    def constant(cls, c):
        return cls("constant", {"c": float(c)})

    @classmethod
    def linear(cls, a=1.0, b=0.0):
        return cls("linear", {"a": float(a), "b": float(b)})

    @classmethod
    def sine(cls, amplitude=1.0, frequency=1.0):
        return cls("sine", {"amplitude": float(amplitude), "frequency": float(frequency)})

    @classmethod
    def enn(cls, params, sieve=None):
        if sieve is not None and not in_sieve(params, sieve):
            raise ConfigError("target network lies outside the stated sieve")
        return cls("enn", {"params": params})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(x.shape[0], p["c"])
        if self.kind == "linear":
            return p["a"] * x.sum(axis=1) + p["b"]
        if self.kind == "sine":
            return p["amplitude"] * np.sin(2 * np.pi * p["frequency"] * x[:, 0])
        return predict(p["params"], x)

    def to_dict(self):
        if self.kind == "enn":
            return {"kind": "enn", "params": self.params["params"].to_dict()}
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, d)


@dataclass(frozen=True)
class NoiseSpec:
    """Mean-zero additive noise: "gaussian", "uniform" or "none".

    `scale` is the standard deviation for gaussian and the half-width a for
    uniform on [-a, a]. Build through the classmethods, which take the
    variance sigma2 for gaussian.
    """

    kind: str
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "none"):
            raise ConfigError(f"unknown noise {self.kind!r}")
        if self.scale < 0 or (self.kind == "none" and self.scale != 0):
            raise ConfigError("invalid noise scale")

    @classmethod
    def gaussian(cls, sigma2):
        return cls("gaussian", math.sqrt(sigma2))

    @classmethod
    def uniform(cls, a):
        return cls("uniform", float(a))

    @classmethod
    def none(cls):
        return cls("none", 0.0)

    @property
    def sigma2(self):
        if self.kind == "gaussian":
            return self.scale**2
        if self.kind == "uniform":
            return self.scale**2 / 3.0
        return 0.0

    def sample(self, rng, n):
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, n)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, n)
        return np.zeros(n)

    def split_moments(self, mu):
        """E[(mu + e)^2 1{mu + e >= 0}] and E[(mu + e)^2 1{mu + e < 0}] in closed form."""
        mu = np.asarray(mu, dtype=float)
        s = self.scale
        if self.kind == "none" or s == 0:
            sq = mu**2
            return np.where(mu >= 0, sq, 0.0), np.where(mu >= 0, 0.0, sq)
        if self.kind == "gaussian":
            t = mu / s
            total = mu**2 + s**2
            upper = total * stats.norm.cdf(t) + mu * s * stats.norm.pdf(t)
        else:
            total = mu**2 + s**2 / 3.0
            upper = (np.maximum(mu + s, 0.0)**3 - np.maximum(mu - s, 0.0)**3) / (6.0 * s)
        return upper, total - upper

    def expectile(self, tau):
        """tau-expectile of the noise law; the shift between the expectile and mean curves."""
        tau = check_tau(tau)
        if self.kind == "none" or self.scale == 0 or tau == 0.5:
            return 0.0
        s = self.scale
        if self.kind == "gaussian":
            def excess(m):  # E(e - m)+ and E(m - e)+
                t = m / s
                up = s * stats.norm.pdf(t) - m * stats.norm.sf(t)
                return up, up + m
        else:
            def excess(m):
                up = (s - m)**2 / (4 * s)
                return up, up + m

        def foc(m):
            up, down = excess(m)
            return tau * up - (1 - tau) * down

        lim = 10 * s if self.kind == "gaussian" else s
        return optimize.brentq(foc, -lim, lim, xtol=1e-14)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "gaussian":
            d["sigma2"] = self.sigma2
        elif self.kind == "uniform":
            d["a"] = self.scale
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "none")
        if kind == "gaussian":
            return cls.gaussian(float(d["sigma2"]))
        if kind == "uniform":
            return cls.uniform(float(d["a"]))
        if kind == "none":
            return cls.none()
        raise ConfigError(f"unknown noise {kind!r}")


@dataclass(frozen=True)
class SieveSchedule:
    """Sieve as a function of n.

    The width follows `growth`. Budgets default to V = max(4, 2 + r) and
    M = 10 (1 + ln r); fixed `v` / `m` override them.
    """

    growth: bounds.GrowthSchedule
    v: float = None
    m: float = None

    @property
    def d(self):
        return self.growth.d

    def sieve(self, n):
        r = self.growth.r(n)
        return self.for_width(r)

    def for_width(self, r):
        v = self.v if self.v is not None else max(4.0, 2.0 + r)
        m = self.m if self.m is not None else 10.0 * (1.0 + math.log(r))
        return SieveSpec(r, v, m, self.d)

    @classmethod
    def power(cls, exponent=0.25, d=1, v=None, m=None):
        return cls(bounds.GrowthSchedule("power", exponent, d), v, m)

    @classmethod
    def fixed(cls, r, d=1, v=None, m=None):
        return cls(bounds.GrowthSchedule("constant", r, d), v, m)

    def to_dict(self):
        return {"rule": self.growth.kind, "param": self.growth.param, "d": self.d,
                "v": self.v, "m": self.m}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"rule", "param", "d", "v", "m"}
        if unknown:
            raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
        return cls(bounds.GrowthSchedule(d.get("rule", "power"), float(d.get("param", 0.25)),
                                         int(d.get("d", 1))), d.get("v"), d.get("m"))


class PopulationOracle:
    """Expectations over X uniform on [0, 1]^d.

    method "mc" averages over a fixed-seed sample of `size` points (noise is
    drawn alongside for risk terms); "romberg" integrates on 2**k + 1 nodes
    (d = 1 only) and takes the noise expectation in closed form.
    """

    def __init__(self, d, method="auto", size=1_000_000, seed=0, romberg_k=11):
        if method == "auto":
            method = "romberg" if d == 1 else "mc"
        if method not in ("mc", "romberg"):
            raise ConfigError(f"unknown oracle method {method!r}")
        if method == "romberg" and d != 1:
            raise ConfigError("Romberg oracle requires d = 1")
        self.d, self.method, self.size, self.seed = d, method, int(size), seed
        if method == "romberg":
            self.x = np.linspace(0.0, 1.0, 2**romberg_k + 1)[:, None]
            self.dx = 1.0 / 2**romberg_k
        else:
            self.x = np.random.default_rng(seed).uniform(size=(self.size, d))
        self._noise_cache = {}

    @property
    def nominal_error(self):
        """Order of the relative error of one expectation."""
        return 1.0 / math.sqrt(self.size) if self.method == "mc" else 1e-10

    def mean(self, values):
        values = np.asarray(values, dtype=float)
        if self.method == "romberg":
            return float(integrate.romb(values, dx=self.dx))
        return float(np.mean(values))

    def expect(self, fn):
        return self.mean(fn(self.x))

    def _noise(self, noise):
        if noise not in self._noise_cache:
            rng = np.random.default_rng(derive_seed(self.seed, 1))
            self._noise_cache[noise] = noise.sample(rng, self.x.shape[0])
        return self._noise_cache[noise]

    def split(self, f_values, f0_values, noise):
        """(E g1, E g2) for residual y - f with y = f0(X) + noise."""
        if self.method == "romberg":
            up, down = noise.split_moments(f0_values - f_values)
            return self.mean(up), self.mean(down)
        g1, g2 = loss_split(f0_values + self._noise(noise), f_values)
        return self.mean(g1), self.mean(g2)


def population_split(params, target, noise, oracle):
    return oracle.split(predict(params, oracle.x), target(oracle.x), noise)


def gen_data(target, noise, n, d, seed):
    """n draws of (x, y) with x uniform on [0, 1]^d and y = f0(x) + noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, d))
    y = target(x) + noise.sample(rng, n)
    return Dataset(x, y)


def ks_statistic(samples, cdf):
    """sup |empirical CDF - cdf| by the order-statistic formula."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - f)), np.max(np.abs(f - (i - 1) / n))))


def summarize(values):
    v = np.asarray(values, dtype=float)
    return {"median": float(np.median(v)), "mean": float(np.mean(v)),
            "q10": float(np.quantile(v, 0.1)), "q90": float(np.quantile(v, 0.9)),
            "min": float(np.min(v)), "max": float(np.max(v))}


def loglog_slope(ns, values):
    """Least-squares slope of log(values) against log(ns)."""
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


@dataclass
class Cell:
    params: dict
    replications: int
    raw: dict
    aggregates: dict
    threshold: dict = None
    passed: bool = True

    def to_dict(self):
        return {"params": self.params, "replications": self.replications,
                "aggregates": self.aggregates, "threshold": self.threshold,
                "pass": bool(self.passed)}


@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    cells: list
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.cells) and all(c["pass"] for c in self.checks)

    def to_dict(self):
        return {"experiment": self.experiment, "seed": self.seed,
                "cells": [c.to_dict() for c in self.cells],
                "checks": self.checks, "info": self.info, "pass": self.passed}

    def raw_rows(self):
        """One row per (cell, replication) with every per-replication value."""
        rows = []
        for ci, cell in enumerate(self.cells):
            for rep in range(cell.replications):
                row = {"cell": ci, "replication": rep}
                row.update({k: v[rep] for k, v in cell.raw.items()})
                rows.append(row)
        return rows


def _check(name, value, op, threshold):
    ok = value < threshold if op == "<" else value <= threshold if op == "<=" else \
        threshold[0] <= value <= threshold[1]
    return {"name": name, "value": value, "op": op, "threshold": threshold, "pass": bool(ok)}


def _run(worker, tasks, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [worker(*t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * n_jobs))
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(worker, *zip(*tasks), chunksize=chunk))


def _check_grid(ns):
    ns = [int(n) for n in ns]
    if not ns or any(n < 1 for n in ns) or sorted(set(ns)) != ns:
        raise ConfigError("n grid must be strictly increasing positive integers")
    return ns


# ---------------------------------------------------------------- ULLN


def _ulln_rep(target, noise, tau, sieve, n, k_nets, fixed, oracle, seed, cell, rep):
    data = gen_data(target, noise, n, sieve.d, derive_seed(seed, cell, rep, _DATA))
    f0_pop = target(oracle.x)
    sup_dev, split_err = 0.0, 0.0
    for k in range(k_nets):
        params = sample_sieve(sieve, derive_seed(seed, cell, rep, _NETS, k))
        dev, err = centered_risk_deviation(params, data, target, noise, tau, oracle, f0_pop)
        sup_dev, split_err = max(sup_dev, dev), max(split_err, err)
    single, err = centered_risk_deviation(fixed, data, target, noise, tau, oracle, f0_pop)
    return sup_dev, single, max(split_err, err)


def centered_risk_deviation(params, data, target, noise, tau, oracle, f0_pop=None):
    """|empirical risk - population risk| of one network, built from the g1/g2 split.

    Returns (deviation, split_error) where split_error is the gap between the
    recombined split and empirical_risk computed directly.
    """
    if f0_pop is None:
        f0_pop = target(oracle.x)
    g1, g2 = loss_split(data.y, predict(params, data.x))
    emp = tau * float(np.mean(g1)) + (1 - tau) * float(np.mean(g2))
    err = abs(emp - empirical_risk(tau, params, data))
    e1, e2 = oracle.split(predict(params, oracle.x), f0_pop, noise)
    return abs(emp - (tau * e1 + (1 - tau) * e2)), err


def ulln_experiment(target, noise, tau, schedule, ns, k_nets=200, replications=10,
                    seed=0, oracle=None, oracle_tol=None, n_jobs=1):
    """Centered empirical risk over sampled sieve networks along an n grid.

    Per (n, replication): draw data and `k_nets` networks from the n-th sieve,
    record the largest |empirical - population| risk gap (computed through the
    g1/g2 split), and the same gap for one fixed network shared by all n.
    Passes when the median sup-gap strictly decreases along the grid and the
    fixed-network gap has log-log slope in [-0.7, -0.3].
    """
    tau = check_tau(tau)
    ns = _check_grid(ns)
    oracle = oracle or PopulationOracle(schedule.d, seed=derive_seed(seed, 99))
    if oracle_tol is not None and oracle.nominal_error > oracle_tol:
        raise ConfigError(
            f"oracle of size {oracle.size} cannot reach tolerance {oracle_tol}")
    ratios = [bounds.growth_condition_ratio(schedule.growth, n) for n in ns if n >= 2]
    if any(b >= a for a, b in zip(ratios, ratios[1:])):
        raise ConfigError("growth ratio p ln p / n must decrease along the n grid")
    fixed = sample_sieve(schedule.sieve(ns[0]), derive_seed(seed, 0, 0, _FIXED))
    tasks = [(target, noise, tau, schedule.sieve(n), n, k_nets, fixed, oracle, seed, ci, rep)
             for ci, n in enumerate(ns) for rep in range(replications)]
    results = _run(_ulln_rep, tasks, n_jobs)
    cells = []
    for ci, n in enumerate(ns):
        res = results[ci * replications:(ci + 1) * replications]
        sieve = schedule.sieve(n)
        raw = {"sup_deviation": [r[0] for r in res], "fixed_deviation": [r[1] for r in res],
               "split_error": [r[2] for r in res]}
        agg = {"sup_deviation": summarize(raw["sup_deviation"]),
               "fixed_deviation": summarize(raw["fixed_deviation"]),
               "max_split_error": max(raw["split_error"]),
               "growth_ratio": bounds.growth_condition_ratio(schedule.growth, n) if n >= 2 else None}
        cells.append(Cell({"n": n, "r": sieve.r, "v": sieve.v, "m": sieve.m, "tau": tau,
                           "k_nets": k_nets}, replications, raw, agg))
    for prev, cell in zip(cells, cells[1:]):
        bound = prev.aggregates["sup_deviation"]["median"]
        cell.threshold = {"median_sup_deviation_below": bound}
        cell.passed = cell.aggregates["sup_deviation"]["median"] < bound
    checks = [_check("max_split_error", max(c.aggregates["max_split_error"] for c in cells),
                     "<=", 1e-12)]
    if len(ns) >= 2:
        slope = loglog_slope(ns, [c.aggregates["fixed_deviation"]["median"] for c in cells])
        checks.append(_check("fixed_deviation_loglog_slope", slope, "in", [-0.7, -0.3]))
    info = {"target": target.to_dict(), "noise": noise.to_dict(), "oracle": oracle.method,
            "schedule": schedule.to_dict()}
    return ExperimentReport("ulln", seed, cells, checks, info)


# ---------------------------------------------------------- consistency


def _fit_rep(target, noise, tau, sieve, n, cfg, seed, cell, rep, shift):
    data = gen_data(target, noise, n, sieve.d, derive_seed(seed, cell, rep, _DATA))
    cfg = replace(cfg, seed=derive_seed(seed, cell, rep, _TRAIN))
    model = fit(data, tau, sieve, cfg)
    norm = empirical_norm(model, target, data.x)
    shifted = empirical_norm(model, lambda x: target(x) + shift, data.x)
    return norm, shifted, model.risk, float(model.converged), model.iterations


def consistency_experiment(target, noise, taus, schedule, ns, replications=20, cfg=None,
                           seed=0, ceiling=None, estimand="expectile", n_jobs=1):
    """Empirical norm ||f_hat - f0||_n on the training design along an n grid.

    With mean-zero noise the fit estimates the tau-expectile curve
    f0 + e_tau(noise), which differs from f0 by a constant when tau != 1/2.
    Both norms are recorded; `estimand` ("expectile" or "mean") picks the one
    the pass rule uses. For each tau the cell at the largest n passes when its
    median norm is strictly below the median at the smallest n (if the grid has
    more than one point) and below `ceiling` (if given). Cells also report the
    separation threshold for (tau, sigma2).
    """
    if estimand not in ("expectile", "mean"):
        raise ConfigError(f"unknown estimand {estimand!r}")
    key = "norm" if estimand == "mean" else "norm_to_expectile_curve"
    taus = [check_tau(t) for t in np.atleast_1d(taus)]
    ns = _check_grid(ns)
    cfg = cfg or TrainConfig()
    tasks, meta = [], []
    for ti, tau in enumerate(taus):
        shift = noise.expectile(tau)
        for ni, n in enumerate(ns):
            ci = ti * len(ns) + ni
            meta.append((tau, n, shift))
            tasks += [(target, noise, tau, schedule.sieve(n), n, cfg, seed, ci, rep, shift)
                      for rep in range(replications)]
    results = _run(_fit_rep, tasks, n_jobs)
    cells = []
    for ci, (tau, n, shift) in enumerate(meta):
        res = results[ci * replications:(ci + 1) * replications]
        sieve = schedule.sieve(n)
        raw = {"norm": [r[0] for r in res], "norm_to_expectile_curve": [r[1] for r in res],
               "risk": [r[2] for r in res], "converged": [r[3] for r in res],
               "iterations": [r[4] for r in res]}
        agg = {"norm": summarize(raw["norm"]),
               "norm_to_expectile_curve": summarize(raw["norm_to_expectile_curve"]),
               "risk": summarize(raw["risk"]),
               "converged_fraction": float(np.mean(raw["converged"])),
               "identifiability_threshold": bounds.identifiability_threshold(tau, noise.sigma2),
               "noise_expectile": shift}
        cells.append(Cell({"tau": tau, "n": n, "r": sieve.r, "v": sieve.v, "m": sieve.m},
                          replications, raw, agg))
    for ti in range(len(taus)):
        first, last = cells[ti * len(ns)], cells[ti * len(ns) + len(ns) - 1]
        threshold = {}
        limit = math.inf
        if len(ns) > 1:
            threshold["median_norm_below_smallest_n"] = first.aggregates[key]["median"]
            limit = threshold["median_norm_below_smallest_n"]
        if ceiling is not None:
            threshold["ceiling"] = float(ceiling)
            limit = min(limit, float(ceiling))
        if threshold:
            last.threshold = {"statistic": key, **threshold}
            last.passed = last.aggregates[key]["median"] < limit
    info = {"target": target.to_dict(), "noise": noise.to_dict(), "schedule": schedule.to_dict(),
            "train": _cfg_dict(cfg)}
    return ExperimentReport("consistency", seed, cells, [], info)


def _cfg_dict(cfg):
    return {"step_size": cfg.step_size, "max_iters": cfg.max_iters, "grad_tol": cfg.grad_tol,
            "restarts": cfg.restarts}


# -------------------------------------------------------- approximation


def _approx_rep(target, sieve, n, cfg, oracle, seed, cell, rep):
    data = gen_data(target, NoiseSpec.none(), n, sieve.d, derive_seed(seed, cell, rep, _DATA))
    cfg = replace(cfg, seed=derive_seed(seed, cell, rep, _TRAIN))
    model = fit(data, 0.5, sieve, cfg)
    err = oracle.mean((predict(model.params, oracle.x) - target(oracle.x)) ** 2)
    return err, model.risk


def approximation_experiment(target, rs, n=1000, replications=5, cfg=None, seed=0, d=1,
                             oracle=None, schedule=None, ceiling=None, n_jobs=1):
    """L2(mu) error, the integrated squared error, of noiseless fits for each width in `rs`.

    Budgets follow `schedule.for_width(r)`. Passes when the median error is
    nonincreasing in r and, if `ceiling` is given, every cell's median is
    below it.
    """
    rs = [int(r) for r in rs]
    if not rs or sorted(set(rs)) != rs or rs[0] < 1:
        raise ConfigError("width grid must be strictly increasing positive integers")
    cfg = cfg or TrainConfig()
    schedule = schedule or SieveSchedule.power(d=d)
    oracle = oracle or PopulationOracle(d, method="mc", size=100_000, seed=derive_seed(seed, 99))
    tasks = [(target, schedule.for_width(r), n, cfg, oracle, seed, ci, rep)
             for ci, r in enumerate(rs) for rep in range(replications)]
    results = _run(_approx_rep, tasks, n_jobs)
    cells = []
    for ci, r in enumerate(rs):
        res = results[ci * replications:(ci + 1) * replications]
        sieve = schedule.for_width(r)
        raw = {"l2_error": [x[0] for x in res], "risk": [x[1] for x in res]}
        cells.append(Cell({"r": r, "v": sieve.v, "m": sieve.m, "n": n}, replications, raw,
                          {"l2_error": summarize(raw["l2_error"]),
                           "risk": summarize(raw["risk"])}))
    for i, cell in enumerate(cells):
        threshold, limit = {}, math.inf
        if i > 0:
            threshold["median_error_at_most_previous"] = cells[i - 1].aggregates["l2_error"]["median"]
            limit = threshold["median_error_at_most_previous"]
        med = cell.aggregates["l2_error"]["median"]
        ok = med <= limit
        if ceiling is not None:
            threshold["ceiling"] = float(ceiling)
            ok = ok and med < ceiling
        if threshold:
            cell.threshold, cell.passed = threshold, bool(ok)
    info = {"target": target.to_dict(), "oracle": oracle.method, "oracle_size": oracle.x.shape[0],
            "schedule": schedule.to_dict(), "train": _cfg_dict(cfg)}
    return ExperimentReport("approximation", seed, cells, [], info)


# ------------------------------------------------------------ normality


def _normality_rep(target, noise, tau, sieve, n, cfg, oracle, f0_pop, p_f0, seed, cell, rep):
    data = gen_data(target, noise, n, sieve.d, derive_seed(seed, cell, rep, _DATA))
    cfg = replace(cfg, seed=derive_seed(seed, cell, rep, _TRAIN))
    model = fit(data, tau, sieve, cfg)
    fitted = predict(model.params, data.x)
    p_fhat = oracle.mean(predict(model.params, oracle.x))
    root_n = math.sqrt(n)
    stat = float(np.sum(fitted - p_fhat)) / root_n
    diff = float(np.sum(fitted - target(data.x) - (p_fhat - p_f0))) / root_n
    return stat, diff, model.risk


def normality_experiment(target, noise, tau, n, replications=500, cfg=None, seed=0,
                         schedule=None, oracle=None, n_jobs=1, min_replications=200,
                         dry_run=False):
    """Distribution of S = n^{-1/2} sum (f_hat(X_i) - P f_hat) across replications.

    S is compared with N(0, v0), v0 = P f0^2 - (P f0)^2, by the KS statistic;
    the cell passes when KS < 1.63 / sqrt(R) and the median of |D|, with
    D = n^{-1/2} sum [(f_hat - f0)(X_i) - P(f_hat - f0)], is below the
    standard deviation of S. With dry_run the configuration is validated and
    None is returned.
    """
    tau = check_tau(tau)
    if replications < min_replications:
        raise ConfigError(f"normality needs at least {min_replications} replications")
    cfg = cfg or TrainConfig()
    schedule = schedule or SieveSchedule.power(d=1)
    oracle = oracle or PopulationOracle(schedule.d, seed=derive_seed(seed, 99))
    f0_pop = target(oracle.x)
    p_f0 = oracle.mean(f0_pop)
    v0 = oracle.mean(f0_pop**2) - p_f0**2
    if not v0 > 1e-12:
        raise ConfigError("degenerate cell: target has zero variance under the covariate law")
    sieve = schedule.sieve(n)
    if dry_run:
        return None
    tasks = [(target, noise, tau, sieve, n, cfg, oracle, f0_pop, p_f0, seed, 0, rep)
             for rep in range(replications)]
    results = _run(_normality_rep, tasks, n_jobs)
    raw = {"statistic": [r[0] for r in results], "centered_difference": [r[1] for r in results],
           "risk": [r[2] for r in results]}
    s = np.asarray(raw["statistic"])
    ks = ks_statistic(s, stats.norm(scale=math.sqrt(v0)).cdf)
    critical = 1.63 / math.sqrt(replications)
    spread = float(np.std(s, ddof=1))
    med_diff = float(np.median(np.abs(raw["centered_difference"])))
    agg = {"v0": v0, "ks_statistic": ks, "statistic": summarize(s),
           "statistic_sd": spread, "median_abs_centered_difference": med_diff,
           "risk": summarize(raw["risk"])}
    cell = Cell({"tau": tau, "n": n, "r": sieve.r, "v": sieve.v, "m": sieve.m},
                replications, raw, agg,
                {"ks_below": critical, "median_abs_difference_below_sd": spread})
    cell.passed = ks < critical and med_diff < spread
    info = {"target": target.to_dict(), "noise": noise.to_dict(), "oracle": oracle.method,
            "schedule": schedule.to_dict(), "train": _cfg_dict(cfg)}
    return ExperimentReport("normality", seed, [cell], [], info)
