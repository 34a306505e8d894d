"""Command line: ``ennlab train|predict|bounds|experiment``.

Settings come from three layers, later ones winning: built-in defaults, the
JSON document given by ``--config``, then explicit flags.

Exit codes: 0 success / all cells pass, 1 an experiment threshold failed,
2 user or configuration error, 3 numerical failure during training.
"""
import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import bounds
from .core import Dataset, EnnParams, SieveSpec, in_sieve, predict
from .exceptions import ConfigError, DomainError, NumericalFailure
from .mclab import (NoiseSpec, SieveSchedule, TargetSpec, approximation_experiment,
                    consistency_experiment, normality_experiment, ulln_experiment)
from .train import TrainConfig, fit

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

EXPERIMENTS = ("ulln", "consistency", "approximation", "normality")
EXPERIMENT_KEYS = {"experiment", "seed", "out", "n_jobs", "d", "target", "noise", "train",
                   "schedule", "tau", "n_grid", "k_nets", "replications", "ceiling", "estimand",
                   "r_grid", "n"}


class UsageError(Exception):
    pass


def read_csv(path, require_y=True):
    """Read a ``x1,...,xd[,y]`` file. Returns (x, y or None)."""
    if not os.path.exists(path):
        raise UsageError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise UsageError(f"{path}: empty file") from None
        has_y = bool(header) and header[-1] == "y"
        xcols = header[:-1] if has_y else header
        if require_y and not has_y:
            raise UsageError(f"{path}: last column must be named 'y'")
        if not xcols or xcols != [f"x{i}" for i in range(1, len(xcols) + 1)]:
            raise UsageError(f"{path}: header must read x1,...,xd{',y' if require_y else ''}")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise UsageError(
                    f"{path}: line {reader.line_num}: expected {len(header)} cells, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise UsageError(f"{path}: line {reader.line_num}: non-numeric cell") from None
            if not all(math.isfinite(v) for v in vals):
                raise UsageError(f"{path}: line {reader.line_num}: non-finite cell")
            rows.append(vals)
    if not rows:
        raise UsageError(f"{path}: no data rows")
    arr = np.array(rows)
    if has_y:
        return arr[:, :-1], arr[:, -1]
    return arr, None


def write_model(path, model, tau, sieve):
    doc = {"tau": tau, "sieve": sieve.to_dict(), "params": model.params.to_dict(),
           "risk": model.risk, "iterations": model.iterations,
           "converged": model.converged}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_model(path):
    if not os.path.exists(path):
        raise UsageError(f"{path}: no such file")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    s = doc["sieve"]
    return doc, EnnParams.from_dict(doc["params"]), SieveSpec(s["r"], s["v"], s["m"], s["d"])


def _load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise UsageError(f"{path}: no such config file")
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be an object")
    return cfg


def _pick(flag, cfg, key, default=None):
    return flag if flag is not None else cfg.get(key, default)


def _train_config(args, cfg):
    t = dict(cfg.get("train", {}))
    for key in ("step_size", "max_iters", "grad_tol", "restarts"):
        val = getattr(args, key, None)
        if val is not None:
            t[key] = val
    seed = _pick(args.seed, cfg, "seed", t.get("seed", 0))
    t["seed"] = seed
    return TrainConfig(**t)


def _taus(args, cfg, default=(0.5,)):
    taus = args.tau if args.tau else cfg.get("tau", list(default))
    taus = [float(t) for t in np.atleast_1d(taus)]
    for t in taus:
        if not 0 < t < 1:
            raise UsageError(f"tau must lie in (0, 1), got {t}")
    return taus


def cmd_train(args):
    cfg = _load_config(args.config)
    data_path = _pick(args.data, cfg, "data")
    if data_path is None:
        raise UsageError("train needs --data or a 'data' config key")
    x, y = read_csv(data_path)
    data = Dataset(x, y)
    sv = dict(cfg.get("sieve", {}))
    for key in ("r", "v", "m"):
        if getattr(args, key) is not None:
            sv[key] = getattr(args, key)
    schedule = SieveSchedule.power(0.25, d=data.d, v=sv.get("v"), m=sv.get("m"))
    sieve = schedule.for_width(int(sv["r"])) if "r" in sv else schedule.sieve(data.n)
    train_cfg = _train_config(args, cfg)
    taus = _taus(args, cfg)
    out = _pick(args.out, cfg, "out", ".")
    os.makedirs(out, exist_ok=True)
    for tau in taus:
        model = fit(data, tau, sieve, train_cfg)
        assert in_sieve(model.params, sieve)
        name = "model.json" if len(taus) == 1 else f"model_tau{tau:g}.json"
        write_model(os.path.join(out, name), model, tau, sieve)
        print(f"tau={tau:g} risk={model.risk!r} iterations={model.iterations} -> {name}")
    return EXIT_OK


def cmd_predict(args):
    cfg = _load_config(args.config)
    model_path = _pick(args.model, cfg, "model")
    data_path = _pick(args.data, cfg, "data")
    if model_path is None or data_path is None:
        raise UsageError("predict needs --model and --data")
    _, params, _ = read_model(model_path)
    x, _ = read_csv(data_path, require_y=False) if not _has_y(data_path) else read_csv(data_path)
    if x.shape[1] != params.d:
        raise UsageError(f"data has {x.shape[1]} inputs, model expects {params.d}")
    preds = predict(params, x)
    out = _pick(args.out, cfg, "out")
    lines = ["prediction"] + [repr(float(p)) for p in preds]
    if out is None:
        print("\n".join(lines))
    else:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "predictions.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def _has_y(path):
    if not os.path.exists(path):
        raise UsageError(f"{path}: no such file")
    with open(path, encoding="utf-8") as fh:
        return fh.readline().strip().split(",")[-1].strip() == "y"


def cmd_bounds(args):
    cfg = _load_config(args.config)
    eps = float(_pick(args.eps, cfg, "eps", 1.0))
    n = int(_pick(args.n, cfg, "n", 1000))
    b = float(_pick(args.b, cfg, "b", 1.0))
    sv = dict(cfg.get("sieve", {}))
    for key in ("r", "v", "m", "d"):
        if getattr(args, key, None) is not None:
            sv[key] = getattr(args, key)
    sieve = SieveSpec(int(sv.get("r", 1)), float(sv.get("v", 8.0)), float(sv.get("m", 10.0)),
                      int(sv.get("d", 1)))
    inputs = bounds.BoundInputs(eps, n, b, sieve)
    m1, m2 = _pick(args.m1, cfg, "m1"), _pick(args.m2, cfg, "m2")
    log_dev = bounds.log_deviation_bound(inputs, m1, m2)
    exponent = _pick(args.growth_exponent, cfg, "growth_exponent")
    growth = (bounds.GrowthSchedule("power", float(exponent), sieve.d) if exponent is not None
              else bounds.GrowthSchedule("constant", sieve.r, sieve.d))
    out = {
        "eps": eps, "n": n, "b": b, "sieve": sieve.to_dict(),
        "log_covering": bounds.log_covering_bound(eps, sieve),
        "log_deviation": log_dev,
        "deviation": bounds.deviation_bound(inputs, m1, m2),
        "vacuous": log_dev >= 0,
        "growth": {"rule": growth.kind, "param": growth.param, "r_n": growth.r(n),
                   "ratio": bounds.growth_condition_ratio(growth, n) if n >= 2 else None},
    }
    if m1 is not None or m2 is not None:
        out["lipschitz_transfer"] = bounds.lipschitz_transfer(m1 or 0.0, m2 or 0.0)
    taus = args.tau or ([] if "tau" not in cfg else list(np.atleast_1d(cfg["tau"])))
    sigma2 = float(_pick(args.sigma2, cfg, "sigma2", 0.0))
    out["identifiability"] = [
        {"tau": float(t), "sigma2": sigma2,
         "threshold": bounds.identifiability_threshold(float(t), sigma2)} for t in taus]
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _schedule(cfg, d):
    s = dict(cfg.get("schedule", {}))
    s.setdefault("d", d)
    return SieveSchedule.from_dict(s)


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"experiment config is missing {missing}")


def build_experiment(cfg, seed, n_jobs):
    """Validate an experiment config and return a zero-argument runner."""
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    unknown = set(cfg) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    d = int(cfg.get("d", 1))
    target = TargetSpec.from_dict(cfg.get("target", {"kind": "sine", "amplitude": 1.0,
                                                     "frequency": 1.0}))
    noise = NoiseSpec.from_dict(cfg.get("noise", {"kind": "none"}))
    train_cfg = TrainConfig(**{**cfg.get("train", {}), "seed": 0})
    if name == "ulln":
        _require(cfg, "n_grid")
        kw = dict(k_nets=int(cfg.get("k_nets", 200)),
                  replications=int(cfg.get("replications", 10)))
        schedule = _schedule(cfg, d)
        return lambda: ulln_experiment(target, noise, float(cfg.get("tau", 0.5)), schedule,
                                       cfg["n_grid"], seed=seed, n_jobs=n_jobs, **kw)
    if name == "consistency":
        _require(cfg, "n_grid")
        schedule = _schedule(cfg, d)
        return lambda: consistency_experiment(
            target, noise, cfg.get("tau", [0.5]), schedule, cfg["n_grid"],
            replications=int(cfg.get("replications", 20)), cfg=train_cfg, seed=seed,
            ceiling=cfg.get("ceiling"), estimand=cfg.get("estimand", "expectile"),
            n_jobs=n_jobs)
    if name == "approximation":
        _require(cfg, "r_grid")
        schedule = _schedule(cfg, d)
        return lambda: approximation_experiment(
            target, cfg["r_grid"], n=int(cfg.get("n", 1000)),
            replications=int(cfg.get("replications", 5)), cfg=train_cfg, seed=seed, d=d,
            schedule=schedule, ceiling=cfg.get("ceiling"), n_jobs=n_jobs)
    _require(cfg, "n")
    schedule = _schedule(cfg, d)
    # validates the cell (degenerate variance, replication count) before any fitting
    normality_experiment(target, noise, float(cfg.get("tau", 0.5)), int(cfg["n"]),
                         replications=int(cfg.get("replications", 500)), cfg=train_cfg,
                         seed=seed, schedule=schedule, dry_run=True)
    return lambda: normality_experiment(
        target, noise, float(cfg.get("tau", 0.5)), int(cfg["n"]),
        replications=int(cfg.get("replications", 500)), cfg=train_cfg, seed=seed,
        schedule=schedule, n_jobs=n_jobs)


def write_report(report, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    rows = report.raw_rows()
    with open(os.path.join(out, "raw.csv"), "w", newline="", encoding="utf-8") as fh:
        if rows:
            writer = csv.writer(fh, lineterminator="\n")
            keys = list(rows[0])
            writer.writerow(keys)
            for row in rows:
                writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k]
                                 for k in keys])


def cmd_experiment(args):
    cfg = _load_config(args.config)
    if args.experiment is not None:
        cfg["experiment"] = args.experiment
    seed = int(_pick(args.seed, cfg, "seed", 0))
    n_jobs = int(_pick(args.jobs, cfg, "n_jobs", 1))
    out = _pick(args.out, cfg, "out", ".")
    runner = build_experiment(cfg, seed, n_jobs)
    report = runner()
    write_report(report, out)
    for i, cell in enumerate(report.cells):
        print(f"cell {i} {cell.params} pass={cell.passed}")
    for check in report.checks:
        print(f"check {check['name']} = {check['value']!r} pass={check['pass']}")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="ennlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON settings file; flags override its keys")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--tau", type=float, action="append", help="expectile level (repeatable)")

    p = sub.add_parser("train", help="fit a network to a CSV file")
    common(p)
    p.add_argument("--data")
    p.add_argument("--r", type=int)
    p.add_argument("--v", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--grad-tol", dest="grad_tol", type=float)
    p.add_argument("--restarts", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="evaluate a saved model on a CSV file")
    common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bounds", help="evaluate covering, deviation and growth bounds")
    common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--v", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--m1", type=float)
    p.add_argument("--m2", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--growth-exponent", dest="growth_exponent", type=float)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a config")
    common(p)
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
