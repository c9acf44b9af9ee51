#!/usr/bin/python3
"""
Contains the experiment harness: TOML configuration, multi-run execution
and CSV emission.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field, fields
import logging
import os

import numpy as np
import tomli

import models
from models.analysis import chain_pair, compute_abc, effective_features, \
    minimum_norm_fixed_point, rmse, rmspbe
from models.env_bundle import generators, load_env
from models.learners import StepSizes, kinds, run
from models.run_result import RunResult
from models.schedule import parse_schedule

logger = logging.getLogger(__name__)

metric_names = ("rmse", "rmspbe", "theta_norm", "rmse_fixed_point")

_numeric = (int, float)
_config_types = {
    "env": ((str,), "a generator name or a file path"),
    "learner": ((str,), "a learner name"),
    "schedule": ((str, list, tuple), "a schedule string or a list"),
    "alpha": ((str,) + _numeric, "a number or a step-size string"),
    "beta": ((str,) + _numeric, "a number or a step-size string"),
    "eta": (_numeric, "a number"),
    "metrics": ((list, tuple), "a list of metric names"),
    "out": ((str,), "a file path"),
    "theta0": ((list, tuple), "a list of numbers"),
    "init_seed": ((int,), "an integer"),
}


class ConfigError(ValueError):
    """raised for unreadable or invalid experiment configurations"""

    def __init__(self, message, path=None):
        """prefixes the message with the config path when known"""
        self.path = path
        if path is not None:
            message = "{}: {}".format(path, message)
        super().__init__(message)


def _check_types(values, path=None):
    """rejects config values of the wrong type before they are used"""
    for key, (types, expected) in _config_types.items():
        value = values.get(key)
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, types):
            raise ConfigError("{} must be {}, got {!r}".format(
                key, expected, value), path)
    for item in values.get("metrics") or ():
        if not isinstance(item, str):
            raise ConfigError("metrics must be a list of metric names, "
                              "got {!r}".format(item), path)
    for item in values.get("theta0") or ():
        if isinstance(item, bool) or not isinstance(item, _numeric):
            raise ConfigError("theta0 must be a list of numbers, got "
                              "{!r}".format(item), path)


@dataclass
class ExperimentConfig:
    """One experiment: environment, learner, schedule, step sizes, runs"""
    env: str
    learner: str
    schedule: str
    alpha: object
    steps: int
    beta: object = None
    eta: float = None
    runs: int = 1
    seed: int = 0
    eval_every: int = 50
    metrics: tuple = ("rmse",)
    out: str = None
    theta0: list = None
    init_seed: int = None
    path: str = field(default=None, repr=False)

    def __post_init__(self):
        """validates values that need no environment"""
        _check_types({f.name: getattr(self, f.name) for f in fields(self)},
                     self.path)
        if self.learner not in kinds:
            raise ConfigError("unknown learner {!r}".format(self.learner),
                              self.path)
        for key in ("steps", "runs", "seed", "eval_every"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("{} must be an integer".format(key),
                                  self.path)
        if self.steps < 0 or self.runs < 1 or self.eval_every < 1:
            raise ConfigError("steps must be >= 0, runs and eval_every "
                              ">= 1", self.path)
        self.metrics = tuple(self.metrics)
        unknown = [m for m in self.metrics if m not in metric_names]
        if unknown or not self.metrics:
            raise ConfigError("metrics must be a non-empty subset of "
                              "{}".format(", ".join(metric_names)),
                              self.path)
        try:
            parse_schedule(self.schedule)
            StepSizes(self.alpha, self.beta, self.eta).validate_for(
                self.learner)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err), self.path)

    @classmethod
    def from_dict(cls, data, path=None):
        """
        Build a config from parsed TOML.

        Unknown keys are rejected. Relative `env` file paths and `out` are
        resolved against the directory of `path`.
        """
        known = {f.name for f in fields(cls)} - {"path"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown key(s): {}".format(
                ", ".join(unknown)), path)
        missing = [k for k in ("env", "learner", "schedule", "alpha",
                               "steps") if k not in data]
        if missing:
            raise ConfigError("missing key(s): {}".format(
                ", ".join(missing)), path)
        _check_types(data, path)
        data = dict(data)
        base = os.path.dirname(os.path.abspath(path)) if path else None
        if base is not None:
            if data["env"] not in generators and \
                    not os.path.isabs(data["env"]):
                data["env"] = os.path.join(base, data["env"])
            if data.get("out") and not os.path.isabs(data["out"]):
                data["out"] = os.path.join(base, data["out"])
        return cls(path=path, **data)


def load_config(path):
    """reads and validates a TOML experiment file"""
    try:
        with open(path, "rb") as f:
            data = tomli.load(f)
    except FileNotFoundError:
        raise ConfigError("config file not found", path)
    except tomli.TOMLDecodeError as err:
        raise ConfigError("invalid TOML ({})".format(err), path)
    return ExperimentConfig.from_dict(data, path)


def _hooks(config, bundle, schedule, mode):
    """metric callables evaluated on θ snapshots"""
    pair = chain_pair(bundle, mode)
    phi = effective_features(bundle)
    hooks = {}
    A = b = C = None
    if "rmspbe" in config.metrics or "rmse_fixed_point" in config.metrics:
        A, b, C = compute_abc(pair, phi, bundle.gamma, schedule)
    for name in config.metrics:
        if name == "rmse":
            values = bundle.true_values(mode)
            hooks[name] = lambda theta, v=values: rmse(theta, phi, v,
                                                       pair.d)
        elif name == "rmspbe":
            hooks[name] = lambda theta: rmspbe(theta, A, b, C)
        elif name == "theta_norm":
            hooks[name] = np.linalg.norm
        else:
            target = phi @ minimum_norm_fixed_point(A, b, phi)
            hooks[name] = lambda theta, v=target: rmse(theta, phi, v,
                                                       pair.d)
    return hooks


def _initial_theta(config, bundle):
    """θ0 from the config, a seeded draw, or the bundle's default"""
    if config.theta0 is not None:
        theta0 = np.array(config.theta0, dtype=float)
        if theta0.shape != (bundle.dim,):
            raise ConfigError("theta0 must have length {}".format(
                bundle.dim), config.path)
        return theta0
    if config.init_seed is not None:
        return np.random.default_rng(config.init_seed).normal(
            size=bundle.dim)
    return bundle.initial_theta()


def run_experiment(config):
    """
    Execute `config.runs` independent runs with seeds seed + i.

    Runs go through a thread pool when TDSCHEDULE_THREADS is positive;
    each run owns its random stream, so the result does not depend on the
    execution order.

    Returns:
        RunResult: all runs, ordered by run index.
    """
    try:
        bundle = load_env(config.env, config.seed)
    except ValueError as err:
        raise ConfigError("cannot load environment {!r}: {}".format(
            config.env, err), config.path)
    learner = kinds[config.learner]
    if learner.off_policy and bundle.target is None:
        raise ConfigError("{} needs a target policy; {} has none".format(
            config.learner, bundle.name), config.path)
    mode = "off" if learner.off_policy else "on"
    schedule = parse_schedule(config.schedule)
    stepsizes = StepSizes(config.alpha, config.beta, config.eta)
    hooks = _hooks(config, bundle, schedule, mode)
    theta0 = _initial_theta(config, bundle)

    def one(index):
        """a single seeded run"""
        return run(config.learner, bundle, schedule, stepsizes, config.steps,
                   config.seed + index, eval_hooks=hooks,
                   eval_every=config.eval_every, theta0=theta0,
                   run_index=index)

    logger.info("running %d x %s on %s for %d steps", config.runs,
                config.learner, bundle.name, config.steps)
    threads = min(models.threads_t, config.runs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(config.runs)))
    else:
        results = [one(i) for i in range(config.runs)]
    result = RunResult.merge(results)
    if result.diverged_runs:
        logger.warning("diverged runs: %s", result.diverged_runs)
    return result


def aggregate_path(path):
    """`out.csv` -> `out_aggregate.csv`"""
    root, ext = os.path.splitext(path)
    return "{}_aggregate{}".format(root, ext or ".csv")


def _number(value):
    """shortest round-tripping text of a float, locale independent"""
    return repr(float(value))


def emit_csv(result, path):
    """
    Write the per-run series and the per-step aggregates.

    `path` receives `step,run,<metric>...,diverged`, the flag being 1 on
    every row of a run that stopped early. `aggregate_path(path)` receives
    `step,mean_<metric>,se_<metric>...`.

    Returns:
        tuple: the two paths written.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step", "run"] + list(result.metrics) +
                        ["diverged"])
        for series in result.series:
            for i, step in enumerate(series.steps):
                writer.writerow([step, series.run] +
                                [_number(series.values[m][i])
                                 for m in result.metrics] +
                                [int(series.diverged)])
    agg_path = aggregate_path(path)
    with open(agg_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        header = ["step"]
        for name in result.metrics:
            header += ["mean_" + name, "se_" + name]
        writer.writerow(header)
        for step, stats in result.aggregate():
            row = [step]
            for name in result.metrics:
                mean, se, _ = stats[name]
                row += [_number(mean), _number(se)]
            writer.writerow(row)
    return path, agg_path
