#!/usr/bin/python3
"""
Contains the RunSeries and RunResult classes
"""

from dataclasses import dataclass, field
import math

import numpy as np


@dataclass(eq=False)
class RunSeries:
    """Metric time series and θ snapshots of one learner run"""
    run: int
    seed: int
    metrics: tuple
    steps: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    thetas: list = field(default_factory=list)
    diverged: bool = False

    def record(self, step, theta, values):
        """appends one evaluation point"""
        self.steps.append(int(step))
        self.thetas.append(np.array(theta, dtype=float))
        for name in self.metrics:
            self.values.setdefault(name, []).append(values[name])

    @property
    def final_theta(self):
        """θ at the last recorded point"""
        return self.thetas[-1]

    def value_at(self, name, step):
        """the metric at a recorded step, None when absent"""
        try:
            return self.values[name][self.steps.index(step)]
        except ValueError:
            return None


@dataclass(eq=False)
class RunResult:
    """All runs of an experiment with per-step aggregates"""
    metrics: tuple
    series: list

    @classmethod
    def merge(cls, results):
        """combines single-run results, ordered by run index"""
        results = list(results)
        if not results:
            raise ValueError("nothing to merge")
        metrics = results[0].metrics
        for result in results:
            if result.metrics != metrics:
                raise ValueError("cannot merge results with different "
                                 "metrics")
        series = sorted((s for r in results for s in r.series),
                        key=lambda s: s.run)
        return cls(metrics=metrics, series=series)

    @property
    def steps(self):
        """every step recorded by at least one run"""
        return sorted({step for s in self.series for step in s.steps})

    def aggregate(self):
        """
        Mean and standard error of each metric per recorded step.

        Only the runs that reached a step contribute to it, so diverged
        runs drop out after their last point. Sums use math.fsum, which
        makes the result independent of run order. A single value has an
        undefined (nan) standard error.

        Returns:
            list: (step, {metric: (mean, se, count)}) rows in step order.
        """
        rows = []
        for step in self.steps:
            stats = {}
            for name in self.metrics:
                found = [s.value_at(name, step) for s in self.series]
                found = [v for v in found if v is not None]
                count = len(found)
                mean = _fsum(found) / count
                if count > 1:
                    var = _fsum((v - mean) ** 2 for v in found) / \
                        (count - 1)
                    se = math.sqrt(var / count)
                else:
                    se = float("nan")
                stats[name] = (mean, se, count)
            rows.append((step, stats))
        return rows

    @property
    def diverged_runs(self):
        """indices of the runs flagged as diverged"""
        return [s.run for s in self.series if s.diverged]

    def final_thetas(self):
        """terminal θ of every run"""
        return [s.final_theta for s in self.series]


def _fsum(values):
    """exactly rounded sum; nan when infinities of both signs meet"""
    try:
        return math.fsum(values)
    except (ValueError, OverflowError):
        return float("nan")
