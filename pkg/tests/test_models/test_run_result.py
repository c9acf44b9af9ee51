#!/usr/bin/python3
"""Test RunSeries and RunResult for expected behavior and documentation"""
import inspect
import math
from models import run_result
from models.run_result import RunResult, RunSeries
import numpy as np
import pep8
import unittest


def series(run, points, diverged=False):
    """a one-metric series from (step, value) pairs"""
    result = RunSeries(run=run, seed=run, metrics=("rmse",))
    for step, value in points:
        result.record(step, np.full(2, value), {"rmse": value})
    result.diverged = diverged
    return result


class TestRunResultDocs(unittest.TestCase):
    """Tests to check the documentation and style of run_result"""

    def test_pep8_conformance(self):
        """Test that run_result.py and its tests conform to PEP8."""
        pep8s = pep8.StyleGuide(quiet=True)
        result = pep8s.check_files(['models/run_result.py',
                                    'tests/test_models/test_run_result.py'])
        self.assertEqual(result.total_errors, 0,
                         "Found code style errors (and warnings).")

    def test_docstrings(self):
        """Test for the module, class and method docstrings"""
        self.assertTrue(len(run_result.__doc__) >= 1)
        for klass in (RunSeries, RunResult):
            self.assertTrue(len(klass.__doc__) >= 1)
            for name, func in inspect.getmembers(klass, inspect.isfunction):
                if name.startswith("__"):
                    continue
                with self.subTest(function=name):
                    self.assertIsNot(func.__doc__, None)


class TestRunSeries(unittest.TestCase):
    """Test RunSeries"""

    def test_record(self):
        """points are appended with copies of θ"""
        theta = np.array([1.0, 2.0])
        one = RunSeries(run=0, seed=5, metrics=("rmse",))
        one.record(0, theta, {"rmse": 0.5, "ignored": 1.0})
        theta[0] = 9.0
        self.assertEqual(one.steps, [0])
        self.assertEqual(one.values, {"rmse": [0.5]})
        np.testing.assert_array_equal(one.final_theta, [1.0, 2.0])

    def test_value_at(self):
        """missing steps give None"""
        one = series(0, [(0, 1.0), (10, 0.5)])
        self.assertEqual(one.value_at("rmse", 10), 0.5)
        self.assertIsNone(one.value_at("rmse", 20))


class TestRunResult(unittest.TestCase):
    """Test merging and aggregation"""

    def test_merge_orders_runs(self):
        """merged series are sorted by run index"""
        merged = RunResult.merge([
            RunResult(("rmse",), [series(2, [(0, 1.0)])]),
            RunResult(("rmse",), [series(0, [(0, 3.0)])]),
            RunResult(("rmse",), [series(1, [(0, 2.0)])])])
        self.assertEqual([s.run for s in merged.series], [0, 1, 2])
        with self.assertRaises(ValueError):
            RunResult.merge([])
        with self.assertRaises(ValueError):
            RunResult.merge([merged, RunResult(("rmspbe",), [])])

    def test_aggregate(self):
        """mean and standard error per step"""
        result = RunResult(("rmse",), [series(0, [(0, 1.0), (5, 2.0)]),
                                       series(1, [(0, 3.0), (5, 4.0)])])
        rows = result.aggregate()
        self.assertEqual([step for step, _ in rows], [0, 5])
        mean, se, count = rows[0][1]["rmse"]
        self.assertEqual(mean, 2.0)
        self.assertAlmostEqual(se, 1.0)
        self.assertEqual(count, 2)

    def test_single_run_se_is_nan(self):
        """one value has no standard error"""
        result = RunResult(("rmse",), [series(0, [(0, 1.0)])])
        mean, se, count = result.aggregate()[0][1]["rmse"]
        self.assertEqual((mean, count), (1.0, 1))
        self.assertTrue(math.isnan(se))

    def test_diverged_runs_drop_out(self):
        """a run stopped early only counts where it has points"""
        result = RunResult(("rmse",), [
            series(0, [(0, 1.0), (5, 1.0), (10, 1.0)]),
            series(1, [(0, 2.0), (3, 1e9)], diverged=True),
            series(2, [(0, 3.0), (5, 2.0), (10, 0.0)])])
        self.assertEqual(result.steps, [0, 3, 5, 10])
        self.assertEqual(result.diverged_runs, [1])
        rows = dict(result.aggregate())
        self.assertEqual(rows[0]["rmse"][2], 3)
        self.assertEqual(rows[3]["rmse"][2], 1)
        self.assertEqual(rows[10]["rmse"][:1], (0.5,))
        self.assertEqual(len(result.final_thetas()), 3)

    def test_order_independent(self):
        """fsum makes the mean independent of run order"""
        values = [1e16, 1.0, -1e16, 3.0]
        forward = RunResult(("rmse",), [series(i, [(0, v)])
                                        for i, v in enumerate(values)])
        backward = RunResult(("rmse",), [series(i, [(0, v)]) for i, v in
                                         enumerate(reversed(values))])
        self.assertEqual(forward.aggregate()[0][1]["rmse"][0],
                         backward.aggregate()[0][1]["rmse"][0])
        self.assertEqual(forward.aggregate()[0][1]["rmse"][0], 1.0)

    def test_infinite_values(self):
        """infinities of both signs give nan"""
        result = RunResult(("rmse",), [series(0, [(0, math.inf)]),
                                       series(1, [(0, -math.inf)])])
        self.assertTrue(math.isnan(result.aggregate()[0][1]["rmse"][0]))
