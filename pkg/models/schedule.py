#!/usr/bin/python3
"""
Contains the LambdaSchedule and WeightMatrix classes.

A λ-schedule is a finite sequence λ_1..λ_L in [0, 1]; every λ_j past the
truncation index L is zero. The schedule fixes the weight given to each
n-step return, summarised row by row in the weight matrix Λ.

Schedules built from rationals (ints and Fractions) stay exact: their weight
matrices are computed with Fraction arithmetic. Anything containing a float
falls back to floating point.
"""

from dataclasses import dataclass
from fractions import Fraction
import logging
from numbers import Rational
import re

import numpy as np

logger = logging.getLogger(__name__)

_CALL = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class LambdaSchedule:
    """A truncated λ-schedule; λ_j = 0 for every j > truncation"""
    values: tuple
    truncation: int

    def __post_init__(self):
        """validates the schedule"""
        if len(self.values) == 0:
            raise ValueError("a schedule needs at least one λ value")
        if self.truncation < 1 or self.truncation != len(self.values):
            raise ValueError("truncation {} does not match {} values".format(
                self.truncation, len(self.values)))
        for value in self.values:
            if not 0 <= value <= 1:
                raise ValueError("λ value {} is outside [0, 1]".format(value))

    @property
    def exact(self):
        """True when every λ is rational, so Λ can be built exactly"""
        return all(isinstance(v, Rational) and not isinstance(v, bool)
                   for v in self.values)

    def lam(self, j):
        """returns λ_j, zero past the truncation index"""
        if j < 1:
            raise ValueError("λ indices start at 1")
        if j > self.truncation:
            return Fraction(0) if self.exact else 0.0
        return self.values[j - 1]

    def coefficients(self, gamma):
        """returns c_k = prod_{j<=k} γλ_j for k = 0..L as a float array"""
        coeffs = np.empty(self.truncation + 1)
        coeffs[0] = 1.0
        for k in range(1, self.truncation + 1):
            coeffs[k] = coeffs[k - 1] * gamma * float(self.values[k - 1])
        return coeffs

    def support(self):
        """the λ values with trailing zeros dropped"""
        values = list(self.values)
        while values and values[-1] == 0:
            values.pop()
        return values

    def equivalent(self, other, tol=1e-12):
        """True when both schedules give the same λ_j for every j"""
        mine, theirs = self.support(), other.support()
        if len(mine) != len(theirs):
            return False
        return all(abs(float(a) - float(b)) <= tol
                   for a, b in zip(mine, theirs))

    def __str__(self):
        """plain-text form used in configs and reports"""
        return format_schedule(self)


@dataclass(frozen=True)
class WeightMatrix:
    """Lower-triangular, row-stochastic weights Λ over n-step returns"""
    rows: tuple

    @property
    def size(self):
        """number of rows held"""
        return len(self.rows)

    def row(self, m):
        """row m (1-indexed): weights on the 1..m step returns"""
        return self.rows[m - 1][:m]

    def entry(self, m, k):
        """Λ_{m,k}, 1-indexed"""
        return self.rows[m - 1][k - 1]

    def to_array(self):
        """the matrix as a float ndarray"""
        return np.array([[float(x) for x in row] for row in self.rows])


def _coerce(value):
    """keeps rationals exact and turns everything else into a float"""
    if isinstance(value, bool):
        raise ValueError("λ values must be numbers, not booleans")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return _parse_number(value)
    return float(value)


def make_schedule(values, truncation):
    """validates λ values and wraps them in a LambdaSchedule"""
    values = tuple(_coerce(v) for v in values)
    return LambdaSchedule(values=values, truncation=int(truncation))


def equal_weights(n1, n2):
    """
    Build the EqualWeights(n1, n2) schedule.

    λ_i = 1 for i < n1, 1 - 1/(n2 - i + 1) for n1 <= i <= n2 and 0 after,
    so every n-step return with n1 <= n <= n2 gets weight 1/(n2 - n1 + 1)
    once the episode is at least n2 steps long.

    Args:
        n1 (int): shortest n-step return that is weighted.
        n2 (int): longest n-step return that is weighted; also L.

    Returns:
        LambdaSchedule: exact schedule with truncation n2.

    Raises:
        ValueError: if n1 < 1 or n2 < n1.
    """
    if int(n1) != n1 or int(n2) != n2:
        raise ValueError("equal_weights needs integer bounds")
    if n1 < 1 or n2 < n1:
        raise ValueError("equal_weights needs 1 <= n1 <= n2")
    values = []
    for i in range(1, n2 + 1):
        if i < n1:
            values.append(Fraction(1))
        else:
            values.append(1 - Fraction(1, n2 - i + 1))
    return LambdaSchedule(values=tuple(values), truncation=int(n2))


def n_step(n):
    """the n-step TD schedule"""
    return equal_weights(n, n)


def td_lambda(lam, truncation):
    """constant schedule λ_j = lam for j <= truncation"""
    return make_schedule([lam] * int(truncation), truncation)


def monte_carlo(truncation):
    """all-ones schedule: the full return inside the window"""
    return make_schedule([1] * int(truncation), truncation)


def zero_schedule():
    """the TD(0) schedule"""
    return make_schedule([0], 1)


def weight_matrix(schedule, rows):
    """
    Expand a schedule into the first `rows` rows of Λ.

    Row m holds (1-λ_1), λ_1(1-λ_2), ..., λ_1..λ_{m-2}(1-λ_{m-1}) and
    finally λ_1..λ_{m-1}. Rows past L + 1 keep the frozen pattern because
    λ_j = 0 for j > L.
    """
    if rows < 1:
        raise ValueError("weight_matrix needs at least one row")
    one = Fraction(1) if schedule.exact else 1.0
    zero = one - one
    matrix = []
    for m in range(1, rows + 1):
        row = []
        prefix = one
        for k in range(1, m):
            lam = schedule.lam(k)
            row.append(prefix * (1 - lam))
            prefix = prefix * lam
        row.append(prefix)
        row.extend([zero] * (rows - m))
        matrix.append(tuple(row))
    return WeightMatrix(rows=tuple(matrix))


def n_step_weights(schedule, m):
    """float weights of the 1..m step returns for an m-step episode"""
    return np.array([float(x) for x in weight_matrix(schedule, m).row(m)])


def schedule_prefix_product(schedule, k, gamma):
    """returns prod_{j=1}^{k} γλ_j (1 for k = 0)"""
    if k < 0:
        raise ValueError("k must be non-negative")
    product = 1.0
    for j in range(1, k + 1):
        product *= gamma * float(schedule.lam(j))
        if product == 0.0:
            break
    return product


def _parse_number(text):
    """parses '1', '0.5' or '2/3'; integers and ratios stay exact"""
    text = text.strip()
    try:
        if re.fullmatch(r"[+-]?\d+(/\d+)?", text):
            return Fraction(text)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError("not a number: {!r}".format(text))


_named = {
    "equal_weights": (equal_weights, 2),
    "n_step": (n_step, 1),
    "td_lambda": (td_lambda, 2),
    "monte_carlo": (monte_carlo, 1),
    "zero": (zero_schedule, 0),
}


def parse_schedule(spec):
    """
    Read a schedule from its config form.

    Accepts a list of numbers (`[1, 1, 2/3, 0.5]` or an actual sequence) or
    a named form such as `equal_weights(3,5)`, `n_step(4)`,
    `td_lambda(0.9, 10)`, `monte_carlo(5)` and `zero()`.
    """
    if isinstance(spec, LambdaSchedule):
        return spec
    if isinstance(spec, (list, tuple)):
        return make_schedule(spec, len(spec))
    text = str(spec).strip()
    if text.startswith("[") and text.endswith("]"):
        items = [item for item in text[1:-1].split(",") if item.strip()]
        return make_schedule(items, len(items))
    match = _CALL.match(text)
    if match is None or match.group(1) not in _named:
        raise ValueError("unknown schedule: {!r}".format(text))
    builder, arity = _named[match.group(1)]
    args = [_parse_number(a) for a in match.group(2).split(",") if a.strip()]
    if len(args) != arity:
        raise ValueError("{} takes {} argument(s)".format(
            match.group(1), arity))
    for index, arg in enumerate(args):
        if builder is td_lambda and index == 0:
            continue
        if arg != int(arg):
            raise ValueError("{} needs integer arguments".format(
                match.group(1)))
        args[index] = int(arg)
    logger.debug("parsed schedule %s", text)
    return builder(*args)


def format_schedule(schedule):
    """renders a schedule as `[v1, v2, ...]` (fractions kept as a/b)"""
    parts = []
    for value in schedule.values:
        parts.append(str(value) if isinstance(value, Fraction)
                     else repr(float(value)))
    return "[" + ", ".join(parts) + "]"
