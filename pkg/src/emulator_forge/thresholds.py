"""The thresholds module compares unit-weight stretch against Thorup-Zwick.

A hierarchy of depth ``2**(k+1) - 1`` gives an emulator the size of the
Thorup-Zwick emulator with parameter ``k`` and unit-weight stretch
``(2**(k+1) - 3) * d + 2**(k+2) - 4``, while Thorup-Zwick guarantees
``d + (6**k - 1) * d**(1 - 1/k)``. The first bound is the smaller one
exactly when ``f_k(d**(1/k)) < 0`` for the polynomial

``f_k(x) = (2**(k+1) - 4) * x**k - (6**k - 1) * x**(k-1) + 2**(k+2) - 4``

which has a single root ``r_k`` above 1. Distances up to
``floor(r_k**k)`` favor the hierarchy.

Contents
--------
* :class:`ThresholdResult`
* :func:`f_k`
* :func:`f_k_derivative`
* :func:`root_rk`
* :func:`compare_bounds`
* :func:`threshold_table`
* :func:`winner_sweep`
* :func:`format_threshold_csv`
* :func:`format_sweep_csv`
"""
import csv
import io
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from emulator_forge.emulators import _check_k


logger = logging.getLogger(__name__)

#: Largest ``k`` served by :func:`threshold_table`.
K_MAX = 12

_MAX_ROUNDS = 8


class PrecisionCapError(ValueError):
    """An exception for a ``k`` beyond the supported range.

    Parameters
    ----------
    k_max : int
        The requested parameter.
    """
    def __init__(self, k_max):
        self.k_max = k_max

    def __str__(self):
        return f'k={self.k_max} is beyond the supported maximum of {K_MAX}'


def _coefficients(k):
    return 2 ** (k + 1) - 4, 6 ** k - 1, 2 ** (k + 2) - 4


def f_k(x, k):
    """Evaluate ``f_k`` at `x`.

    Integer and :class:`~fractions.Fraction` arguments are evaluated
    exactly.

    Examples
    --------
    >>> f_k(1, 2)
    -19
    >>> f_k(Fraction(35, 4), 2)
    Fraction(12, 1)
    """
    k = _check_k(k)
    lead, middle, constant = _coefficients(k)
    return lead * x ** k - middle * x ** (k - 1) + constant


def f_k_derivative(x, k):
    """Evaluate the derivative of ``f_k`` at `x`."""
    k = _check_k(k)
    lead, middle, _ = _coefficients(k)
    return x ** (k - 2) * (k * lead * x - (k - 1) * middle)


def x_min(k):
    """Return the minimum point of ``f_k`` as an exact fraction."""
    k = _check_k(k)
    lead, middle, _ = _coefficients(k)
    return Fraction((k - 1) * middle, k * lead)


def x_hat(k):
    """Return ``(6**k - 1) / (2**(k+1) - 4)``, where ``f_k`` is positive."""
    k = _check_k(k)
    lead, middle, _ = _coefficients(k)
    return Fraction(middle, lead)


@dataclass(frozen=True)
class ThresholdResult:
    """The root of ``f_k`` and the distance thresholds it implies.

    Attributes
    ----------
    k : int
    x_min, x_hat : fractions.Fraction
        Bracket of the root.
    root : fractions.Fraction
        Midpoint of the final bisection bracket, strictly between `x_min`
        and `x_hat`.
    threshold : int
        ``floor(root ** k)``, exact.
    theorem_threshold : int
        ``floor(x_hat) ** k``.
    """
    k: int
    x_min: Fraction
    x_hat: Fraction
    root: Fraction
    threshold: int
    theorem_threshold: int


def _mpf(value):
    return mpmath.mpf(value.numerator) / value.denominator


def _fraction(value):
    man, exp = value.man_exp
    return Fraction(man) * Fraction(2) ** exp


def _digits(k):
    return int(k * math.log10(float(x_hat(k)))) + 2


def _decimal(value, k):
    digits = _digits(k) + 4
    with mpmath.workdps(digits + 10):
        return mpmath.nstr(_mpf(value), digits)


def root_rk(k, tol=1e-12):
    """Find the root of ``f_k`` by bisection on ``(x_min, x_hat)``.

    Bisection runs in extended precision until the bracket is narrower
    than `tol` relative to the root and both ends give the same
    ``floor(x ** k)``, raising the working precision when needed.

    Parameters
    ----------
    k : int
        At least 2.
    tol : float, optional

    Returns
    -------
    ThresholdResult

    Raises
    ------
    StretchParameterError
        If `k` is below 2.

    Examples
    --------
    >>> root_rk(2).threshold
    70
    """
    k = _check_k(k)
    low_frac, high_frac = x_min(k), x_hat(k)
    dps = _digits(k) + 20
    with mpmath.workdps(dps):
        low, high = _mpf(low_frac), _mpf(high_frac)
    for _ in range(_MAX_ROUNDS):
        with mpmath.workdps(dps):
            low, high = mpmath.mpf(low), mpmath.mpf(high)
            while True:
                floors_agree = (
                    mpmath.floor(low ** k) == mpmath.floor(high ** k)
                )
                if high - low <= tol * low and floors_agree:
                    threshold = int(mpmath.floor(low ** k))
                    root = (_fraction(low) + _fraction(high)) / 2
                    return ThresholdResult(
                        k, low_frac, high_frac, root, threshold,
                        (high_frac.numerator // high_frac.denominator) ** k,
                    )
                middle = (low + high) / 2
                if middle in (low, high):
                    break
                if f_k(middle, k) < 0:
                    low = middle
                else:
                    high = middle
        logger.debug('k=%d: raising precision to %d digits', k, 2 * dps)
        dps *= 2
    raise PrecisionCapError(k)


def compare_bounds(delta, k):
    """Compare both unit-weight stretch bounds at distance `delta`.

    Parameters
    ----------
    delta : int
        At least 1.
    k : int
        At least 2.

    Returns
    -------
    tuple
        ``(ours, tz, winner)`` where `winner` is ``'ours'``, ``'tz'`` or
        ``'tie'`` for the strictly smaller bound.

    Examples
    --------
    >>> compare_bounds(70, 2)[::2]
    (362, 'ours')
    >>> compare_bounds(71, 2)[::2]
    (367, 'tz')
    """
    k = _check_k(k)
    if isinstance(delta, bool) or int(delta) != delta or delta < 1:
        raise ValueError(f'bad distance {delta}; must be a positive integer')
    delta = int(delta)
    lead, middle, constant = _coefficients(k)
    ours = (lead + 1) * delta + constant
    digits = len(str(ours)) + 30
    with mpmath.workdps(digits):
        tz = delta + middle * mpmath.mpf(delta) ** (1 - mpmath.mpf(1) / k)
        if ours < tz:
            winner = 'ours'
        elif ours > tz:
            winner = 'tz'
        else:
            winner = 'tie'
        return ours, float(tz), winner


def threshold_table(k_max):
    """Return :func:`root_rk` results for ``k = 2..k_max``.

    Raises
    ------
    StretchParameterError
        If `k_max` is below 2.
    PrecisionCapError
        If `k_max` exceeds :data:`K_MAX`.
    """
    k_max = _check_k(k_max)
    if k_max > K_MAX:
        raise PrecisionCapError(k_max)
    return [root_rk(k) for k in range(2, k_max + 1)]


def winner_sweep(k, deltas):
    """Return ``(delta, ours, tz, winner)`` rows for every delta."""
    return [(delta,) + compare_bounds(delta, k) for delta in deltas]


def _csv(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def format_threshold_csv(rows):
    """Return the CSV of a threshold table.

    Fractions are written in decimal with enough digits to separate the
    root from `x_hat`.
    """
    return _csv(
        ['k', 'x_min', 'x_hat', 'root', 'threshold', 'theorem_threshold'],
        (
            (r.k, _decimal(r.x_min, r.k), _decimal(r.x_hat, r.k),
             _decimal(r.root, r.k), r.threshold, r.theorem_threshold)
            for r in rows
        ),
    )


def format_sweep_csv(k, rows):
    """Return the CSV of a :func:`winner_sweep`."""
    return _csv(
        ['k', 'delta', 'ours', 'tz', 'winner'],
        ((k, delta, ours, repr(tz), winner)
         for delta, ours, tz, winner in rows),
    )
