"""The utils module contains shared functions and constants.

They are to be used internally.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from enum import IntEnum

import numpy as np


logger = logging.getLogger(__name__)


INF = math.inf

#: Relative tolerance used when checking stretch and lower bounds.
VERIFY_TOL = 1e-9

#: Relative tolerance used for internal consistency (ties, path totals).
INTERNAL_TOL = 1e-12

#: Name of the bit generator every random decision is drawn from.
RNG_ALGORITHM = 'Philox'

THREADS_ENV = 'EMULATOR_FORGE_THREADS'


class _Stream(IntEnum):
    """Stream identifiers mixed into the seed of every generator."""
    HIERARCHY = 1
    GENERATOR = 2
    PAIRS = 3
    CLAIMS = 4


def _rng(seed, stream, counter=0):
    """Return a generator for ``(seed, stream, counter)``.

    The same triple always reproduces the same stream of draws, so that
    resampling attempts and hierarchy levels never share state.
    """
    sequence = np.random.SeedSequence([int(seed), int(stream), int(counter)])
    return np.random.Generator(np.random.Philox(sequence))


def worker_count():
    """Return the worker cap taken from ``EMULATOR_FORGE_THREADS``.

    Returns
    -------
    int
        The configured number of worker threads, ``1`` when the variable
        is unset or invalid.
    """
    value = os.environ.get(THREADS_ENV, '')
    try:
        workers = int(value)
    except ValueError:
        if value:
            logger.warning('ignoring %s=%r', THREADS_ENV, value)
        return 1
    return max(workers, 1)


def _parallel_map(func, items):
    """Map ``func`` over ``items`` preserving order.

    Runs on a thread pool when more than one worker is configured.
    """
    workers = worker_count()
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _within(value, bound, rel=VERIFY_TOL):
    """Return True if ``value <= bound`` up to a relative tolerance."""
    if value <= bound:
        return True
    if math.isinf(bound):
        return False
    return value - bound <= rel * abs(bound)


def _close(a, b, rel=INTERNAL_TOL):
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= rel * max(abs(a), abs(b), 1.0)


def _format_weight(weight, weighted=True):
    """Return the decimal text of a weight as written to files."""
    if not weighted:
        return '1'
    return repr(float(weight))
