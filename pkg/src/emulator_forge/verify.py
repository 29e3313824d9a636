"""The verify module checks emulators against exact distances.

Contents
--------
* :class:`PathCase`
* :class:`PairRecord`
* :class:`StretchReport`
* :class:`ClaimReport`
* :class:`SizeReport`
* :func:`classify_path`
* :func:`case_bound`
* :func:`case_b_pivot_bound`
* :func:`case_c_pivot_bound`
* :func:`verify_stretch`
* :func:`verify_claims`
* :func:`size_report`
* :func:`scaling_slope`
* :func:`format_stretch_csv`
* :func:`format_summary`
* :func:`format_claims`
* :func:`format_size_csv`
"""
import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from emulator_forge import utils
from emulator_forge.emulators import predicted_exponents, stretch_params
from emulator_forge.graphs import (
    apsp_exact,
    heaviest_two,
    min_bound_shortest_path,
    path_from_parents,
    shortest_path_dag,
    sssp,
)
from emulator_forge.hierarchy import build_hierarchy


logger = logging.getLogger(__name__)

CASES = ('a', 'b', 'c')

#: Above this many vertices random pairs are checked instead of all pairs.
FULL_SWEEP_LIMIT = 300

#: Number of random pairs checked on larger graphs.
PAIR_BUDGET = 10**4


class MismatchError(ValueError):
    """An exception for an emulator that does not fit the graph."""
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class PathCase:
    """Where a path leaves ``E_1``.

    ``first_missing`` and ``last_missing`` are ``(a, b)`` pairs oriented
    along the path, or ``None`` in case ``'a'``.
    """
    label: str
    first_missing: tuple
    last_missing: tuple
    missing_count: int


def classify_path(path, edge_levels, graph):
    """Label a path by the edges it has outside ``E_1``.

    Parameters
    ----------
    path : PathRecord
    edge_levels : sequence of int
        Per-edge levels of `graph`.
    graph : Graph

    Returns
    -------
    PathCase
        ``'a'`` with no missing edge, ``'b'`` with exactly one and ``'c'``
        otherwise.
    """
    missing = [
        (a, b) for a, b in path.edges()
        if edge_levels[graph.edge_index(a, b)] > 1
    ]
    if not missing:
        return PathCase('a', None, None, 0)
    label = 'b' if len(missing) == 1 else 'c'
    return PathCase(label, missing[0], missing[-1], len(missing))


def case_bound(k, case, delta, w1, w2):
    """Return the per-case distance bound for hierarchy parameter `k`.

    Case ``'a'`` keeps the exact distance. Case ``'b'`` adds
    ``2(k-1)W1``. Case ``'c'`` is ``(k-1)d + (k-4)W1 + kW2`` for even ``k``
    and ``(k-2)d + (k-1)(W1 + W2)`` for odd ``k``; ``k = 2`` uses the
    overall bound ``d + 2W1``.

    These are tighter than the overall bound of
    :func:`~emulator_forge.emulators.stretch_params`; exceeding one is a
    diagnostic, not a failure.
    """
    if case == 'a':
        return delta
    if case == 'b':
        return delta + 2 * (k - 1) * w1
    if case != 'c':
        raise ValueError(f'bad case {case!r}')
    if k == 2:
        return delta + 2 * w1
    if k % 2 == 0:
        return (k - 1) * delta + (k - 4) * w1 + k * w2
    return (k - 2) * delta + (k - 1) * (w1 + w2)


def case_b_pivot_bound(i, w_xy):
    """Return ``i * w(x, y)``, the level ``i`` pivot bound of case b."""
    return i * w_xy


def case_c_pivot_bound(i, d_xw, w_xy, w_zw):
    """Return the level `i` pivot bounds of ``x`` and ``w`` in case c.

    Parameters
    ----------
    i : int
        At least 2.
    d_xw : float
        Distance between the outer endpoints of the first and last
        missing edges.
    w_xy, w_zw : float
        Weights of the first and last missing edges.

    Returns
    -------
    tuple of float
        ``(bound for x, bound for w)``; the bound for ``w`` swaps the roles
        of `w_xy` and `w_zw`.

    Examples
    --------
    >>> case_c_pivot_bound(2, 1.0, 0.5, 0.25)
    (1.25, 1.5)
    """
    def side(near, far):
        if i % 2:
            return (i - 1) / 2 * d_xw + (i + 1) / 2 * near + (i - 1) / 2 * far
        if i % 4 == 0:
            return i / 2 * d_xw + (i + 2) / 2 * near + (i - 4) / 2 * far
        return i / 2 * d_xw + (i - 2) / 2 * near + i / 2 * far

    return side(w_xy, w_zw), side(w_zw, w_xy)


@dataclass(frozen=True)
class PairRecord:
    """The verification outcome of one vertex pair."""
    u: int
    v: int
    delta_g: float
    delta_h: float
    case: str
    w1: float
    w2: float
    bound: float
    slack: float
    truncated: bool
    status: str


@dataclass(frozen=True)
class StretchReport:
    """Per-pair records and aggregates of a stretch verification.

    Attributes
    ----------
    records : tuple of PairRecord
    k : int
    lower_violations : int
        Pairs with ``dist_H < dist_G`` beyond tolerance.
    lemma_exceedances : dict
        Per case, pairs above :func:`case_bound`.
    """
    records: tuple
    k: int
    lower_violations: int = 0
    lemma_exceedances: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return len(self.records)

    @property
    def violations(self):
        return sum(r.status == 'violation' for r in self.records)

    @property
    def inconclusive(self):
        return sum(r.status == 'inconclusive' for r in self.records)

    @property
    def case_counts(self):
        counts = Counter(r.case for r in self.records)
        return {case: counts[case] for case in CASES}

    @property
    def max_ratio(self):
        ratios = [
            r.delta_h / r.delta_g for r in self.records if r.delta_g > 0
        ]
        return max(ratios, default=1.0)

    @property
    def passed(self):
        return self.violations == 0 and self.lower_violations == 0


def _pairs_to_check(n, seed, full_limit, pair_budget):
    if n <= full_limit:
        return [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng = utils._rng(seed, utils._Stream.PAIRS)
    draws = rng.integers(0, n, size=(pair_budget, 2))
    chosen = {
        (min(u, v), max(u, v)) for u, v in draws.tolist() if u != v
    }
    return sorted(chosen)


def _edge_levels(graph, emulator, hierarchy):
    if hierarchy is None:
        hierarchy = emulator.hierarchy
    if hierarchy is None:
        hierarchy = build_hierarchy(graph, emulator.meta.hierarchy_config())
    return hierarchy.edge_level.tolist()


def verify_stretch(graph, emulator, params=None, enumeration_cap=10**5,
                   distances=None, hierarchy=None, seed=0,
                   full_limit=FULL_SWEEP_LIMIT, pair_budget=PAIR_BUDGET):
    """Check ``dist_G <= dist_H <= alpha*dist_G + a*W1 + b*W2`` per pair.

    ``W1`` and ``W2`` are taken on the shortest path minimizing the bound.
    A failing pair whose path enumeration hit `enumeration_cap` is
    reported as inconclusive instead of as a violation.

    Parameters
    ----------
    graph : Graph
    emulator : Emulator
    params : StretchParams, optional
        Defaults to the parameters of the emulator's ``k``.
    enumeration_cap : int, optional
    distances : DistanceMatrix, optional
        Precomputed distances of `graph`.
    hierarchy : Hierarchy, optional
        Supplies the edge levels for case labels; rebuilt from the
        emulator's metadata if neither given nor attached.
    seed : int, optional
        Seeds the pair sample on graphs above `full_limit` vertices.
    full_limit, pair_budget : int, optional

    Returns
    -------
    StretchReport

    Raises
    ------
    MismatchError
        If the vertex counts differ.
    """
    if emulator.n != graph.n:
        raise MismatchError(
            f'emulator has {emulator.n} vertices, graph has {graph.n}'
        )
    k = emulator.meta.k
    if params is None:
        params = stretch_params(k)
    if distances is None:
        distances = apsp_exact(graph)
    edge_levels = _edge_levels(graph, emulator, hierarchy)
    spanner = emulator.as_graph()
    pairs = _pairs_to_check(graph.n, seed, full_limit, pair_budget)
    sources = sorted({u for u, _ in pairs})
    rows_h = dict(zip(
        sources, utils._parallel_map(lambda s: sssp(spanner, s), sources)
    ))
    records = []
    lower = 0
    exceed = Counter()
    dag_source, dag = None, None
    for u, v in pairs:
        row_g = distances.row(u)
        dg = float(row_g.dist[v])
        dh = float(rows_h[u].dist[v])
        if math.isinf(dg):
            if not math.isinf(dh):
                lower += 1
            continue
        if not utils._within(dg, dh):
            lower += 1
        if graph.weighted and dag_source != u:
            dag_source, dag = u, shortest_path_dag(graph, row_g)
        best = min_bound_shortest_path(
            graph, u, v, params.a, params.b, enumeration_cap,
            row=row_g, dag=dag,
        )
        w1, w2 = heaviest_two(best.path)
        bound = params.alpha * dg + best.bound_term
        if utils._within(dh, bound):
            status = 'pass'
        elif best.truncated:
            status = 'inconclusive'
        else:
            status = 'violation'
        case = classify_path(best.path, edge_levels, graph).label
        if not utils._within(dh, case_bound(k, case, dg, w1, w2)):
            exceed[case] += 1
        records.append(PairRecord(
            u, v, dg, dh, case, float(w1), float(w2), float(bound),
            float(bound - dh), best.truncated, status,
        ))
    report = StretchReport(
        tuple(records), k, lower, {case: exceed[case] for case in CASES}
    )
    logger.info(
        'verified %d pairs: %d violations, %d inconclusive, max ratio %.4g',
        report.pairs, report.violations, report.inconclusive,
        report.max_ratio,
    )
    return report


@dataclass(frozen=True)
class ClaimReport:
    """Outcome of the pivot-distance checks of :func:`verify_claims`.

    An instance is an edge (case b) or a path (case c) whose premises hold
    at level 2 or above; each level checked on it counts as a check.
    """
    case_b_instances: int
    case_c_instances: int
    checks: int
    counterexamples: tuple

    @property
    def instances(self):
        return self.case_b_instances + self.case_c_instances

    @property
    def passed(self):
        return not self.counterexamples


class _PivotView:
    """Pivot lookups against an exact distance matrix."""
    def __init__(self, hierarchy, matrix):
        self.k = hierarchy.k
        self.pivots = hierarchy.pivots
        self.pivot_dist = hierarchy.pivot_dist
        self.matrix = matrix

    def pivot(self, j, u):
        return int(self.pivots[j][u])

    def outside_ball(self, p, center, j):
        """Return True if vertex ``p`` lies outside the level ``j`` ball."""
        if p < 0 or j >= self.k:
            return False
        d = self.matrix[p, center]
        return not math.isinf(d) and d >= self.pivot_dist[j][center]


def _sample(rng, count, budget):
    if count <= budget:
        return list(range(count))
    return sorted(rng.choice(count, size=budget, replace=False).tolist())


def _connected_pairs(rng, matrix, budget):
    """Draw up to `budget` distinct connected pairs in draw order."""
    n = matrix.shape[0]
    if n < 2:
        return []
    pairs = {}
    for u, v in rng.integers(0, n, size=(4 * budget, 2)).tolist():
        key = (min(u, v), max(u, v))
        if u != v and key not in pairs and not math.isinf(matrix[u, v]):
            pairs[key] = None
            if len(pairs) == budget:
                break
    return list(pairs)


def _check(found, name, value, bound):
    if utils._within(value, bound):
        return
    found.append(f'{name}: distance {value!r} exceeds bound {bound!r}')


def _claims_b(graph, view, edges, found):
    instances = checks = 0
    for e in edges:
        x, y, w = graph.edges[e]
        top = 1
        while top + 1 < view.k:
            j = top
            if not (view.outside_ball(view.pivot(j, x), y, j + 1)
                    and view.outside_ball(view.pivot(j, y), x, j + 1)):
                break
            top += 1
        if top < 2:
            continue
        instances += 1
        for i in range(2, top + 1):
            bound = case_b_pivot_bound(i, w)
            for vertex in (x, y):
                checks += 1
                _check(found, f'case b edge ({x}, {y}) level {i} at {vertex}',
                       float(view.pivot_dist[i][vertex]), bound)
    return instances, checks


def _claims_c(graph, view, distances, edge_levels, pairs, found):
    instances = checks = 0
    for u, v in pairs:
        path = path_from_parents(graph, distances.row(u), v)
        case = classify_path(path, edge_levels, graph)
        if case.label != 'c':
            continue
        x, y = case.first_missing
        z, w = case.last_missing
        p1x, p1w = view.pivot(1, x), view.pivot(1, w)
        if not (view.outside_ball(p1x, w, 2)
                and view.outside_ball(p1w, x, 2)):
            continue
        top = 2
        while top + 1 < view.k:
            j = top - 1
            if not (view.outside_ball(view.pivot(j, x), p1w, j + 2)
                    and view.outside_ball(view.pivot(j, w), p1x, j + 2)):
                break
            top += 1
        instances += 1
        d_xw = float(view.matrix[x, w])
        w_xy, w_zw = graph.weight(x, y), graph.weight(z, w)
        for i in range(2, top + 1):
            bound_x, bound_w = case_c_pivot_bound(i, d_xw, w_xy, w_zw)
            name = f'case c pair ({u}, {v}) level {i}'
            checks += 2
            _check(found, f'{name} at {x}', float(view.pivot_dist[i][x]),
                   bound_x)
            _check(found, f'{name} at {w}', float(view.pivot_dist[i][w]),
                   bound_w)
    return instances, checks


def verify_claims(graph, hierarchy, sample_budget=500, distances=None,
                  seed=0):
    """Check the pivot-distance bounds behind the stretch guarantee.

    For up to `sample_budget` edges ``(x, y)`` outside ``E_1``, finds the
    largest level ``i`` such that at every lower level neither endpoint's
    pivot lies in the other endpoint's ball, and checks
    ``dist(x, p_i(x)), dist(y, p_i(y)) <= i * w(x, y)``. For up to
    `sample_budget` vertex pairs whose shortest path has two or more
    edges outside ``E_1``, checks :func:`case_c_pivot_bound` at every
    level whose premises hold.

    Parameters
    ----------
    graph : Graph
    hierarchy : Hierarchy
    sample_budget : int, optional
    distances : DistanceMatrix, optional
    seed : int, optional

    Returns
    -------
    ClaimReport
        Counterexamples are described in plain text.
    """
    if distances is None:
        distances = apsp_exact(graph)
    view = _PivotView(hierarchy, distances.dist)
    edge_levels = hierarchy.edge_level.tolist()
    found = []
    rng = utils._rng(seed, utils._Stream.CLAIMS)
    heavy = np.flatnonzero(hierarchy.edge_level > 1)
    edges = [int(heavy[i]) for i in _sample(rng, len(heavy), sample_budget)]
    b_instances, b_checks = _claims_b(graph, view, edges, found)
    pairs = _connected_pairs(rng, distances.dist, sample_budget)
    c_instances, c_checks = _claims_c(graph, view, distances, edge_levels,
                                      pairs, found)
    report = ClaimReport(b_instances, c_instances, b_checks + c_checks,
                         tuple(found))
    logger.info('claims: %d instances, %d checks, %d counterexamples',
                report.instances, report.checks, len(found))
    return report


@dataclass(frozen=True)
class SizeReport:
    """Edge counts of an emulator against the predicted size exponents.

    Attributes
    ----------
    n, k : int
    edges : int
    tag_counts : dict
    predicted_exponent : float
        ``1 + 1/k``.
    observed_exponent : float or None
        ``log(edges) / log(n)``, ``None`` when undefined.
    family_exponents : dict
        Predicted exponent per tag, see
        :func:`~emulator_forge.emulators.predicted_exponents`.
    graph_edges : int or None
    """
    n: int
    k: int
    edges: int
    tag_counts: dict
    predicted_exponent: float
    observed_exponent: float
    family_exponents: dict
    graph_edges: int = None


def _log_ratio(count, n):
    if n <= 1 or count <= 0:
        return None
    return math.log(count) / math.log(n)


def size_report(emulator, graph=None):
    """Count emulator edges per tag and compare with the predicted sizes."""
    k = emulator.meta.k
    return SizeReport(
        emulator.n,
        k,
        len(emulator),
        emulator.tag_counts(),
        1 + 1 / k,
        _log_ratio(len(emulator), emulator.n),
        predicted_exponents(k, emulator.meta.betas),
        None if graph is None else graph.m,
    )


def scaling_slope(ns, sizes):
    """Return the least-squares slope of ``log(size)`` against ``log(n)``.

    Returns ``None`` with fewer than two distinct ``n``.

    Examples
    --------
    >>> round(scaling_slope([10, 100, 1000], [100, 10**4, 10**6]), 6)
    2.0
    """
    ns = np.asarray(ns, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if len(np.unique(ns)) < 2:
        return None
    slope, _ = np.polyfit(np.log(ns), np.log(sizes), 1)
    return float(slope)


def _number_text(value):
    if value is None:
        return 'n/a'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_number_text(value) for value in row])
    return buffer.getvalue()


def format_stretch_csv(report):
    """Return the per-pair CSV of a :class:`StretchReport`."""
    header = ['u', 'v', 'delta_g', 'delta_h', 'case', 'w1', 'w2', 'bound',
              'slack', 'truncated']
    rows = (
        (r.u, r.v, r.delta_g, r.delta_h, r.case, r.w1, r.w2, r.bound,
         r.slack, int(r.truncated))
        for r in report.records
    )
    return _write_csv(header, rows)


def format_summary(report):
    """Return the one-line summary of a :class:`StretchReport`."""
    return (
        f'summary: pairs={report.pairs} violations={report.violations} '
        f'max_ratio={report.max_ratio:.6f} '
        f'inconclusive={report.inconclusive} '
        f'lower_violations={report.lower_violations}'
    )


def format_claims(report):
    """Return the one-line summary of a :class:`ClaimReport`."""
    return (
        f'claims: instances={report.instances} checks={report.checks} '
        f'counterexamples={len(report.counterexamples)}'
    )


def format_size_csv(report):
    """Return the per-tag size CSV of a :class:`SizeReport`."""
    header = ['family', 'count', 'predicted_exponent', 'observed_exponent']
    rows = [(
        'total', report.edges, report.predicted_exponent,
        report.observed_exponent,
    )]
    for tag, count in report.tag_counts.items():
        rows.append((
            tag, count, report.family_exponents.get(tag),
            _log_ratio(count, report.n),
        ))
    return _write_csv(header, rows)
