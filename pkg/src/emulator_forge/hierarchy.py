"""The hierarchy module samples nested hitting sets and their pivots.

A hierarchy with parameter ``k`` holds the sets
``V = S_0 ⊇ S_1 ⊇ ... ⊇ S_{k-1}`` (with ``S_k`` empty), the pivot
``p_i(u)`` of every vertex in every level, and for every edge the
smallest ``i`` such that the edge lies in ``E_i``.

Contents
--------
* :class:`HierarchyConfig`
* :class:`Hierarchy`
* :class:`BunchEdges`
* :func:`sample_hierarchy`
* :func:`compute_pivots`
* :func:`compute_edge_levels`
* :func:`build_hierarchy`
* :func:`build_D`
* :func:`build_bunch_edges`
* :func:`format_hierarchy`
"""
import logging
from dataclasses import dataclass

import numpy as np

from emulator_forge import utils
from emulator_forge.graphs import apsp_exact, multi_source_sssp, sssp
from emulator_forge.utils import INF


logger = logging.getLogger(__name__)


class HierarchyParameterError(ValueError):
    """An exception for an invalid hierarchy configuration."""
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class HierarchyConfig:
    """Parameters for sampling a hierarchy.

    Attributes
    ----------
    k : int
        At least 2. Levels ``1`` to ``k - 1`` are sampled.
    betas : tuple of float
        ``k - 1`` exponents; a member of ``S_{i-1}`` joins ``S_i`` with
        probability ``n ** -betas[i - 1]``. An exponent of ``0`` makes the
        level certain.
    seed : int
    """
    k: int
    betas: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'betas', tuple(float(b) for b in self.betas))
        self.validate()

    @classmethod
    def default(cls, k, seed=0):
        """Return the config with every exponent equal to ``1 / k``."""
        k = int(k)
        return cls(k, (1 / k,) * max(k - 1, 0), seed)

    def validate(self):
        """Raise :class:`HierarchyParameterError` for bad parameters."""
        if self.k < 2:
            raise HierarchyParameterError(
                f'bad k {self.k}; must be at least 2'
            )
        if len(self.betas) != self.k - 1:
            raise HierarchyParameterError(
                f'k={self.k} needs {self.k - 1} exponents, '
                f'got {len(self.betas)}'
            )
        for beta in self.betas:
            if not 0 <= beta <= 1:
                raise HierarchyParameterError(
                    f'bad exponent {beta}; must be in [0, 1]'
                )

    def sampling_probabilities(self, n):
        """Return ``q_i = n ** -beta_i`` for every sampled level."""
        return tuple(float(max(n, 1)) ** -beta for beta in self.betas)


def sample_hierarchy(graph, config):
    """Sample the level of every vertex.

    One uniform draw is taken per ``(vertex, level)`` in ascending vertex
    order, then level order, from the hierarchy stream of ``config.seed``.
    A vertex's level is the number of consecutive levels it is drawn into.

    Parameters
    ----------
    graph : Graph
    config : HierarchyConfig

    Returns
    -------
    numpy.ndarray
        ``level_of[u]``, between ``0`` and ``k - 1``.
    """
    n = graph.n
    rng = utils._rng(config.seed, utils._Stream.HIERARCHY)
    draws = rng.random((n, config.k - 1))
    probabilities = np.array(config.sampling_probabilities(n))
    inside = np.cumprod(draws < probabilities, axis=1)
    return inside.sum(axis=1).astype(np.int64)


def compute_pivots(graph, level_of, k):
    """Find the pivot of every vertex in every level.

    Returns
    -------
    tuple of numpy.ndarray
        ``(pivots, pivot_dist)`` with shape ``(k + 1, n)``. Row ``0`` is the
        vertex itself and row ``k`` is the empty top level. Where a level
        is empty the pivot is ``-1`` and the distance ``inf``.
    """
    n = graph.n
    pivots = np.full((k + 1, n), -1, dtype=np.int64)
    pivot_dist = np.full((k + 1, n), INF)
    pivots[0] = np.arange(n)
    pivot_dist[0] = 0.0
    for i in range(1, k):
        sources = np.flatnonzero(level_of >= i)
        pivots[i], pivot_dist[i] = multi_source_sssp(
            graph, sources, allow_empty=True
        )
        logger.debug('level %d: %d members', i, len(sources))
    return pivots, pivot_dist


def compute_edge_levels(graph, pivot_dist, k):
    """Return the smallest ``i`` with each edge in ``E_i``.

    An edge ``(u, v, w)`` is in ``E_i`` when ``w`` is below the level ``i``
    pivot distance of either endpoint. Edges in no ``E_i`` get level
    ``k``.
    """
    levels = np.full(graph.m, k, dtype=np.int64)
    if not graph.m:
        return levels
    us, vs, ws = (np.array(column) for column in zip(*graph.edges))
    us = us.astype(np.int64)
    vs = vs.astype(np.int64)
    for i in range(k - 1, 0, -1):
        inside = (ws < pivot_dist[i][us]) | (ws < pivot_dist[i][vs])
        levels[inside] = i
    return levels


class Hierarchy:
    """A sampled hierarchy with pivots and edge levels.

    Use :func:`build_hierarchy` to make one.

    Attributes
    ----------
    config : HierarchyConfig
    k : int
    n : int
    level_of : numpy.ndarray
    pivots, pivot_dist : numpy.ndarray
        Shape ``(k + 1, n)``, see :func:`compute_pivots`.
    edge_level : numpy.ndarray
    """
    def __init__(self, config, level_of, pivots, pivot_dist, edge_level):
        self.config = config
        self.k = config.k
        self.n = len(level_of)
        self.level_of = level_of
        self.pivots = pivots
        self.pivot_dist = pivot_dist
        self.edge_level = edge_level
        for array in (level_of, pivots, pivot_dist, edge_level):
            array.setflags(write=False)

    def __repr__(self):
        return (
            f'<Hierarchy k={self.k} n={self.n} '
            f'sizes={list(self.level_sizes())}>'
        )

    def __eq__(self, other):
        if isinstance(other, Hierarchy):
            return (
                self.config == other.config
                and np.array_equal(self.level_of, other.level_of)
                and np.array_equal(self.pivots, other.pivots)
                and np.array_equal(self.pivot_dist, other.pivot_dist)
                and np.array_equal(self.edge_level, other.edge_level)
            )
        return NotImplemented

    def members(self, i):
        """Return the members of ``S_i`` in ascending order."""
        if i >= self.k:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.level_of >= i)

    def level_sizes(self):
        """Return ``|S_0|`` to ``|S_{k-1}|``."""
        return tuple(len(self.members(i)) for i in range(self.k))

    def edge_level_counts(self):
        """Return ``|E_1|`` to ``|E_k|``."""
        return tuple(
            int(np.count_nonzero(self.edge_level <= i))
            for i in range(1, self.k + 1)
        )

    def ball(self, u, i, j, dist):
        """Return ``Ball(u, S_i, S_j)`` as sorted vertex ids.

        Parameters
        ----------
        u : int
        i, j : int
            Levels with ``i < j``.
        dist : DistanceMatrix or numpy.ndarray
            Exact distances.
        """
        matrix = getattr(dist, 'dist', dist)
        members = self.members(i)
        radius = self.pivot_dist[min(j, self.k)][u]
        return members[matrix[members, u] < radius]

    def check_nesting(self):
        """Return True if sets, pivot distances and edge sets are nested."""
        sizes = self.level_sizes()
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            return False
        with np.errstate(invalid='ignore'):
            steps = np.diff(self.pivot_dist, axis=0)
        if np.any(steps < 0):
            return False
        levels = self.edge_level
        return bool(np.all((levels >= 1) & (levels <= self.k)))


def build_hierarchy(graph, config):
    """Sample levels, find pivots and assign edge levels.

    Parameters
    ----------
    graph : Graph
    config : HierarchyConfig

    Returns
    -------
    Hierarchy

    Examples
    --------
    >>> from emulator_forge.graphs import Graph
    >>> graph = Graph(3, [(0, 1, 1), (1, 2, 1)], weighted=False)
    >>> hierarchy = build_hierarchy(graph, HierarchyConfig(2, (0,)))
    >>> hierarchy.level_sizes()
    (3, 3)
    """
    level_of = sample_hierarchy(graph, config)
    pivots, pivot_dist = compute_pivots(graph, level_of, config.k)
    edge_level = compute_edge_levels(graph, pivot_dist, config.k)
    hierarchy = Hierarchy(config, level_of, pivots, pivot_dist, edge_level)
    logger.debug('hierarchy sizes %s, edge levels %s',
                 hierarchy.level_sizes(), hierarchy.edge_level_counts())
    return hierarchy


def build_D(hierarchy):
    """Return the pivot edges ``(u, p_i(u), dist)`` for ``i`` in 1..k-1.

    Self pivots are dropped and repeated pairs keep the smaller distance.
    Edges are returned sorted with ``u < v``.
    """
    best = {}
    for i in range(1, hierarchy.k):
        for u, p in enumerate(hierarchy.pivots[i].tolist()):
            if p < 0 or p == u:
                continue
            d = float(hierarchy.pivot_dist[i][u])
            pair = (min(u, p), max(u, p))
            if d < best.get(pair, INF):
                best[pair] = d
    return [(u, v, d) for (u, v), d in sorted(best.items())]


@dataclass(frozen=True)
class BunchEdges:
    """Ball edges ``(u, s, dist)`` of the two bunch families.

    ``b1_edges`` link every vertex to ``Ball(u, S_i, S_{i+1})`` and
    ``b2_edges`` link members of ``S_1`` to ``Ball(u, S_i, S_{i+2})``.
    """
    b1_edges: tuple
    b2_edges: tuple


def _collect(found, u, s, d):
    key = (u, s)
    if key not in found or d < found[key]:
        found[key] = d


def _exact_bunches(hierarchy, matrix, offset, owners):
    found = {}
    for i in range(0, hierarchy.k - offset):
        radius = hierarchy.pivot_dist[i + offset]
        members = hierarchy.members(i)
        if not len(members):
            continue
        block = matrix[members].T
        inside = block < radius[:, None]
        for u, col in zip(*np.nonzero(inside)):
            s = int(members[col])
            if u != s and owners[u]:
                _collect(found, int(u), s, float(block[u, col]))
    return found


def _restricted_rows(graph, hierarchy, offset, levels=None):
    """Yield ``(i, s, row)`` for SSSP from ``s`` in ``S_i`` over E_{i+offset}.

    Levels run over ``0..k-1-offset`` unless given.
    """
    if levels is None:
        levels = range(0, hierarchy.k - offset)
    edge_level = hierarchy.edge_level.tolist()
    for i in levels:
        cap = min(i + offset, hierarchy.k)
        members = hierarchy.members(i).tolist()
        rows = utils._parallel_map(
            lambda s: sssp(graph, s, level_cap=cap, edge_levels=edge_level),
            members,
        )
        logger.debug('%d sweeps from level %d over E_%d', len(rows), i, cap)
        for s, row in zip(members, rows):
            yield i, s, row


def _restricted_bunches(graph, hierarchy, offset, owners):
    found = {}
    for i, s, row in _restricted_rows(graph, hierarchy, offset):
        inside = row.dist < hierarchy.pivot_dist[i + offset]
        for u in np.flatnonzero(inside & owners).tolist():
            if u != s:
                _collect(found, u, s, float(row.dist[u]))
    return found


def _as_edges(found):
    return tuple((u, s, d) for (u, s), d in sorted(found.items()))


def build_bunch_edges(graph, hierarchy, mode='exact', distances=None):
    """Materialize the bunch edge families ``B_1(V)`` and ``B_2(S_1)``.

    For ``i`` in ``0..k-2`` and ``s`` in ``S_i``, ``B_1`` links every ``u``
    with ``dist(u, s) < dist(u, p_{i+1}(u))``. For ``i`` in ``0..k-3``,
    ``B_2`` links every ``u`` in ``S_1`` with
    ``dist(u, s) < dist(u, p_{i+2}(u))``.

    Parameters
    ----------
    graph : Graph
    hierarchy : Hierarchy
    mode : {'exact', 'restricted_sssp'}, optional
        ``'exact'`` reads all-pairs distances; ``'restricted_sssp'`` runs
        one SSSP from every ``s`` over ``E_{i+1}`` (resp. ``E_{i+2}``),
        which is exact for every ball member.
    distances : DistanceMatrix, optional
        Reused in exact mode instead of recomputing.

    Returns
    -------
    BunchEdges
        Both lists sorted by ``(u, s)`` with exact distances.
    """
    owners_b1 = np.ones(hierarchy.n, dtype=bool)
    owners_b2 = hierarchy.level_of >= 1
    if mode == 'exact':
        if distances is None:
            distances = apsp_exact(graph)
        matrix = distances.dist
        b1 = _exact_bunches(hierarchy, matrix, 1, owners_b1)
        b2 = _exact_bunches(hierarchy, matrix, 2, owners_b2)
    elif mode == 'restricted_sssp':
        b1 = _restricted_bunches(graph, hierarchy, 1, owners_b1)
        b2 = _restricted_bunches(graph, hierarchy, 2, owners_b2)
    else:
        raise HierarchyParameterError(f'bad bunch mode {mode!r}')
    logger.debug('bunch edges: b1=%d b2=%d', len(b1), len(b2))
    return BunchEdges(_as_edges(b1), _as_edges(b2))


def format_hierarchy(hierarchy):
    """Return the diagnostic text dump of a hierarchy."""
    lines = [f'v {u} {level}' for u, level in
             enumerate(hierarchy.level_of.tolist())]
    for i in range(1, hierarchy.k):
        for u in range(hierarchy.n):
            p = int(hierarchy.pivots[i][u])
            d = utils._format_weight(hierarchy.pivot_dist[i][u])
            lines.append(f'pivot {i} {u} {p} {d}')
    for e, level in enumerate(hierarchy.edge_level.tolist()):
        lines.append(f'elevel {e} {level}')
    return '\n'.join(lines) + '\n'
