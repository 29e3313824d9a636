"""The emulators module builds sparse emulators of weighted graphs.

An emulator ``H`` is a weighted graph on the vertices of ``G`` whose
distances satisfy
``dist_G(u, v) <= dist_H(u, v) <= alpha * dist_G(u, v) + a * W1 + b * W2``
where ``W1`` and ``W2`` are the two heaviest edges of a shortest path.
Its edges come from five families: pivot edges (``D``), light edges
(``E1``), products of hierarchy levels (``P<i>``) and the two bunch
families (``B1``, ``B2``).

Contents
--------
* :class:`Family`
* :class:`Tag`
* :class:`BuildMeta`
* :class:`Emulator`
* :class:`StretchParams`
* :func:`stretch_params`
* :func:`unweighted_params`
* :func:`matched_depth`
* :func:`predicted_exponents`
* :func:`assemble_products`
* :func:`build_alg1`
* :func:`build_alg2`
* :func:`build_general`
* :func:`build_fast`
* :func:`format_emulator`
* :func:`parse_emulator`
* :func:`read_emulator`
* :func:`write_emulator`
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from emulator_forge import utils
from emulator_forge.graphs import FormatError, Graph, apsp_exact, _number
from emulator_forge.hierarchy import (
    HierarchyConfig,
    build_bunch_edges,
    build_D,
    build_hierarchy,
    _restricted_rows,
)
from emulator_forge.utils import INF


logger = logging.getLogger(__name__)

MODES = ('alg1', 'alg2', 'general', 'fast', 'original')


class StretchParameterError(ValueError):
    """An exception for a hierarchy parameter ``k`` below 2.

    Parameters
    ----------
    k : int
        The invalid parameter.
    """
    def __init__(self, k):
        self.k = k

    def __str__(self):
        return f'bad k {self.k}; must be an integer of at least 2'


def _check_k(k):
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise StretchParameterError(k)
    return int(k)


class Family(Enum):
    """Edge families in the order used to pick a provenance tag."""
    D = 'D'
    E1 = 'E1'
    PRODUCT = 'P'
    B1 = 'B1'
    B2 = 'B2'
    ORIGINAL = 'E'


_FAMILY_ORDER = list(Family)


@dataclass(frozen=True)
class Tag:
    """The provenance of an emulator edge.

    ``level`` is the product index ``i`` for :attr:`Family.PRODUCT` and
    ``0`` otherwise. Printed as ``D``, ``E1``, ``P<i>``, ``B1``, ``B2`` or
    ``E``.
    """
    family: Family
    level: int = 0

    def __str__(self):
        if self.family is Family.PRODUCT:
            return f'P{self.level}'
        return self.family.value

    @property
    def rank(self):
        return (_FAMILY_ORDER.index(self.family), self.level)

    @classmethod
    def parse(cls, text):
        """Return the tag printed as `text`.

        Raises
        ------
        ValueError
            If `text` is not a tag.
        """
        if text.startswith('P') and text[1:].isdigit():
            return cls(Family.PRODUCT, int(text[1:]))
        for family in Family:
            if family is not Family.PRODUCT and family.value == text:
                return cls(family)
        raise ValueError(f'bad tag {text!r}')


@dataclass(frozen=True)
class BuildMeta:
    """How an emulator was built."""
    k: int
    seed: int
    mode: str
    betas: tuple

    def hierarchy_config(self):
        """Return the config that reproduces the build's hierarchy."""
        return HierarchyConfig(self.k, self.betas, self.seed)


class Emulator:
    """An emulator: weighted edges with provenance tags.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : iterable of tuple
        ``(u, v, weight, tag)`` with ``u < v``; stored sorted by
        ``(u, v)``.
    meta : BuildMeta
    hierarchy : Hierarchy, optional
        The hierarchy the emulator was built over. Not part of equality.
    """
    def __init__(self, n, edges, meta, hierarchy=None):
        self.n = n
        self.edges = tuple(sorted(edges, key=lambda e: (e[0], e[1])))
        self._index = {(u, v): w for u, v, w, _ in self.edges}
        if len(self._index) != len(self.edges):
            raise ValueError('duplicate emulator pair')
        self.meta = meta
        self.hierarchy = hierarchy

    def __repr__(self):
        return (
            f'<Emulator n={self.n} edges={len(self.edges)} '
            f'k={self.meta.k} mode={self.meta.mode}>'
        )

    def __eq__(self, other):
        if isinstance(other, Emulator):
            return (self.n, self.edges, self.meta) == (
                other.n, other.edges, other.meta
            )
        return NotImplemented

    def __len__(self):
        return len(self.edges)

    @classmethod
    def from_graph(cls, graph, k=2):
        """Return the emulator made of every edge of `graph`."""
        edges = [(u, v, w, Tag(Family.ORIGINAL)) for u, v, w in graph.edges]
        meta = BuildMeta(k, 0, 'original', (1 / k,) * (k - 1))
        return cls(graph.n, edges, meta)

    def pairs(self):
        """Return the undirected vertex pairs of the emulator."""
        return frozenset(self._index)

    def weight(self, u, v):
        """Return the weight of pair ``(u, v)``, or ``None`` if absent."""
        if u > v:
            u, v = v, u
        return self._index.get((u, v))

    def tag_counts(self):
        """Return edge counts per printed tag, in provenance order."""
        counts = Counter(tag for _, _, _, tag in self.edges)
        ordered = sorted(counts, key=lambda tag: tag.rank)
        return {str(tag): counts[tag] for tag in ordered}

    def as_graph(self):
        """Return the finite-weight edges as a weighted :class:`Graph`."""
        return Graph(
            self.n,
            ((u, v, w) for u, v, w, _ in self.edges if not math.isinf(w)),
        )


class _Assembler:
    """Collect candidate edges, one weight and tag per pair.

    ``E1`` proposals install the graph weight and keep it. Any other
    proposal for a pair of `graph` is capped at the edge weight, and the
    lightest proposal wins. The tag is the lowest ranked proposal.
    """
    def __init__(self, graph=None):
        self._graph = graph
        self._best = {}
        self._fixed = set()

    def add(self, u, v, weight, tag):
        if u == v:
            return
        key = (u, v) if u < v else (v, u)
        weight = float(weight)
        fixed = tag.family is Family.E1
        if not fixed and self._graph is not None:
            e = self._graph.edge_index(*key)
            if e is not None:
                weight = min(weight, self._graph.edges[e][2])
        current = self._best.get(key)
        if current is None:
            self._best[key] = (weight, tag)
        else:
            w, t = current
            if key in self._fixed:
                weight = w
            elif not fixed:
                weight = min(w, weight)
            self._best[key] = (weight, t if t.rank <= tag.rank else tag)
        if fixed:
            self._fixed.add(key)

    def __len__(self):
        return len(self._best)

    def emulator(self, n, meta, hierarchy):
        edges = [(u, v, w, t) for (u, v), (w, t) in self._best.items()]
        return Emulator(n, edges, meta, hierarchy)


@dataclass(frozen=True)
class StretchParams:
    """Coefficients of the stretch bound ``alpha*d + a*W1 + b*W2``."""
    k: int
    alpha: int
    a: int
    b: int

    def bound(self, delta, w1, w2):
        return self.alpha * delta + self.a * w1 + self.b * w2


def stretch_params(k):
    """Return the stretch coefficients guaranteed for parameter `k`.

    Parameters
    ----------
    k : int
        At least 2.

    Returns
    -------
    StretchParams
        ``alpha = 2*floor(k/2) - 1``, ``a = 2*ceil(k/2)`` and
        ``b = max(0, 2*(ceil(k/2) - 2))``.

    Raises
    ------
    StretchParameterError
        If `k` is below 2.

    Examples
    --------
    >>> stretch_params(5)
    StretchParams(k=5, alpha=3, a=6, b=2)
    """
    k = _check_k(k)
    half_up = -(-k // 2)
    return StretchParams(k, 2 * (k // 2) - 1, 2 * half_up,
                         max(0, 2 * (half_up - 2)))


def unweighted_params(k):
    """Return ``(alpha, beta)`` for unit weights, where ``W1 = W2 = 1``.

    Examples
    --------
    >>> unweighted_params(4), unweighted_params(5)
    ((3, 4), (3, 8))
    """
    params = stretch_params(k)
    return params.alpha, params.a + params.b


def matched_depth(k):
    """Return the hierarchy depth matching the size of a ``k`` TZ emulator.

    A depth of ``2**(k+1) - 1`` gives size ``n**(1 + 1/(2**(k+1) - 1))`` and
    the unit-weight stretch ``(2**(k+1) - 3, 2**(k+2) - 4)``.
    """
    k = _check_k(k)
    return 2 ** (k + 1) - 1


def _default_betas(k, betas):
    if betas is None:
        return (1 / k,) * (k - 1)
    return tuple(betas)


def predicted_exponents(k, betas=None):
    """Return the size exponent predicted for each edge family.

    Family ``X`` is expected to hold about ``n ** exponent[X]`` edges, up to
    polylogarithmic factors.

    Returns
    -------
    dict
        Keys ``'D'``, ``'E1'``, ``'P<i>'`` (mirrors folded into the smaller
        ``i``), ``'B1'`` and, for ``k >= 3``, ``'B2'``.
    """
    k = _check_k(k)
    betas = _default_betas(k, betas)
    prefix = np.concatenate([[0.0], np.cumsum(betas)])
    exponents = {'D': 1.0, 'E1': 1 + betas[0]}
    for i in range(1, (k + 1) // 2 + 1):
        exponents[f'P{i}'] = 2 - prefix[i - 1] - prefix[k - i]
    exponents['B1'] = max(1 + beta for beta in betas)
    if k >= 3:
        exponents['B2'] = max(
            1 + betas[i] + betas[i + 1] - betas[0] for i in range(k - 2)
        )
    return {key: float(value) for key, value in exponents.items()}


def assemble_products(hierarchy, levels=None):
    """Return the product pairs ``S_{i-1} x S_{k-i}``.

    Parameters
    ----------
    hierarchy : Hierarchy
    levels : iterable of int, optional
        The indices ``i`` to include, all of ``1..k`` by default.

    Returns
    -------
    list of tuple
        ``(s, t, i)`` with ``s < t``, sorted, each pair once with the
        smallest ``i`` producing it.
    """
    k = hierarchy.k
    if levels is None:
        levels = range(1, k + 1)
    found = {}
    for i in sorted(levels):
        left = hierarchy.members(i - 1).tolist()
        right = hierarchy.members(k - i).tolist()
        for s in left:
            for t in right:
                if s != t:
                    found.setdefault((s, t) if s < t else (t, s), i)
    return [(s, t, i) for (s, t), i in sorted(found.items())]


def _config(k, betas, seed):
    return HierarchyConfig(k, _default_betas(k, betas), seed)


def _add_base(assembler, graph, hierarchy):
    for u, v, d in build_D(hierarchy):
        assembler.add(u, v, d, Tag(Family.D))
    for e in np.flatnonzero(hierarchy.edge_level <= 1).tolist():
        u, v, w = graph.edges[e]
        assembler.add(u, v, w, Tag(Family.E1))


def _build_oracle(graph, config, mode, product_levels, families, distances):
    hierarchy = build_hierarchy(graph, config)
    if distances is None:
        distances = apsp_exact(graph)
    matrix = distances.dist
    assembler = _Assembler(graph)
    _add_base(assembler, graph, hierarchy)
    for s, t, i in assemble_products(hierarchy, product_levels):
        assembler.add(s, t, matrix[s, t], Tag(Family.PRODUCT, i))
    if families:
        bunches = build_bunch_edges(graph, hierarchy, 'exact', distances)
        if Family.B1 in families:
            for u, s, d in bunches.b1_edges:
                assembler.add(u, s, d, Tag(Family.B1))
        if Family.B2 in families:
            for u, s, d in bunches.b2_edges:
                assembler.add(u, s, d, Tag(Family.B2))
    meta = BuildMeta(config.k, config.seed, mode, config.betas)
    emulator = assembler.emulator(graph.n, meta, hierarchy)
    logger.info('%s build: n=%d k=%d edges=%d', mode, graph.n, config.k,
                len(emulator))
    return emulator


def build_alg1(graph, beta=1/3, gamma=1/3, seed=0, distances=None):
    """Build the ``+4W1`` emulator from a two-level hierarchy.

    The edges are ``D``, ``E1``, ``S_1 x S_1`` and ``V x S_2`` with exact
    distances as weights.

    Parameters
    ----------
    graph : Graph
    beta, gamma : float, optional
        Sampling exponents of ``S_1`` and ``S_2``.
    seed : int, optional
    distances : DistanceMatrix, optional
        Precomputed distances of `graph`.

    Returns
    -------
    Emulator
        Built with ``k = 3``.
    """
    config = HierarchyConfig(3, (beta, gamma), seed)
    return _build_oracle(graph, config, 'alg1', None, (), distances)


def build_alg2(graph, betas=(1/4, 1/4, 1/4), seed=0, distances=None):
    """Build the ``(3, 4W1)`` emulator from a three-level hierarchy.

    The edges are ``D``, ``E1``, ``S_1 x S_2`` and ``B1(V)``.

    Returns
    -------
    Emulator
        Built with ``k = 4``.
    """
    config = HierarchyConfig(4, betas, seed)
    return _build_oracle(graph, config, 'alg2', (2, 3), (Family.B1,),
                         distances)


def build_general(graph, k, betas=None, seed=0, distances=None):
    """Build the emulator of size about ``n ** (1 + 1/k)``.

    Every auxiliary edge weighs the exact distance between its endpoints.

    Parameters
    ----------
    graph : Graph
    k : int
        At least 2.
    betas : sequence of float, optional
        ``k - 1`` sampling exponents, ``1/k`` each by default.
    seed : int, optional
    distances : DistanceMatrix, optional
        Precomputed distances of `graph`.

    Returns
    -------
    Emulator
        Satisfies the bound of :func:`stretch_params`.

    Raises
    ------
    StretchParameterError
        If `k` is below 2.
    """
    k = _check_k(k)
    return _build_oracle(graph, _config(k, betas, seed), 'general', None,
                         (Family.B1, Family.B2), distances)


def _relax(d, rows, cols, values):
    np.minimum.at(d, (rows, cols), values)
    np.minimum.at(d, (cols, rows), values)


def _install_row(d, s, dist):
    np.minimum(d[s], dist, out=d[s])
    np.minimum(d[:, s], dist, out=d[:, s])


def build_fast(graph, k, seed=0, betas=None, prune_unused=True):
    """Build the emulator of :func:`build_general` without all-pairs SSSP.

    Pivot and light edges keep their exact weights. Product and bunch
    edges take their weights from an estimate matrix ``d`` filled from
    edge weights, pivot distances, relaxations ``d[p_i(x), p_j(y)]`` over
    every edge ``(x, y)`` and every pair of levels, and SSSP sweeps from
    each ``s`` in ``S_i`` restricted to ``E_{i+1}`` and ``E_{i+2}``.

    Parameters
    ----------
    graph : Graph
    k : int
    seed : int, optional
    betas : sequence of float, optional
    prune_unused : bool, optional
        Skip ``B2`` and the ``E_{i+2}`` sweeps when ``k <= 4``. Default is
        ``True``.

    Returns
    -------
    tuple
        ``(Emulator, d)``; every finite ``d[u, v]`` is at least the true
        distance and bunch entries are exact.

    Raises
    ------
    StretchParameterError
        If `k` is below 2.
    """
    k = _check_k(k)
    config = _config(k, betas, seed)
    hierarchy = build_hierarchy(graph, config)
    n = graph.n
    pivots, pivot_dist = hierarchy.pivots, hierarchy.pivot_dist
    d = np.full((n, n), INF)
    np.fill_diagonal(d, 0.0)
    if graph.m:
        us, vs, ws = (np.array(c) for c in zip(*graph.edges))
        us, vs = us.astype(np.int64), vs.astype(np.int64)
        _relax(d, us, vs, ws)
        for i in range(k):
            for j in range(k):
                a, b = pivots[i][us], pivots[j][vs]
                ok = (a >= 0) & (b >= 0)
                values = pivot_dist[i][us] + ws + pivot_dist[j][vs]
                _relax(d, a[ok], b[ok], values[ok])
    vertices = np.arange(n)
    for i in range(1, k):
        ok = pivots[i] >= 0
        _relax(d, vertices[ok], pivots[i][ok], pivot_dist[i][ok])

    b1, b2 = {}, {}
    for i, s, row in _restricted_rows(graph, hierarchy, 1, range(k)):
        _install_row(d, s, row.dist)
        if i <= k - 2:
            inside = row.dist < pivot_dist[i + 1]
            for u in np.flatnonzero(inside).tolist():
                if u != s:
                    b1[(u, s)] = True
    use_b2 = not (prune_unused and k <= 4)
    if use_b2:
        in_s1 = hierarchy.level_of >= 1
        for i, s, row in _restricted_rows(graph, hierarchy, 2, range(k - 1)):
            _install_row(d, s, row.dist)
            if i <= k - 3:
                inside = (row.dist < pivot_dist[i + 2]) & in_s1
                for u in np.flatnonzero(inside).tolist():
                    if u != s:
                        b2[(u, s)] = True

    assembler = _Assembler(graph)
    _add_base(assembler, graph, hierarchy)
    for s, t, i in assemble_products(hierarchy):
        assembler.add(s, t, d[s, t], Tag(Family.PRODUCT, i))
    for u, s in sorted(b1):
        assembler.add(u, s, d[u, s], Tag(Family.B1))
    for u, s in sorted(b2):
        assembler.add(u, s, d[u, s], Tag(Family.B2))
    meta = BuildMeta(k, seed, 'fast', config.betas)
    emulator = assembler.emulator(n, meta, hierarchy)
    logger.info('fast build: n=%d k=%d edges=%d pruned=%s', n, k,
                len(emulator), not use_b2)
    return emulator, d


def format_emulator(emulator):
    """Return the text form of an emulator.

    The header is ``h <n> <edges> <k> <mode> <seed>``, followed by one
    ``e <u> <v> <weight> <tag>`` line per edge. Lines starting with ``#``
    are comments, as in the graph format. A ``# betas <b_1> ...`` comment
    after the header records the sampling exponents; without it
    :func:`parse_emulator` assumes ``1/k`` for every level.
    """
    meta = emulator.meta
    lines = [
        f'h {emulator.n} {len(emulator)} {meta.k} {meta.mode} {meta.seed}',
        '# betas ' + ' '.join(repr(float(b)) for b in meta.betas),
    ]
    for u, v, w, tag in emulator.edges:
        lines.append(f'e {u} {v} {utils._format_weight(w)} {tag}')
    return '\n'.join(lines) + '\n'


def parse_emulator(text):
    """Parse the text form of an emulator.

    Raises
    ------
    FormatError
        With the offending line number.
    """
    header = None
    betas = None
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if fields[0].startswith('#'):
            if fields[:2] == ['#', 'betas']:
                betas = tuple(_number(f, float, lineno) for f in fields[2:])
            continue
        if header is None:
            if len(fields) != 6 or fields[0] != 'h':
                raise FormatError(
                    'expected "h <n> <edges> <k> <mode> <seed>"', lineno
                )
            if fields[4] not in MODES:
                raise FormatError(f'bad mode {fields[4]!r}', lineno)
            header = (
                _number(fields[1], int, lineno),
                _number(fields[2], int, lineno),
                _number(fields[3], int, lineno),
                fields[4],
                _number(fields[5], int, lineno),
                lineno,
            )
            continue
        if len(fields) != 5 or fields[0] != 'e':
            raise FormatError('expected "e <u> <v> <weight> <tag>"', lineno)
        u = _number(fields[1], int, lineno)
        v = _number(fields[2], int, lineno)
        w = _number(fields[3], float, lineno)
        try:
            tag = Tag.parse(fields[4])
        except ValueError as error:
            raise FormatError(str(error), lineno) from None
        if not (0 <= u < v < header[0]) or w < 0 or math.isnan(w):
            raise FormatError(f'bad edge ({u}, {v}, {w})', lineno)
        edges.append((u, v, w, tag))
    if header is None:
        raise FormatError('missing header line')
    n, count, k, mode, seed, lineno = header
    if count != len(edges):
        raise FormatError(
            f'header declares {count} edges, found {len(edges)}', lineno
        )
    if betas is None:
        betas = _default_betas(k, None)
    try:
        return Emulator(n, edges, BuildMeta(k, seed, mode, betas))
    except ValueError as error:
        raise FormatError(str(error)) from None


def read_emulator(path):
    with open(path, encoding='utf-8') as f:
        return parse_emulator(f.read())


def write_emulator(emulator, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_emulator(emulator))
