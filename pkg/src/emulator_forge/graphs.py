"""The graphs module contains the graph type and exact shortest paths.

Graphs are undirected with non-negative weights. Distances are plain
floats with ``math.inf`` marking unreachable vertices.

Contents
--------
* :class:`Graph`
* :class:`PathRecord`
* :class:`DistanceRow`
* :class:`DistanceMatrix`
* :class:`BoundPath`
* :func:`sssp`
* :func:`multi_source_sssp`
* :func:`apsp_exact`
* :func:`path_from_parents`
* :func:`heaviest_two`
* :func:`shortest_path_dag`
* :func:`min_bound_shortest_path`
* :func:`random_graph`
* :func:`parse_graph`
* :func:`format_graph`
* :func:`read_graph`
* :func:`write_graph`
"""
import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from emulator_forge import utils
from emulator_forge.utils import INF


logger = logging.getLogger(__name__)

MAX_CONNECT_ATTEMPTS = 1000


class InvalidVertexError(ValueError):
    """An exception for a vertex id outside ``0..n-1``.

    Parameters
    ----------
    vertex : int
        The invalid vertex id.
    n : int
        The number of vertices of the graph.
    """
    def __init__(self, vertex, n):
        self.vertex = vertex
        self.n = n

    def __str__(self):
        return f'bad vertex id {self.vertex}; must be 0-{self.n - 1}'


class GraphError(ValueError):
    """An exception for structurally invalid graphs and paths."""
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class UnreachableError(ValueError):
    """An exception for a path requested between disconnected vertices.

    Parameters
    ----------
    u, v : int
        The endpoints with no path between them.
    """
    def __init__(self, u, v):
        self.u = u
        self.v = v

    def __str__(self):
        return f'vertex {self.v} is unreachable from vertex {self.u}'


class FormatError(ValueError):
    """An exception for malformed text input.

    Parameters
    ----------
    message : str
        What is wrong with the line.
    lineno : int
        The 1-based line number, or ``None`` for whole-file problems.
    """
    def __init__(self, message, lineno=None):
        self.message = message
        self.lineno = lineno

    def __str__(self):
        if self.lineno is None:
            return self.message
        return f'line {self.lineno}: {self.message}'


class ConnectivityError(ValueError):
    """An exception for a generator that never produced a connected graph.

    Parameters
    ----------
    attempts : int
        The number of graphs drawn before giving up.
    """
    def __init__(self, attempts):
        self.attempts = attempts

    def __str__(self):
        return f'no connected graph after {self.attempts} attempts'


def _checked_edge(n, edge, weighted, seen):
    """Return ``edge`` normalized to ``u < v`` or raise for bad input."""
    u, v, w = edge
    u, v, w = int(u), int(v), float(w)
    for vertex in (u, v):
        if not 0 <= vertex < n:
            raise InvalidVertexError(vertex, n)
    if u == v:
        raise GraphError(f'self loop at vertex {u}')
    if math.isnan(w) or math.isinf(w) or w < 0:
        raise GraphError(f'bad weight {w} on edge ({u}, {v})')
    if not weighted and w != 1:
        raise GraphError(f'unweighted graph has weight {w} on edge ({u}, {v})')
    if u > v:
        u, v = v, u
    if (u, v) in seen:
        raise GraphError(f'duplicate edge ({u}, {v})')
    return u, v, w


class Graph:
    """An immutable undirected weighted graph.

    Edges are stored with ``u < v`` in the order given. The adjacency
    index lists ``(neighbor, edge index)`` pairs sorted by neighbor.

    Parameters
    ----------
    n : int
        The number of vertices, labelled ``0`` to ``n - 1``.
    edges : iterable of tuple
        ``(u, v, w)`` triples.
    weighted : bool, optional
        If ``False`` every weight must be exactly ``1``. Default is
        ``True``.

    Raises
    ------
    InvalidVertexError
        If an endpoint is out of range.
    GraphError
        For self loops, duplicate edges or bad weights.

    Examples
    --------
    >>> graph = Graph(3, [(0, 1, 1), (1, 2, 1)], weighted=False)
    >>> graph.m
    2
    >>> graph.weight(2, 1)
    1.0
    """
    def __init__(self, n, edges, weighted=True):
        n = int(n)
        if n < 0:
            raise GraphError(f'bad vertex count {n}')
        self.n = n
        self.weighted = bool(weighted)
        normalized = []
        index = {}
        for edge in edges:
            u, v, w = _checked_edge(n, edge, weighted, index)
            index[(u, v)] = len(normalized)
            normalized.append((u, v, w))
        self.edges = tuple(normalized)
        self._index = index
        adjacency = [[] for _ in range(n)]
        for e, (u, v, _) in enumerate(self.edges):
            adjacency[u].append((v, e))
            adjacency[v].append((u, e))
        self.adjacency = tuple(tuple(sorted(row)) for row in adjacency)

    def __repr__(self):
        return f'<Graph n={self.n} m={self.m} weighted={self.weighted}>'

    def __eq__(self, other):
        if isinstance(other, Graph):
            return (
                self.n == other.n
                and self.weighted == other.weighted
                and self.edges == other.edges
            )
        return NotImplemented

    def __hash__(self):
        return hash((self.n, self.weighted, self.edges))

    @property
    def m(self):
        """int : The number of edges."""
        return len(self.edges)

    def _check(self, vertex):
        if not 0 <= vertex < self.n:
            raise InvalidVertexError(vertex, self.n)

    def edge_index(self, u, v):
        """Return the index of edge ``(u, v)``, or ``None`` if absent."""
        if u > v:
            u, v = v, u
        return self._index.get((u, v))

    def has_edge(self, u, v):
        return self.edge_index(u, v) is not None

    def weight(self, u, v):
        """Return the weight of edge ``(u, v)``.

        Raises
        ------
        GraphError
            If there is no such edge.
        """
        e = self.edge_index(u, v)
        if e is None:
            raise GraphError(f'no edge ({u}, {v})')
        return self.edges[e][2]

    def max_weight(self):
        """Return the heaviest edge weight, ``0.0`` for edgeless graphs."""
        return max((w for _, _, w in self.edges), default=0.0)

    def is_connected(self):
        """Return True if every vertex is reachable from vertex 0."""
        if self.n <= 1:
            return True
        seen = [False] * self.n
        seen[0] = True
        stack = [0]
        count = 1
        while stack:
            u = stack.pop()
            for v, _ in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.n

    def check_adjacency(self):
        """Return True if the adjacency index matches the edge list."""
        rebuilt = set()
        for u, row in enumerate(self.adjacency):
            for v, e in row:
                a, b, _ = self.edges[e]
                if {a, b} != {u, v}:
                    return False
                rebuilt.add(e)
        return rebuilt == set(range(self.m))


@dataclass(frozen=True)
class PathRecord:
    """A path given by its vertices and the weights of its edges.

    Attributes
    ----------
    vertices : tuple of int
    edge_weights : tuple of float
    total : float
    """
    vertices: tuple
    edge_weights: tuple
    total: float

    @classmethod
    def from_vertices(cls, graph, vertices):
        """Build a record for a vertex sequence of ``graph``.

        Raises
        ------
        GraphError
            If two consecutive vertices are not adjacent.
        """
        vertices = tuple(int(v) for v in vertices)
        weights = tuple(
            graph.weight(a, b) for a, b in zip(vertices, vertices[1:])
        )
        return cls(vertices, weights, math.fsum(weights))

    def __len__(self):
        return len(self.edge_weights)

    def edges(self):
        """Return the ``(a, b)`` pairs along the path in order."""
        return list(zip(self.vertices, self.vertices[1:]))


@dataclass(frozen=True)
class DistanceRow:
    """Distances and parents from a single source.

    ``parent[v]`` is ``-1`` for the source and for unreachable vertices.
    """
    source: int
    dist: np.ndarray
    parent: np.ndarray


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs distances with one parent row per source."""
    dist: np.ndarray
    parent: np.ndarray

    @property
    def n(self):
        return self.dist.shape[0]

    def row(self, source):
        return DistanceRow(source, self.dist[source], self.parent[source])


@dataclass(frozen=True)
class BoundPath:
    """A shortest path chosen to minimize a weighted W1/W2 bound term."""
    path: PathRecord
    bound_term: float
    truncated: bool


def _allowed(level_cap, edge_levels):
    if level_cap is None:
        return None
    if edge_levels is None:
        raise GraphError('level_cap given without edge_levels')
    return [level <= level_cap for level in edge_levels]


def sssp(graph, source, level_cap=None, edge_levels=None):
    """Compute exact distances from ``source`` with Dijkstra's algorithm.

    Parameters
    ----------
    graph : Graph
    source : int
    level_cap : int, optional
        If given, only edges with ``edge_levels[e] <= level_cap`` are used.
    edge_levels : sequence of int, optional
        Per-edge levels, required with `level_cap`.

    Returns
    -------
    DistanceRow
        Among equally short routes the parent is the smallest vertex id.

    Raises
    ------
    InvalidVertexError
        If `source` is out of range.

    Examples
    --------
    >>> graph = Graph(3, [(0, 1, 1), (1, 2, 1)], weighted=False)
    >>> sssp(graph, 0).dist.tolist()
    [0.0, 1.0, 2.0]
    """
    graph._check(source)
    allowed = _allowed(level_cap, edge_levels)
    n = graph.n
    dist = [INF] * n
    parent = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    edges = graph.edges
    adjacency = graph.adjacency
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e in adjacency[u]:
            if done[v] or (allowed is not None and not allowed[e]):
                continue
            nd = d + edges[e][2]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < parent[v]:
                parent[v] = u
    return DistanceRow(
        source,
        np.array(dist, dtype=float),
        np.array(parent, dtype=np.int64),
    )


def multi_source_sssp(graph, sources, level_cap=None, edge_levels=None,
                      allow_empty=False):
    """Return the nearest source and its distance for every vertex.

    Runs one Dijkstra from all sources at once, ordering labels by
    ``(distance, source id)`` so ties go to the smallest source id.

    Parameters
    ----------
    graph : Graph
    sources : iterable of int
    level_cap, edge_levels : optional
        Edge restriction as in :func:`sssp`.
    allow_empty : bool, optional
        Accept an empty source set. Default is ``False``.

    Returns
    -------
    tuple of numpy.ndarray
        ``(nearest, dist)``; nearest is ``-1`` where no source is
        reachable.

    Raises
    ------
    GraphError
        If `sources` is empty and `allow_empty` is ``False``.

    Examples
    --------
    >>> graph = Graph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)], weighted=False)
    >>> nearest, dist = multi_source_sssp(graph, [0, 3])
    >>> nearest.tolist(), dist.tolist()
    ([0, 0, 3, 3], [0.0, 1.0, 1.0, 0.0])
    """
    sources = sorted(set(int(s) for s in sources))
    for s in sources:
        graph._check(s)
    if not sources and not allow_empty:
        raise GraphError('empty source set')
    allowed = _allowed(level_cap, edge_levels)
    n = graph.n
    dist = [INF] * n
    nearest = [-1] * n
    done = [False] * n
    heap = []
    for s in sources:
        dist[s] = 0.0
        nearest[s] = s
        heap.append((0.0, s, s))
    heapq.heapify(heap)
    edges = graph.edges
    while heap:
        d, src, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e in graph.adjacency[u]:
            if done[v] or (allowed is not None and not allowed[e]):
                continue
            nd = d + edges[e][2]
            if nd < dist[v] or (nd == dist[v] and src < nearest[v]):
                dist[v] = nd
                nearest[v] = src
                heapq.heappush(heap, (nd, src, v))
    return np.array(nearest, dtype=np.int64), np.array(dist, dtype=float)


def apsp_exact(graph):
    """Compute all-pairs distances by one :func:`sssp` per source.

    Sources fan out over the worker pool configured with
    ``EMULATOR_FORGE_THREADS``. Each pair keeps the smaller of its two
    float sums, so ``dist`` is exactly symmetric. Parent rows stay the
    tree grown from each source.

    Returns
    -------
    DistanceMatrix
    """
    rows = utils._parallel_map(lambda s: sssp(graph, s), range(graph.n))
    n = graph.n
    if rows:
        dist = np.vstack([row.dist for row in rows])
        dist = np.minimum(dist, dist.T)
        parent = np.vstack([row.parent for row in rows])
    else:
        dist = np.zeros((0, 0))
        parent = np.zeros((0, 0), dtype=np.int64)
    logger.debug('apsp over n=%d m=%d', n, graph.m)
    return DistanceMatrix(dist, parent)


def path_from_parents(graph, row, target):
    """Rebuild the canonical path from ``row.source`` to `target`.

    Raises
    ------
    UnreachableError
        If `target` is unreachable.
    """
    graph._check(target)
    if math.isinf(row.dist[target]):
        raise UnreachableError(row.source, target)
    vertices = [target]
    while vertices[-1] != row.source:
        vertices.append(int(row.parent[vertices[-1]]))
    vertices.reverse()
    return PathRecord.from_vertices(graph, vertices)


def heaviest_two(path):
    """Return the heaviest and second heaviest edge weights of a path.

    A one-edge path has a second weight of ``0``.

    Parameters
    ----------
    path : PathRecord or sequence of float
        A path, or its edge weights.

    Returns
    -------
    tuple of float
        ``(W1, W2)``

    Raises
    ------
    GraphError
        If the path has no edges.

    Examples
    --------
    >>> heaviest_two([3, 1, 2])
    (3, 2)
    >>> heaviest_two([5])
    (5, 0)
    """
    weights = getattr(path, 'edge_weights', path)
    if len(weights) == 0:
        raise GraphError('path has no edges')
    top = heapq.nlargest(2, weights)
    if len(top) == 1:
        return top[0], 0
    return top[0], top[1]


def shortest_path_dag(graph, row):
    """Return the shortest-path predecessor lists of a distance row.

    ``preds[x]`` holds every neighbor ``y`` with
    ``dist[y] + w(y, x) == dist[x]`` up to the internal tolerance, sorted
    by id.
    """
    dist = row.dist
    preds = [[] for _ in range(graph.n)]
    for u, v, w in graph.edges:
        du, dv = dist[u], dist[v]
        if math.isinf(du) or math.isinf(dv):
            continue
        if v != row.source and utils._close(du + w, dv):
            preds[v].append(u)
        if u != row.source and utils._close(dv + w, du):
            preds[u].append(v)
    for p in preds:
        p.sort()
    return preds


def _bound_term(weights, coeff_w1, coeff_w2):
    w1, w2 = heaviest_two(weights)
    return coeff_w1 * w1 + coeff_w2 * w2


def min_bound_shortest_path(graph, u, v, coeff_w1, coeff_w2,
                            enumeration_cap=10**5, row=None, dag=None):
    """Find a shortest u-v path minimizing ``c1*W1 + c2*W2``.

    Shortest paths are enumerated through the predecessor graph of an
    :func:`sssp` row from `u`, stopping after `enumeration_cap` paths.
    Unweighted graphs skip the enumeration since every shortest path has
    the same bound.

    Parameters
    ----------
    graph : Graph
    u, v : int
    coeff_w1, coeff_w2 : float
        Non-negative coefficients.
    enumeration_cap : int, optional
    row : DistanceRow, optional
        A precomputed row from `u`.
    dag : list, optional
        Precomputed :func:`shortest_path_dag` of `row`.

    Returns
    -------
    BoundPath

    Raises
    ------
    UnreachableError
        If `v` is unreachable from `u`.
    GraphError
        If ``u == v`` or a coefficient is negative.
    """
    if coeff_w1 < 0 or coeff_w2 < 0:
        raise GraphError('bound coefficients must be non-negative')
    graph._check(u)
    graph._check(v)
    if u == v:
        raise GraphError('a path needs two distinct endpoints')
    if row is None:
        row = sssp(graph, u)
    canonical = path_from_parents(graph, row, v)
    if not graph.weighted:
        term = _bound_term(canonical.edge_weights, coeff_w1, coeff_w2)
        return BoundPath(canonical, term, False)
    if dag is None:
        dag = shortest_path_dag(graph, row)
    best = None
    best_term = INF
    count = 0
    truncated = False
    # Depth-first walk from v back to u over predecessor lists.
    stack = [(v, (v,))]
    while stack:
        x, suffix = stack.pop()
        if x == u:
            count += 1
            vertices = suffix[::-1]
            weights = [
                graph.weight(a, b) for a, b in zip(vertices, vertices[1:])
            ]
            term = _bound_term(weights, coeff_w1, coeff_w2)
            if term < best_term:
                best, best_term = vertices, term
            if count >= enumeration_cap:
                truncated = bool(stack)
                break
            continue
        for y in reversed(dag[x]):
            if y in suffix:
                continue
            stack.append((y, suffix + (y,)))
    if best is None:
        return BoundPath(
            canonical,
            _bound_term(canonical.edge_weights, coeff_w1, coeff_w2),
            truncated,
        )
    return BoundPath(PathRecord.from_vertices(graph, best), best_term,
                     truncated)


def _decode_pairs(n, indices):
    """Map indices into the upper triangle to ``(u, v)`` with ``u < v``."""
    total = n * (n - 1) // 2
    t = indices.astype(np.int64)
    u = n - 2 - np.floor(
        np.sqrt(-8.0 * t + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5
    ).astype(np.int64)
    v = t + u + 1 - total + (n - u) * ((n - u) - 1) // 2
    return u, v


def random_graph(n, m, weights='uniform', seed=0, connected=True):
    """Draw a uniform random graph with `n` vertices and `m` edges.

    Attempt ``a`` draws from the stream ``(seed, generator, a)``, so the
    same arguments always give the same graph.

    Parameters
    ----------
    n : int
        At least 1.
    m : int
        At most ``n * (n - 1) / 2``.
    weights : {'uniform', 'unit'}, optional
        Uniform weights lie in ``(0, 1]``.
    seed : int, optional
    connected : bool, optional
        Redraw until the graph is connected. Default is ``True``.

    Returns
    -------
    tuple
        ``(Graph, attempts)``

    Raises
    ------
    GraphError
        If `n` or `m` is infeasible.
    ConnectivityError
        After 1000 disconnected draws.
    """
    n, m = int(n), int(m)
    if n < 1:
        raise GraphError(f'bad vertex count {n}; must be at least 1')
    total = n * (n - 1) // 2
    if not 0 <= m <= total:
        raise GraphError(f'bad edge count {m}; must be 0-{total}')
    if weights not in ('uniform', 'unit'):
        raise GraphError(f'bad weight distribution {weights!r}')
    for attempt in range(1, MAX_CONNECT_ATTEMPTS + 1):
        rng = utils._rng(seed, utils._Stream.GENERATOR, attempt - 1)
        if m:
            chosen = np.sort(rng.choice(total, size=m, replace=False))
        else:
            chosen = np.zeros(0, dtype=np.int64)
        us, vs = _decode_pairs(n, chosen)
        if weights == 'unit':
            ws = np.ones(m)
        else:
            ws = 1.0 - rng.random(m)
        graph = Graph(
            n,
            zip(us.tolist(), vs.tolist(), ws.tolist()),
            weighted=weights == 'uniform',
        )
        if not connected or graph.is_connected():
            logger.debug('graph n=%d m=%d after %d attempts', n, m, attempt)
            return graph, attempt
    raise ConnectivityError(MAX_CONNECT_ATTEMPTS)


def format_graph(graph):
    """Return the edge-list text of a graph.

    Examples
    --------
    >>> print(format_graph(Graph(2, [(0, 1, 1)], weighted=False)), end='')
    p 2 1 unweighted
    0 1 1
    """
    kind = 'weighted' if graph.weighted else 'unweighted'
    lines = [f'p {graph.n} {graph.m} {kind}']
    for u, v, w in graph.edges:
        lines.append(f'{u} {v} {utils._format_weight(w, graph.weighted)}')
    return '\n'.join(lines) + '\n'


def _data_lines(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped and not stripped.startswith('#'):
            yield lineno, stripped.split()


def _number(token, kind, lineno):
    try:
        return kind(token)
    except ValueError:
        raise FormatError(f'bad number {token!r}', lineno) from None


def parse_graph(text):
    """Parse edge-list text into a :class:`Graph`.

    Raises
    ------
    FormatError
        With the offending line number.
    """
    lines = _data_lines(text)
    try:
        lineno, fields = next(lines)
    except StopIteration:
        raise FormatError('missing header line') from None
    if len(fields) != 4 or fields[0] != 'p':
        raise FormatError('expected "p <n> <m> <weighted|unweighted>"', lineno)
    n = _number(fields[1], int, lineno)
    m = _number(fields[2], int, lineno)
    if fields[3] not in ('weighted', 'unweighted'):
        raise FormatError(f'bad graph kind {fields[3]!r}', lineno)
    weighted = fields[3] == 'weighted'
    edges = []
    seen = set()
    last = lineno
    for lineno, fields in lines:
        last = lineno
        if len(fields) != 3:
            raise FormatError('expected "<u> <v> <w>"', lineno)
        edge = (
            _number(fields[0], int, lineno),
            _number(fields[1], int, lineno),
            _number(fields[2], float, lineno),
        )
        try:
            u, v, _ = _checked_edge(n, edge, weighted, seen)
        except ValueError as error:
            raise FormatError(str(error), lineno) from None
        seen.add((u, v))
        edges.append(edge)
    if len(edges) != m:
        raise FormatError(f'header declares {m} edges, found {len(edges)}',
                          last)
    try:
        return Graph(n, edges, weighted)
    except ValueError as error:
        raise FormatError(str(error)) from None


def read_graph(path):
    with open(path, encoding='utf-8') as f:
        return parse_graph(f.read())


def write_graph(graph, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_graph(graph))
