import numpy as np
from hypothesis import given, settings, strategies as st
from pytest import approx, fixture, mark, raises

from emulator_forge.emulators import predicted_exponents
from emulator_forge.graphs import (
    Graph,
    apsp_exact,
    path_from_parents,
    random_graph,
)
from emulator_forge.hierarchy import (
    Hierarchy,
    HierarchyConfig,
    HierarchyParameterError,
    build_bunch_edges,
    build_D,
    build_hierarchy,
    compute_edge_levels,
    compute_pivots,
    format_hierarchy,
    sample_hierarchy,
)
from emulator_forge.verify import scaling_slope

from .strategies import graphs


def forced(graph, level_of, k):
    """Return the hierarchy with the given levels instead of sampled ones."""
    level_of = np.array(level_of, dtype=np.int64)
    pivots, pivot_dist = compute_pivots(graph, level_of, k)
    edge_level = compute_edge_levels(graph, pivot_dist, k)
    config = HierarchyConfig(k, (0,) * (k - 1))
    return Hierarchy(config, level_of, pivots, pivot_dist, edge_level)


@fixture(scope='module')
def graph30():
    return random_graph(30, 90, seed=11)[0]


class TestHierarchyConfig:

    def test_default(self):
        config = HierarchyConfig.default(4, seed=3)
        assert config.betas == (0.25, 0.25, 0.25)
        assert config.seed == 3

    def test_probabilities(self):
        config = HierarchyConfig(3, (0.5, 0))
        assert config.sampling_probabilities(100) == approx((0.1, 1.0))

    def test_errors(self):
        with raises(HierarchyParameterError):
            HierarchyConfig(1, ())
        with raises(HierarchyParameterError):
            HierarchyConfig(3, (0.5,))
        with raises(HierarchyParameterError) as info:
            HierarchyConfig(2, (1.5,))
        assert 'must be in [0, 1]' in str(info.value)
        with raises(HierarchyParameterError):
            HierarchyConfig(2, (-0.1,))


class TestSampleHierarchy:

    def test_certain_levels(self, graph30):
        level_of = sample_hierarchy(graph30, HierarchyConfig(4, (0, 0, 0)))
        assert level_of.tolist() == [3] * 30

    def test_single_vertex(self):
        level_of = sample_hierarchy(Graph(1, []), HierarchyConfig.default(3))
        assert level_of.shape == (1,)
        assert 0 <= level_of[0] <= 2

    def test_deterministic(self, graph30):
        config = HierarchyConfig.default(3, seed=5)
        first = sample_hierarchy(graph30, config)
        assert np.array_equal(first, sample_hierarchy(graph30, config))

    def test_expected_size(self):
        n = 10**4
        graph = Graph(n, [])
        expected = n ** (2 / 3)
        for seed in range(20):
            level_of = sample_hierarchy(
                graph, HierarchyConfig(3, (1 / 3, 1 / 3), seed)
            )
            size = np.count_nonzero(level_of >= 1)
            assert expected / 4 <= size <= 4 * expected


class TestPivots:

    def test_identity(self, path3):
        pivots, pivot_dist = compute_pivots(path3, np.array([1, 1, 1]), 2)
        assert pivots[1].tolist() == [0, 1, 2]
        assert pivot_dist[1].tolist() == [0, 0, 0]

    def test_path(self, path3):
        pivots, pivot_dist = compute_pivots(path3, np.array([0, 0, 1]), 2)
        assert pivots.shape == (3, 3)
        assert pivots[0].tolist() == [0, 1, 2]
        assert pivots[1].tolist() == [2, 2, 2]
        assert pivot_dist[1].tolist() == [2, 1, 0]
        assert pivots[2].tolist() == [-1, -1, -1]
        assert np.all(np.isinf(pivot_dist[2]))

    def test_against_apsp(self, graph30):
        hierarchy = build_hierarchy(graph30, HierarchyConfig.default(3, 2))
        dist = apsp_exact(graph30).dist
        for i in range(1, 3):
            members = hierarchy.members(i)
            if not len(members):
                continue
            expected = dist[:, members].min(axis=1)
            assert hierarchy.pivot_dist[i].tolist() == approx(
                expected.tolist()
            )
            for u in range(graph30.n):
                p = hierarchy.pivots[i][u]
                assert dist[u, p] == approx(expected[u])


class TestEdgeLevels:

    def test_empty_first_level(self, path3):
        hierarchy = forced(path3, [0, 0, 0], 3)
        assert hierarchy.edge_level.tolist() == [1, 1]

    def test_definition(self):
        graph = Graph(3, [(0, 1, 2), (1, 2, 0.5), (0, 2, 5)])
        pivot_dist = np.array([
            [0, 0, 0], [1, 1, 1], [3, 3, 3], [np.inf] * 3,
        ], dtype=float)
        levels = compute_edge_levels(graph, pivot_dist, 3)
        assert levels.tolist() == [2, 1, 3]

    def test_first_level_count(self, graph30):
        hierarchy = build_hierarchy(graph30, HierarchyConfig.default(3, 4))
        d1 = hierarchy.pivot_dist[1]
        expected = sum(
            w < d1[u] or w < d1[v] for u, v, w in graph30.edges
        )
        assert hierarchy.edge_level_counts()[0] == expected
        assert hierarchy.edge_level_counts()[-1] == graph30.m


class TestHierarchy:

    def test_members(self, path3):
        hierarchy = forced(path3, [1, 0, 2], 3)
        assert hierarchy.members(0).tolist() == [0, 1, 2]
        assert hierarchy.members(1).tolist() == [0, 2]
        assert hierarchy.members(2).tolist() == [2]
        assert hierarchy.members(3).tolist() == []
        assert hierarchy.level_sizes() == (3, 2, 1)

    def test_ball(self, path3):
        hierarchy = forced(path3, [1, 0, 0], 3)
        dist = apsp_exact(path3)
        assert hierarchy.ball(1, 0, 1, dist).tolist() == [1]
        assert hierarchy.ball(2, 0, 1, dist).tolist() == [1, 2]
        assert hierarchy.ball(2, 1, 2, dist).tolist() == [0]

    def test_read_only(self, graph30):
        hierarchy = build_hierarchy(graph30, HierarchyConfig.default(3))
        with raises(ValueError):
            hierarchy.pivots[1][0] = 0

    def test_deterministic(self, graph30):
        config = HierarchyConfig.default(4, seed=9)
        assert build_hierarchy(graph30, config) == build_hierarchy(
            graph30, config
        )

    @settings(deadline=None, max_examples=50)
    @given(graphs(), st.integers(2, 5), st.integers(0, 100))
    def test_nesting(self, graph, k, seed):
        hierarchy = build_hierarchy(graph, HierarchyConfig.default(k, seed))
        assert hierarchy.check_nesting()
        assert hierarchy.level_sizes()[0] == graph.n
        counts = hierarchy.edge_level_counts()
        assert list(counts) == sorted(counts)


class TestBuildD:

    def test_self_pivots(self, graph30):
        hierarchy = forced(graph30, [2] * 30, 3)
        assert build_D(hierarchy) == []

    def test_path(self, path3):
        hierarchy = forced(path3, [0, 0, 1], 2)
        assert build_D(hierarchy) == [(0, 2, 2.0), (1, 2, 1.0)]

    def test_size(self, graph30):
        for k in range(2, 6):
            hierarchy = build_hierarchy(graph30, HierarchyConfig.default(k))
            edges = build_D(hierarchy)
            assert len(edges) <= graph30.n * (k - 1)
            assert all(u < v for u, v, _ in edges)


class TestBunchEdges:

    def test_unbounded_balls(self, path3):
        hierarchy = forced(path3, [0, 0, 0], 2)
        bunches = build_bunch_edges(path3, hierarchy)
        assert len(bunches.b1_edges) == 6
        assert bunches.b2_edges == ()

    def test_path(self, path3):
        hierarchy = forced(path3, [1, 0, 0], 3)
        expected_b1 = ((1, 0, 1.0), (2, 0, 2.0), (2, 1, 1.0))
        expected_b2 = ((0, 1, 1.0), (0, 2, 2.0))
        for mode in ('exact', 'restricted_sssp'):
            bunches = build_bunch_edges(path3, hierarchy, mode)
            assert bunches.b1_edges == expected_b1
            assert bunches.b2_edges == expected_b2

    def test_restricted_matches_exact(self, graph30):
        dist = apsp_exact(graph30)
        for k in (3, 4):
            hierarchy = build_hierarchy(graph30, HierarchyConfig.default(k))
            exact = build_bunch_edges(graph30, hierarchy, distances=dist)
            restricted = build_bunch_edges(graph30, hierarchy,
                                           'restricted_sssp')
            for family in ('b1_edges', 'b2_edges'):
                assert [e[:2] for e in getattr(restricted, family)] == [
                    e[:2] for e in getattr(exact, family)
                ]
            for u, s, d in restricted.b1_edges + restricted.b2_edges:
                assert d == approx(dist.dist[u, s], rel=1e-12)

    @mark.parametrize('k', [3, 4])
    def test_ball_paths_use_low_edges(self, k, weighted100,
                                      weighted100_distances):
        hierarchy = build_hierarchy(weighted100,
                                    HierarchyConfig.default(k, seed=k))
        bunches = build_bunch_edges(weighted100, hierarchy,
                                    distances=weighted100_distances)
        matrix = weighted100_distances.dist
        radii = hierarchy.pivot_dist
        for offset, edges in ((1, bunches.b1_edges), (2, bunches.b2_edges)):
            assert edges
            for u, s, _ in edges:
                top = min(int(hierarchy.level_of[s]), k - 1 - offset)
                witness = min(
                    i for i in range(top + 1)
                    if matrix[s, u] < radii[i + offset][u]
                )
                row = weighted100_distances.row(s)
                path = path_from_parents(weighted100, row, u)
                for a, b in zip(path.vertices, path.vertices[1:]):
                    e = weighted100.edge_index(a, b)
                    assert hierarchy.edge_level[e] <= witness + offset

    def test_bad_mode(self, path3):
        hierarchy = forced(path3, [0, 0, 0], 2)
        with raises(HierarchyParameterError):
            build_bunch_edges(path3, hierarchy, 'approximate')


def test_format_hierarchy(path3):
    hierarchy = forced(path3, [0, 0, 1], 2)
    assert format_hierarchy(hierarchy).splitlines() == [
        'v 0 0', 'v 1 0', 'v 2 1',
        'pivot 1 0 2 2.0', 'pivot 1 1 2 1.0', 'pivot 1 2 2 0.0',
        'elevel 0 1', 'elevel 1 2',
    ]


@mark.slow
def test_family_sizes_scale():
    k = 3
    ns = (64, 128, 256)
    counts = {'E1': [], 'B1': [], 'B2': []}
    for n in ns:
        totals = dict.fromkeys(counts, 0)
        for seed in range(20):
            graph, _ = random_graph(n, 4 * n, seed=seed)
            hierarchy = build_hierarchy(graph,
                                        HierarchyConfig.default(k, seed))
            bunches = build_bunch_edges(graph, hierarchy, 'restricted_sssp')
            totals['E1'] += int(np.count_nonzero(hierarchy.edge_level <= 1))
            totals['B1'] += len(bunches.b1_edges)
            totals['B2'] += len(bunches.b2_edges)
        for family, total in totals.items():
            counts[family].append(total / 20)
    expected = predicted_exponents(k)
    for family, means in counts.items():
        for n, mean in zip(ns, means):
            assert 0 < mean <= 3 * n ** expected[family]
        slope = scaling_slope(ns, means)
        assert 0.5 < slope <= expected[family] + 0.3
