from pytest import fixture

from emulator_forge.graphs import Graph, apsp_exact, random_graph


@fixture(scope='module')
def path3():
    return Graph(3, [(0, 1, 1), (1, 2, 1)], weighted=False)


@fixture(scope='module')
def weighted100():
    graph, _ = random_graph(100, 300, seed=1)
    return graph


@fixture(scope='module')
def weighted100_distances(weighted100):
    return apsp_exact(weighted100)
