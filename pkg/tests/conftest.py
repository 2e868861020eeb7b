from pathlib import Path

import numpy as np
import pytest

from dcmg.model import MicrogridModel
from dcmg.plant import DGRatings, ElectricalNetwork
from dcmg.scenario import parse_scenario
from dcmg.topology import CommGraph, NodePartition

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture(scope="session")
def case1():
    return parse_scenario(SCENARIOS / "case1.scenario")


@pytest.fixture(scope="session")
def case2():
    return parse_scenario(SCENARIOS / "case2.scenario")


@pytest.fixture(scope="session")
def case3():
    return parse_scenario(SCENARIOS / "case3.scenario")


def random_tree_plus(rng, n, extra):
    """Edges of a random spanning tree plus ``extra`` random chords."""
    perm = rng.permutation(n)
    edges = {tuple(sorted((int(perm[k]), int(perm[rng.integers(0, k)])))) for k in range(1, n)}
    while len(edges) < min(n - 1 + extra, n * (n - 1) // 2):
        i, j = rng.choice(n, 2, replace=False)
        edges.add(tuple(sorted((int(i), int(j)))))
    return sorted(edges)


def random_network(rng, n, all_loads=True, extra_lines=None):
    extra = rng.integers(0, n) if extra_lines is None else extra_lines
    lines = [(i, j, rng.uniform(0.5, 4.0), rng.uniform(10e-6, 40e-6)) for i, j in random_tree_plus(rng, n, extra)]
    g = 1.0 / rng.uniform(10.0, 60.0, n)
    if not all_loads:
        g[rng.random(n) < 0.3] = 0.0
        if not np.any(g > 0):
            g[0] = 1.0 / 30.0
    return ElectricalNetwork.from_lines(n, lines, g, rng.uniform(1.5e-3, 3e-3, n), rng.uniform(2e-3, 3e-3, n))


def random_ratings(rng, n, v_rat=380.0):
    return DGRatings.rating_inverse(rng.uniform(15.0, 45.0, n), v_rat)


def random_partition(rng, n):
    m = int(rng.integers(1, n + 1))
    return NodePartition(n, tuple(int(k) for k in rng.choice(n, m, replace=False)))


def complete_graph(n, w=20.0):
    return CommGraph.from_edges(n, [(i, j, w) for i in range(n) for j in range(i + 1, n)])


def random_model(rng, n, all_loads=True):
    net = random_network(rng, n, all_loads)
    return MicrogridModel(net, random_ratings(rng, n), complete_graph(n), random_partition(rng, n))


@pytest.fixture(scope="session")
def traces(case1, case2, case3):
    from dcmg.sim import run

    return {1: run(case1), 2: run(case2), 3: run(case3)}
