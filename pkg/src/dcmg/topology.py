"""Communication graph, Laplacian and Kron reduction.

Nodes are indexed 0..n-1 internally; the scenario layer converts from the
1-based ids used in files.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DanglingReference, ModelValidationError, NonpositiveParameter
from .linalg import solve


@dataclass(frozen=True)
class CommGraph:
    weights: np.ndarray
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ModelValidationError("adjacency matrix must be square")
        if not np.allclose(w, w.T, rtol=0, atol=0):
            raise ModelValidationError("adjacency matrix must be symmetric")
        if np.any(w < 0) or np.any(np.diag(w) != 0):
            raise ModelValidationError("weights must be >= 0 with a zero diagonal")
        active = np.ones(w.shape[0], dtype=bool) if self.active is None else np.array(self.active, dtype=bool)
        if active.shape != (w.shape[0],):
            raise ModelValidationError("active mask has the wrong length")
        w.setflags(write=False)
        active.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "active", active)

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j, weight)`` triples with 0-based node indices."""
        w = np.zeros((n, n))
        for i, j, a in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise DanglingReference(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
            if i == j:
                raise ModelValidationError(f"self loop on node {i}")
            if a <= 0:
                raise NonpositiveParameter(f"edge ({i}, {j}) has nonpositive weight {a}")
            w[i, j] = w[j, i] = a
        return cls(w)

    @property
    def n(self):
        return self.weights.shape[0]

    def effective_weights(self):
        """Weights with every edge touching an inactive node removed."""
        mask = np.outer(self.active, self.active)
        return np.where(mask, self.weights, 0.0)

    def with_active(self, node, flag):
        active = self.active.copy()
        active[node] = flag
        return CommGraph(self.weights, active)


@dataclass(frozen=True)
class NodePartition:
    """Critical / ordinary split; both index tuples are sorted and 0-based."""

    n: int
    critical: tuple

    def __post_init__(self):
        crit = tuple(sorted(int(i) for i in self.critical))
        if len(crit) == 0:
            raise ModelValidationError("at least one critical node is required")
        if len(set(crit)) != len(crit):
            raise ModelValidationError("duplicate critical node")
        if crit[0] < 0 or crit[-1] >= self.n:
            raise DanglingReference("critical node index out of range")
        object.__setattr__(self, "critical", crit)

    @classmethod
    def all_critical(cls, n):
        return cls(n, tuple(range(n)))

    @property
    def ordinary(self):
        crit = set(self.critical)
        return tuple(i for i in range(self.n) if i not in crit)

    @property
    def m(self):
        return len(self.critical)


def laplacian(graph):
    w = graph.effective_weights()
    return np.diag(w.sum(axis=1)) - w


def is_connected(graph):
    """BFS over positive-weight edges among active nodes."""
    nodes = np.flatnonzero(graph.active)
    if len(nodes) <= 1:
        return True
    w = graph.effective_weights()
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(w[i] > 0):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == len(nodes)


def _split(n, retained):
    keep = np.array(sorted(set(int(i) for i in retained)), dtype=int)
    if keep.size == 0:
        raise ValueError("retained set must be nonempty")
    drop = np.setdiff1d(np.arange(n), keep)
    return keep, drop


def kron_reduce(lap, retained):
    """Schur complement of the eliminated block: L11 - L12 L22^-1 L21."""
    lap = np.asarray(lap, dtype=float)
    keep, drop = _split(lap.shape[0], retained)
    l11 = lap[np.ix_(keep, keep)]
    if drop.size == 0:
        return l11.copy()
    l12 = lap[np.ix_(keep, drop)]
    l22 = lap[np.ix_(drop, drop)]
    l21 = lap[np.ix_(drop, keep)]
    return l11 - l12 @ solve(l22, l21, "L22")


def ordinary_relay_map(lap, partition):
    """Matrix -L22^-1 L21 giving relayed ordinary estimates from critical ones.

    Row k holds the weights of ordinary node ``partition.ordinary[k]`` over the
    critical nodes, in ``partition.critical`` order.
    """
    lap = np.asarray(lap, dtype=float)
    crit = list(partition.critical)
    ordn = list(partition.ordinary)
    if not ordn:
        return np.zeros((0, len(crit)))
    return -solve(lap[np.ix_(ordn, ordn)], lap[np.ix_(ordn, crit)], "L22")
