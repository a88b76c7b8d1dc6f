"""Hypergraph containers, degree bookkeeping and preprocessing."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ShapeError
from .rng import as_rng


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """A hypergraph stored as a flat list of (node, hyperedge) memberships.

    Memberships keep their insertion order, which is the order the
    augmentation masks index into. Hyperedges may be empty (for example
    after masking); they stay in the index space.
    """

    num_nodes: int
    num_hyperedges: int
    nodes: np.ndarray
    edges: np.ndarray
    weights: np.ndarray = None
    self_loops: np.ndarray = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "num_nodes", int(self.num_nodes))
        set_(self, "num_hyperedges", int(self.num_hyperedges))
        set_(self, "nodes", _frozen(self.nodes, np.int64))
        set_(self, "edges", _frozen(self.edges, np.int64))
        m = self.num_hyperedges
        w = np.ones(m) if self.weights is None else self.weights
        loops = np.zeros(m, bool) if self.self_loops is None else self.self_loops
        set_(self, "weights", _frozen(w, np.float64))
        set_(self, "self_loops", _frozen(loops, bool))
        self._validate()

    def _validate(self):
        n, m = self.num_nodes, self.num_hyperedges
        if n < 0 or m < 0:
            raise ShapeError("node and hyperedge counts must be non-negative")
        if self.nodes.shape != self.edges.shape:
            raise ShapeError("nodes and edges membership arrays differ in length")
        if self.weights.shape != (m,) or self.self_loops.shape != (m,):
            raise ShapeError("weights and self_loops need one entry per hyperedge")
        if self.nodes.size:
            if self.nodes.min() < 0 or self.nodes.max() >= n:
                raise ShapeError("membership node index out of range")
            if self.edges.min() < 0 or self.edges.max() >= m:
                raise ShapeError("membership hyperedge index out of range")
        if np.any(self.weights <= 0):
            raise ShapeError("hyperedge weights must be positive")
        keys = self.nodes * max(m, 1) + self.edges
        if np.unique(keys).size != keys.size:
            raise ShapeError("duplicate (node, hyperedge) membership")

    @classmethod
    def from_hyperedges(cls, hyperedges, num_nodes=None):
        """Build from a list of node-index lists, one per hyperedge."""
        nodes, edges = [], []
        for j, members in enumerate(hyperedges):
            for i in members:
                nodes.append(int(i))
                edges.append(j)
        if num_nodes is None:
            num_nodes = max(nodes) + 1 if nodes else 0
        return cls(num_nodes, len(hyperedges), nodes, edges)

    @property
    def num_memberships(self):
        return int(self.nodes.size)

    def hyperedge_list(self):
        """Members of every hyperedge, in membership order."""
        out = [[] for _ in range(self.num_hyperedges)]
        for i, j in zip(self.nodes.tolist(), self.edges.tolist()):
            out[j].append(i)
        return out

    def with_memberships(self, keep):
        """Same index space, keeping only memberships where ``keep`` is true."""
        keep = np.asarray(keep, bool)
        return Hypergraph(self.num_nodes, self.num_hyperedges,
                          self.nodes[keep], self.edges[keep],
                          self.weights, self.self_loops)

    def incidence_dense(self):
        """The |V| x |E| 0/1 incidence matrix H."""
        H = np.zeros((self.num_nodes, self.num_hyperedges))
        H[self.nodes, self.edges] = 1.0
        return H

    # Sparse operators, rows sorted by destination and columns by source so
    # that scatter-adds accumulate in a fixed order.
    @cached_property
    def node_to_edge(self):
        """Sum operator H^T, shape |E| x |V|."""
        a = sp.csr_matrix((np.ones(self.nodes.size), (self.edges, self.nodes)),
                          shape=(self.num_hyperedges, self.num_nodes))
        a.sort_indices()
        return a

    @cached_property
    def edge_to_node(self):
        """Weighted sum operator H W, shape |V| x |E|."""
        a = sp.csr_matrix((self.weights[self.edges], (self.nodes, self.edges)),
                          shape=(self.num_nodes, self.num_hyperedges))
        a.sort_indices()
        return a

    @cached_property
    def degrees(self):
        return compute_degrees(self)


@dataclass(frozen=True)
class DegreeVectors:
    node_degrees: np.ndarray
    hyperedge_degrees: np.ndarray


def compute_degrees(h):
    """Weighted node degrees d_i = sum_j w_j h_ij and hyperedge sizes."""
    d = np.zeros(h.num_nodes)
    np.add.at(d, h.nodes, h.weights[h.edges])
    delta = np.bincount(h.edges, minlength=h.num_hyperedges).astype(np.int64)
    return DegreeVectors(d, delta)


def add_self_loops(h):
    """Append one single-node hyperedge per node, flagged as a self-loop."""
    n, m = h.num_nodes, h.num_hyperedges
    idx = np.arange(n)
    return Hypergraph(
        n, m + n,
        np.concatenate([h.nodes, idx]),
        np.concatenate([h.edges, m + idx]),
        np.concatenate([h.weights, np.ones(n)]),
        np.concatenate([h.self_loops, np.ones(n, bool)]),
    )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    hypergraph: Hypergraph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_names: list = None
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.features)
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        n = self.hypergraph.num_nodes
        if x.ndim != 2 or x.shape[0] != n:
            raise ShapeError(f"features must be {n} x F, got {x.shape}")
        if y.shape != (n,):
            raise ShapeError(f"expected {n} labels, got {y.shape[0]}")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ShapeError("label outside [0, num_classes)")

    @property
    def num_nodes(self):
        return self.hypergraph.num_nodes


def remove_isolated_nodes(d):
    """Drop nodes that belong to no hyperedge.

    Returns the reindexed dataset and a dict mapping old to new node ids.
    """
    h = d.hypergraph
    keep = np.bincount(h.nodes, minlength=h.num_nodes) > 0
    old = np.flatnonzero(keep)
    new_of = np.full(h.num_nodes, -1, np.int64)
    new_of[old] = np.arange(old.size)
    h2 = Hypergraph(old.size, h.num_hyperedges, new_of[h.nodes], h.edges,
                    h.weights, h.self_loops)
    out = LabeledDataset(h2, d.features[old], d.labels[old], d.num_classes,
                         d.class_names, d.name)
    return out, {int(o): int(i) for i, o in enumerate(old)}


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    seed: int = None


def random_split(num_nodes, ratios=(0.1, 0.1, 0.8), rng_seed=0):
    """Uniform random train/valid/test split.

    Train and valid sizes are floor(ratio * n); the remainder goes to test.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigurationError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"ratios must sum to 1, got {sum(ratios)}")
    n_train = int(np.floor(ratios[0] * num_nodes + 1e-9))
    n_valid = int(np.floor(ratios[1] * num_nodes + 1e-9))
    perm = as_rng(rng_seed).permutation(num_nodes)
    return Split(np.sort(perm[:n_train]),
                 np.sort(perm[n_train:n_train + n_valid]),
                 np.sort(perm[n_train + n_valid:]),
                 seed=int(rng_seed))
