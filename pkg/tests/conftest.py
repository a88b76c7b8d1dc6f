import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypercl import Hypergraph, LabeledDataset  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "data"


def random_hypergraph(rng, n, m, max_size=4):
    edges = []
    for _ in range(m):
        size = int(rng.integers(1, min(max_size, n) + 1))
        edges.append(sorted(rng.choice(n, size, replace=False).tolist()))
    return Hypergraph.from_hyperedges(edges, num_nodes=n), edges


def random_dataset(rng, n=12, m=6, f=5, classes=3, cover=True):
    h, edges = random_hypergraph(rng, n, m)
    if cover:
        # make sure every node has a membership
        seen = {i for e in edges for i in e}
        extra = [i for i in range(n) if i not in seen]
        if extra:
            edges.append(extra)
            h = Hypergraph.from_hyperedges(edges, num_nodes=n)
    x = rng.normal(size=(n, f))
    y = rng.integers(0, classes, n)
    return LabeledDataset(h, x, y, classes)


@pytest.fixture(scope="session")
def zoo():
    from hypercl import dataio
    return dataio.load_dataset(DATA / "zoo.json")
