"""Train on the Zoo hypergraph, then probe and cluster the embeddings.

Run from the repository root:

    python3 demos/zoo_walkthrough.py
"""

from pathlib import Path

import numpy as np

from hypercl import dataio, embed, evaluate_classification, evaluate_clustering, random_init
from hypercl import random_split, train
from hypercl.evalkit import kmeans, silhouette

DATA = Path(__file__).resolve().parent.parent / "data" / "zoo.json"

d = dataio.load_dataset(DATA)
for k, v in dataio.dataset_stats(d).items():
    print(f"{k:20s}{v}")

# every categorical attribute value becomes a hyperedge, so animals that share
# many attributes share many groups
tc, pc = dataio.bundled_config("zoo")
tm = train(d, tc)
print(f"\nloss {tm.loss_trace[0]:.4f} -> {tm.loss_trace[-1]:.4f} "
      f"({tc.epochs} epochs, {tm.mean_epoch_ms:.1f} ms/epoch)")

emb = embed(tm, d)
splits = [random_split(d.num_nodes, rng_seed=s) for s in range(20)]
mean, std, _ = evaluate_classification(emb, d.labels, splits, pc, d.num_classes)
print(f"linear probe, 10% labels   {100 * mean:.2f} +- {100 * std:.2f}")

# an untrained encoder is the baseline to beat
base = embed(random_init(d, tc), d)
mean0, std0, _ = evaluate_classification(base, d.labels, splits, pc, d.num_classes)
print(f"random-init encoder        {100 * mean0:.2f} +- {100 * std0:.2f}")

nmi, f1, _ = evaluate_clustering(emb, d.labels, runs=5)
res = kmeans(emb, d.num_classes, seed=0)
print(f"k-means  NMI {nmi:.3f}  F1 {f1:.3f}  silhouette {silhouette(emb, res.assignments):.3f}")
print("cluster sizes", np.bincount(res.assignments).tolist())
