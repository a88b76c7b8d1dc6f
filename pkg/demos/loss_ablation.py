"""Which contrastive terms matter on Zoo?

Trains one model per loss combination with the same seed and compares probe
accuracy over 20 random splits. Takes about a minute.

    python3 demos/loss_ablation.py
"""

import dataclasses
from pathlib import Path

import numpy as np

from hypercl import dataio, embed, evaluate_classification, random_split, train

DATA = Path(__file__).resolve().parent.parent / "data" / "zoo.json"

d = dataio.load_dataset(DATA)
tc, pc = dataio.bundled_config("zoo")
splits = [random_split(d.num_nodes, rng_seed=s) for s in range(20)]

runs = {
    "node": dict(use_group=False, use_membership=False),
    "node + group": dict(use_membership=False),
    "node + group + membership": {},
    "all, k=2 negatives": dict(negatives_k=2),
}
for name, changes in runs.items():
    accs = []
    for seed in range(3):
        cfg = dataclasses.replace(tc, seed=seed, loss=dataclasses.replace(tc.loss, **changes))
        mean, _, _ = evaluate_classification(embed(train(d, cfg), d), d.labels, splits, pc,
                                             d.num_classes)
        accs.append(mean)
    print(f"{name:28s}{100 * np.mean(accs):6.2f}")

# self-loops let each node keep its own features in the mean
no_loops = dataclasses.replace(tc, add_self_loops=False)
mean, _, _ = evaluate_classification(embed(train(d, no_loops), d), d.labels, splits, pc,
                                     d.num_classes)
print(f"{'without self-loops (seed 0)':28s}{100 * mean:6.2f}")
