"""The two heterogeneity regimes for splitting data across clients.

A Dirichlet split draws per-class client proportions: small
concentrations make silos that see only a few classes, large ones
approach an iid split. Label sharding sorts the pool by label, cuts it
into equal shards and deals a fixed number of shards per client, so
with two shards each client holds at most two labels.

Run: python demos/03_noniid_partitions.py
"""

import numpy as np

from fedback import dirichlet_partition, generate_synthetic, label_shard_partition

dataset = generate_synthetic("classification", 2000, 4, classes=10, seed=0)
labels = dataset.targets


def describe(parts, name):
    classes_held = [len(np.unique(labels[idx])) for idx in parts]
    sizes = [len(idx) for idx in parts]
    print(f"{name}:")
    print(f"  classes per client: median {np.median(classes_held):.0f}, "
          f"min {min(classes_held)}, max {max(classes_held)}")
    print(f"  samples per client: min {min(sizes)}, max {max(sizes)}")


for beta in (0.1, 0.5, 1000.0):
    parts = dirichlet_partition(labels, 20, beta=beta, seed=3)
    describe(parts, f"dirichlet beta={beta}")

parts = label_shard_partition(labels, 20, shards_per_client=2, seed=3)
describe(parts, "label shards, 2 per client")

print("\nfirst five clients under dirichlet beta=0.5 (class histograms):")
parts = dirichlet_partition(labels, 20, beta=0.5, seed=3)
for i in range(5):
    hist = np.bincount(labels[parts[i]], minlength=10)
    print(f"  client {i}: {hist.tolist()}")
