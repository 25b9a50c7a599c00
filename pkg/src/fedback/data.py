"""Synthetic datasets and non-iid partitioning across clients.

Two heterogeneity schemes are provided: a Dirichlet split, where each
class is spread over clients with Dirichlet-distributed proportions
(small concentration = skewed silos), and label sharding, where the
label-sorted sample pool is cut into equal contiguous shards and each
client is dealt a fixed number of shards.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError
from .objectives import Objective

_MAX_PARTITION_RETRIES = 100


@dataclass
class SyntheticDataset:
    """A generated dataset plus the ground truth used to build it."""

    task: str
    features: np.ndarray
    targets: np.ndarray
    classes: int | None = None
    planted: np.ndarray | None = None
    noise: float | None = None

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


@dataclass
class PartitionSpec:
    """How to split a dataset across clients.

    ``beta`` is the Dirichlet concentration (used iff scheme is
    "dirichlet"); ``shards_per_client`` applies iff scheme is
    "label_shard". A ``seed`` of None defers to the caller's run seed.
    """

    scheme: str = "dirichlet"
    beta: float = 0.5
    shards_per_client: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.scheme not in ("dirichlet", "label_shard"):
            raise ContractViolationError(f"unknown partition scheme: {self.scheme!r}")
        if self.scheme == "dirichlet" and not self.beta > 0:
            raise ContractViolationError("Dirichlet concentration must be positive")
        if self.scheme == "label_shard" and self.shards_per_client < 1:
            raise ContractViolationError("shards_per_client must be at least 1")


def generate_synthetic(
    task: str,
    n_samples: int,
    n_features: int,
    classes: int = 2,
    seed: int = 0,
    noise: float = 0.05,
    class_spread: float = 2.0,
) -> SyntheticDataset:
    """Deterministically generate a regression or classification set.

    Regression draws a Gaussian design, plants a Gaussian parameter and
    adds ``noise``-scaled Gaussian noise to the responses.
    Classification draws one Gaussian cluster center per class (scaled
    by ``class_spread``), assigns labels in a balanced shuffled pattern
    and samples unit-variance points around the centers.
    """
    if n_samples < 1 or n_features < 1:
        raise ContractViolationError("need at least one sample and one feature")
    rng = np.random.default_rng(seed)
    if task == "regression":
        features = rng.standard_normal((n_samples, n_features))
        planted = rng.standard_normal(n_features)
        targets = features @ planted + noise * rng.standard_normal(n_samples)
        return SyntheticDataset("regression", features, targets, planted=planted, noise=noise)
    if task == "classification":
        if classes < 2:
            raise ContractViolationError("classification needs at least two classes")
        centers = class_spread * rng.standard_normal((classes, n_features))
        labels = rng.permutation(np.arange(n_samples) % classes)
        features = centers[labels] + rng.standard_normal((n_samples, n_features))
        return SyntheticDataset("classification", features, labels, classes=classes)
    raise ContractViolationError(f"unknown task: {task!r}")


def dirichlet_partition(labels, n_clients: int, beta: float, seed: int = 0):
    """Split sample indices across clients with per-class Dirichlet mixing.

    For each class, client proportions are drawn from Dirichlet(beta)
    and the class's samples are assigned multinomially. Outcomes that
    leave any client empty are resampled with an incremented sub-seed,
    up to a bounded number of retries.

    Returns a list of sorted index arrays, one per client, that exactly
    covers the input.
    """
    labels = np.asarray(labels)
    if n_clients < 1:
        raise ContractViolationError("need at least one client")
    if not beta > 0:
        raise ContractViolationError("Dirichlet concentration must be positive")
    for attempt in range(_MAX_PARTITION_RETRIES):
        rng = np.random.default_rng([seed, attempt])
        parts: list[list[int]] = [[] for _ in range(n_clients)]
        for cls in np.unique(labels):
            idx = np.flatnonzero(labels == cls)
            proportions = rng.dirichlet(np.full(n_clients, beta))
            assignment = rng.choice(n_clients, size=idx.size, p=proportions)
            for j in range(n_clients):
                parts[j].extend(idx[assignment == j])
        if all(parts):
            return [np.sort(np.asarray(p, dtype=int)) for p in parts]
    raise ContractViolationError(
        f"could not avoid an empty client in {_MAX_PARTITION_RETRIES} resampling attempts"
    )


def label_shard_partition(labels, n_clients: int, shards_per_client: int, seed: int = 0):
    """Deal equal contiguous shards of the label-sorted pool to clients.

    The pool size must divide evenly into n_clients * shards_per_client
    shards. Every client receives the same number of samples. When each
    label's count is a multiple of the shard size (balanced pools),
    every shard is single-label, so two shards per client means at most
    two distinct labels per client.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n_clients < 1 or shards_per_client < 1:
        raise ContractViolationError("client and shard counts must be positive")
    total_shards = n_clients * shards_per_client
    if n % total_shards != 0:
        raise ContractViolationError(
            f"{n} samples do not divide into {total_shards} equal shards"
        )
    shard_size = n // total_shards
    order = np.argsort(labels, kind="stable")
    shards = order.reshape(total_shards, shard_size)
    deal = np.random.default_rng(seed).permutation(total_shards)
    return [
        np.sort(np.concatenate([shards[s] for s in deal[i * shards_per_client : (i + 1) * shards_per_client]]))
        for i in range(n_clients)
    ]


def quantile_bins(values, n_bins: int) -> np.ndarray:
    """Bin continuous values into quantile classes.

    Gives regression targets a class structure so the label-based
    partition schemes apply to them too.
    """
    values = np.asarray(values, dtype=float)
    if n_bins < 1:
        raise ContractViolationError("need at least one bin")
    edges = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.digitize(values, edges)


def partition_indices(labels, n_clients: int, spec: PartitionSpec, default_seed: int = 0):
    """Dispatch to the partition scheme named by ``spec``."""
    seed = spec.seed if spec.seed is not None else default_seed
    if spec.scheme == "dirichlet":
        return dirichlet_partition(labels, n_clients, spec.beta, seed)
    return label_shard_partition(labels, n_clients, spec.shards_per_client, seed)


def build_objectives(dataset: SyntheticDataset, parts) -> list[Objective]:
    """Turn per-client index lists into local objectives.

    Regression data becomes quadratic least-squares objectives;
    classification data becomes softmax objectives sharing the global
    class count (so every client optimizes in the same dimension).
    """
    objectives = []
    for idx in parts:
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            raise ContractViolationError("cannot build an objective for an empty client")
        rows = dataset.features[idx]
        if dataset.task == "regression":
            objectives.append(Objective.quadratic(rows, dataset.targets[idx]))
        else:
            objectives.append(
                Objective.logistic(rows, dataset.targets[idx], n_classes=dataset.classes)
            )
    return objectives


def load_delimited(path, task: str | None = None, delimiter: str = ",") -> SyntheticDataset:
    """Read a tabular dataset from a delimited text file.

    The file must carry a header row; every column is numeric and the
    last column is the label. Integer-valued label columns load as
    classification data unless ``task`` says otherwise.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ContractViolationError(f"{path} is empty, expected a header row")
    header = lines[0].split(delimiter)
    if len(header) < 2:
        raise ContractViolationError("need at least one feature column and a label column")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(delimiter)
        if len(fields) != len(header):
            raise ContractViolationError(
                f"{path} row {line_no}: expected {len(header)} fields, found {len(fields)}"
            )
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise ContractViolationError(f"{path} row {line_no}: {exc}") from exc
    if not rows:
        raise ContractViolationError(f"{path} has a header but no data rows")
    table = np.asarray(rows, dtype=float)
    features, labels = table[:, :-1], table[:, -1]
    integral = np.all(labels == np.round(labels))
    if task is None:
        task = "classification" if integral else "regression"
    if task == "classification":
        if not integral:
            raise ContractViolationError("classification labels must be integers")
        labels = labels.astype(int)
        return SyntheticDataset("classification", features, labels, classes=int(labels.max()) + 1)
    return SyntheticDataset("regression", features, labels)
