import numpy as np
import pytest

from fedback import (
    ContractViolationError,
    PartitionSpec,
    build_objectives,
    dirichlet_partition,
    generate_synthetic,
    label_shard_partition,
    load_delimited,
    partition_indices,
    quantile_bins,
)


def assert_exact_cover(parts, n):
    merged = np.concatenate([np.asarray(p) for p in parts])
    assert len(merged) == n
    assert np.array_equal(np.sort(merged), np.arange(n))


class TestGenerateSynthetic:
    def test_rejects_empty(self):
        with pytest.raises(ContractViolationError):
            generate_synthetic("regression", 0, 3)

    def test_deterministic_per_seed(self):
        a = generate_synthetic("regression", 50, 4, seed=7)
        b = generate_synthetic("regression", 50, 4, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)
        c = generate_synthetic("regression", 50, 4, seed=8)
        assert not np.array_equal(a.targets, c.targets)

    def test_planted_parameter_recovered_by_least_squares(self):
        ds = generate_synthetic("regression", 500, 5, seed=3, noise=0.05)
        gram = ds.features.T @ ds.features
        estimate = np.linalg.solve(gram, ds.features.T @ ds.targets)
        # Four standard deviations of the least-squares error scale.
        bound = 4.0 * ds.noise * np.sqrt(np.trace(np.linalg.inv(gram)))
        assert np.linalg.norm(estimate - ds.planted) <= bound

    def test_classification_shape_and_balance(self):
        ds = generate_synthetic("classification", 120, 4, classes=3, seed=5)
        assert ds.features.shape == (120, 4)
        assert set(np.unique(ds.targets)) == {0, 1, 2}
        counts = np.bincount(ds.targets)
        assert counts.max() - counts.min() <= 1

    def test_unknown_task(self):
        with pytest.raises(ContractViolationError):
            generate_synthetic("ranking", 10, 2)


class TestDirichletPartition:
    def test_single_client_takes_everything(self):
        labels = np.array([0, 1, 0, 2, 1])
        parts = dirichlet_partition(labels, 1, beta=0.5, seed=0)
        assert len(parts) == 1
        assert np.array_equal(parts[0], np.arange(5))

    def test_exact_cover_and_disjoint(self):
        ds = generate_synthetic("classification", 600, 3, classes=5, seed=1)
        for seed in range(3):
            parts = dirichlet_partition(ds.targets, 12, beta=0.5, seed=seed)
            assert_exact_cover(parts, 600)

    def test_large_concentration_is_nearly_uniform(self):
        # 10 classes x 2000 samples over 10 clients: each client's class
        # histogram lands within 20 percent of the uniform count of 200
        # (the multinomial noise is about 13, so 20 percent is 3 sigma).
        ds = generate_synthetic("classification", 20_000, 3, classes=10, seed=4)
        parts = dirichlet_partition(ds.targets, 10, beta=1000.0, seed=2)
        for idx in parts:
            hist = np.bincount(ds.targets[idx], minlength=10)
            assert np.all(hist >= 0.8 * 200)
            assert np.all(hist <= 1.2 * 200)

    def test_small_concentration_skews_clients(self):
        ds = generate_synthetic("classification", 5000, 3, classes=10, seed=4)
        skewed = dirichlet_partition(ds.targets, 100, beta=0.5, seed=2)
        uniform = dirichlet_partition(ds.targets, 100, beta=1000.0, seed=2)

        def median_classes(parts):
            return float(np.median([len(np.unique(ds.targets[idx])) for idx in parts]))

        assert median_classes(skewed) < median_classes(uniform)

    def test_deterministic(self):
        labels = np.arange(200) % 4
        a = dirichlet_partition(labels, 8, beta=0.5, seed=9)
        b = dirichlet_partition(labels, 8, beta=0.5, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_impossible_split_errors_after_bounded_retries(self):
        with pytest.raises(ContractViolationError):
            dirichlet_partition(np.zeros(3, dtype=int), 10, beta=0.5, seed=0)

    def test_validation(self):
        with pytest.raises(ContractViolationError):
            dirichlet_partition([0, 1], 2, beta=0.0)
        with pytest.raises(ContractViolationError):
            dirichlet_partition([0, 1], 0, beta=0.5)


class TestLabelShardPartition:
    def test_two_shards_cap_label_diversity(self):
        # Balanced pool: every label count is a multiple of the shard size,
        # so shards are single-label and clients see at most two labels.
        labels = np.repeat(np.arange(10), 60)
        for seed in range(3):
            parts = label_shard_partition(labels, 30, shards_per_client=2, seed=seed)
            assert_exact_cover(parts, 600)
            for idx in parts:
                assert len(np.unique(labels[idx])) <= 2

    def test_single_client(self):
        labels = np.array([1, 0, 2, 1])
        parts = label_shard_partition(labels, 1, shards_per_client=2, seed=0)
        assert np.array_equal(parts[0], np.arange(4))

    def test_equal_client_sizes(self):
        labels = np.repeat(np.arange(5), 40)
        parts = label_shard_partition(labels, 10, shards_per_client=2, seed=1)
        assert {len(p) for p in parts} == {20}

    def test_indivisible_pool_rejected(self):
        with pytest.raises(ContractViolationError):
            label_shard_partition(np.zeros(10, dtype=int), 3, shards_per_client=2, seed=0)


class TestQuantileBins:
    def test_bins_cover_range(self):
        values = np.random.default_rng(0).standard_normal(1000)
        bins = quantile_bins(values, 10)
        assert bins.min() == 0
        assert bins.max() == 9
        counts = np.bincount(bins, minlength=10)
        assert counts.min() >= 80

    def test_single_bin(self):
        assert np.array_equal(quantile_bins([1.0, 2.0, 3.0], 1), np.zeros(3, dtype=int))


class TestPartitionDispatch:
    def test_dispatch_and_objectives(self):
        ds = generate_synthetic("classification", 300, 4, classes=3, seed=0)
        spec = PartitionSpec(scheme="dirichlet", beta=0.5, seed=1)
        parts = partition_indices(ds.targets, 6, spec)
        objectives = build_objectives(ds, parts)
        assert len(objectives) == 6
        assert {obj.dim for obj in objectives} == {4 * 3}

    def test_regression_objectives(self):
        ds = generate_synthetic("regression", 200, 3, seed=0)
        parts = partition_indices(quantile_bins(ds.targets, 5), 4, PartitionSpec(seed=2))
        objectives = build_objectives(ds, parts)
        assert all(obj.kind == "quadratic" for obj in objectives)
        assert sum(obj.n_samples for obj in objectives) == 200

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ContractViolationError):
            PartitionSpec(scheme="round_robin")


class TestLoadDelimited:
    def test_roundtrip_classification(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x0,x1,label\n0.5,1.0,0\n-1.0,2.0,1\n0.0,0.0,2\n")
        ds = load_delimited(path)
        assert ds.task == "classification"
        assert ds.classes == 3
        assert ds.features.shape == (3, 2)
        assert np.array_equal(ds.targets, [0, 1, 2])

    def test_regression_detection(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x0,y\n0.5,1.25\n1.0,-0.5\n")
        ds = load_delimited(path)
        assert ds.task == "regression"
        assert ds.targets == pytest.approx([1.25, -0.5])

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x0,y\n0.5,1.0\n0.5\n")
        with pytest.raises(ContractViolationError, match="row 3"):
            load_delimited(path)

    def test_non_numeric_field_names_line(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x0,y\nfoo,1.0\n")
        with pytest.raises(ContractViolationError, match="row 2"):
            load_delimited(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("")
        with pytest.raises(ContractViolationError):
            load_delimited(path)
