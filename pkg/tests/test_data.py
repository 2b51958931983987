import json
import warnings

import numpy as np
import pytest

from dgcn.data import (
    DataFormatError,
    SynthConfig,
    load_dataset,
    load_matrix,
    save_matrix,
    synth_dataset,
    write_dataset,
)
from dgcn.graphs import homophily_ratio
from dgcn.metrics import clustering_accuracy, kmeans


def write_fixture(tmp_path, features, edges, labels, n, d, c, name="fixture"):
    (tmp_path / "features.csv").write_text(features)
    (tmp_path / "edges.tsv").write_text(edges)
    manifest = {
        "name": name,
        "n": n,
        "d": d,
        "c": c,
        "features": "features.csv",
        "edges": "edges.tsv",
        "labels": None,
    }
    if labels is not None:
        (tmp_path / "labels.csv").write_text(labels)
        manifest["labels"] = "labels.csv"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


class TestLoadDataset:
    def test_three_node_fixture_exact(self, tmp_path):
        path = write_fixture(
            tmp_path,
            features="1.0,2.0\n3.5,-1.0\n0.0,0.25\n",
            edges="0\t1\n1\t2\t0.5\n",
            labels="0\n1\n0\n",
            n=3,
            d=2,
            c=2,
        )
        ds = load_dataset(path)
        assert np.array_equal(ds.features, [[1.0, 2.0], [3.5, -1.0], [0.0, 0.25]])
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 0] = 1.0
        expected[1, 2] = expected[2, 1] = 0.5
        assert np.array_equal(ds.graph.adj, expected)
        assert np.array_equal(ds.labels.labels, [0, 1, 0])
        assert ds.clusters == 2

    def test_self_loop_dropped_with_warning(self, tmp_path):
        path = write_fixture(
            tmp_path, "0.0\n1.0\n", "0\t0\n0\t1\n", "0\n1\n", n=2, d=1, c=2
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ds = load_dataset(path)
        assert ds.graph.adj[0, 0] == 0.0
        assert any("self-loop" in str(w.message) for w in caught)

    def test_labels_optional(self, tmp_path):
        path = write_fixture(tmp_path, "0.0\n1.0\n", "0\t1\n", None, n=2, d=1, c=2)
        assert load_dataset(path).labels is None

    def test_wrong_column_count_names_line(self, tmp_path):
        path = write_fixture(tmp_path, "1.0,2.0\n3.0\n", "0\t1\n", None, n=2, d=2, c=2)
        with pytest.raises(DataFormatError, match="line 2"):
            load_dataset(path)

    def test_non_numeric_cell_names_position(self, tmp_path):
        path = write_fixture(tmp_path, "1.0,x\n1.0,2.0\n", "0\t1\n", None, n=2, d=2, c=2)
        with pytest.raises(DataFormatError, match="line 1, column 2"):
            load_dataset(path)

    def test_out_of_range_node_id(self, tmp_path):
        path = write_fixture(tmp_path, "1.0\n2.0\n", "0\t5\n", None, n=2, d=1, c=2)
        with pytest.raises(DataFormatError, match="out of range"):
            load_dataset(path)

    def test_row_count_mismatch(self, tmp_path):
        path = write_fixture(tmp_path, "1.0\n", "0\t1\n", None, n=2, d=1, c=2)
        with pytest.raises(DataFormatError, match="expected 2 feature rows"):
            load_dataset(path)

    def test_label_out_of_class_range(self, tmp_path):
        path = write_fixture(tmp_path, "1.0\n2.0\n", "0\t1\n", "0\n7\n", n=2, d=1, c=2)
        with pytest.raises(DataFormatError, match="label ids"):
            load_dataset(path)

    def test_missing_manifest_key(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"name": "x", "n": 1}))
        with pytest.raises(DataFormatError, match="missing key"):
            load_dataset(path)

    def test_missing_manifest_file(self, tmp_path):
        with pytest.raises(DataFormatError, match="not found"):
            load_dataset(tmp_path / "nope.json")


class TestSynthDataset:
    def test_full_homophily_realized_exactly(self):
        ds = synth_dataset(
            SynthConfig(n=60, c=3, d=4, homophily=1.0, mean_degree=6, feature_noise=0.1, seed=0)
        )
        assert homophily_ratio(ds.graph, ds.labels, 1) == 1.0

    def test_target_homophily_concentrates(self):
        vals = []
        for seed in range(20):
            ds = synth_dataset(
                SynthConfig(
                    n=200, c=5, d=8, homophily=0.1, mean_degree=10, feature_noise=0.2, seed=seed
                )
            )
            vals.append(homophily_ratio(ds.graph, ds.labels, 1))
        assert abs(float(np.mean(vals)) - 0.1) < 0.03

    def test_realized_matches_edge_fraction_counting(self):
        ds = synth_dataset(
            SynthConfig(n=100, c=4, d=4, homophily=0.3, mean_degree=8, feature_noise=0.1, seed=3)
        )
        adj = ds.graph.adj
        labels = ds.labels.labels
        ii, jj = np.nonzero(np.triu(adj, k=1))
        within = sum(1 for i, j in zip(ii, jj) if labels[i] == labels[j])
        assert homophily_ratio(ds.graph, ds.labels, 1) == pytest.approx(within / len(ii))

    def test_noiseless_features_trivially_clusterable(self):
        ds = synth_dataset(
            SynthConfig(n=50, c=3, d=4, homophily=0.5, mean_degree=5, feature_noise=0.0, seed=1)
        )
        _, labels = kmeans(ds.features, 3, seed=0)
        assert clustering_accuracy(labels, ds.labels.labels) == 1.0

    def test_deterministic_per_seed(self):
        cfg = SynthConfig(n=40, c=2, d=4, homophily=0.4, mean_degree=4, feature_noise=0.3, seed=9)
        a, b = synth_dataset(cfg), synth_dataset(cfg)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.graph.adj, b.graph.adj)

    def test_realized_homophily_monotone_in_target(self):
        realized = []
        for h in (0.1, 0.3, 0.5, 0.7, 0.9):
            ds = synth_dataset(
                SynthConfig(n=300, c=3, d=4, homophily=h, mean_degree=12, feature_noise=0.1, seed=5)
            )
            realized.append(homophily_ratio(ds.graph, ds.labels, 1))
        assert all(b > a for a, b in zip(realized, realized[1:]))

    def test_infeasible_combination_reports_range(self):
        with pytest.raises(ValueError, match="feasible homophily range"):
            synth_dataset(
                SynthConfig(n=20, c=2, d=4, homophily=1.0, mean_degree=15, feature_noise=0.1)
            )

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(n=5, c=6, d=8, homophily=0.5, mean_degree=2, feature_noise=0.1)
        with pytest.raises(ValueError):
            SynthConfig(n=10, c=3, d=2, homophily=0.5, mean_degree=2, feature_noise=0.1)


class TestMatrixRoundTrip:
    def test_empty_matrix(self, tmp_path):
        path = tmp_path / "m.mat"
        save_matrix(path, np.zeros((0, 0)))
        out = load_matrix(path)
        assert out.shape == (0, 0)

    def test_random_matrix_bitwise(self, tmp_path):
        rng = np.random.default_rng(11)
        M = rng.normal(size=(7, 3))
        path = tmp_path / "m.mat"
        save_matrix(path, M)
        assert np.array_equal(load_matrix(path), M)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_bytes(b"WRONGMAG" + b"\x00" * 8)
        with pytest.raises(DataFormatError, match="bad magic"):
            load_matrix(path)

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "m.mat"
        save_matrix(path, np.ones((4, 4)))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError, match="truncated"):
            load_matrix(path)


class TestWriteDataset:
    def test_round_trip(self, tmp_path):
        ds = synth_dataset(
            SynthConfig(n=30, c=3, d=4, homophily=0.6, mean_degree=4, feature_noise=0.2, seed=2)
        )
        manifest_path = write_dataset(ds, tmp_path / "out")
        loaded = load_dataset(manifest_path)
        assert np.allclose(loaded.features, ds.features, atol=0, rtol=0)
        assert np.array_equal(loaded.graph.adj, ds.graph.adj)
        assert np.array_equal(loaded.labels.labels, ds.labels.labels)
