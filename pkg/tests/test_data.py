"""Tests for CSV ingestion, splits, and the bundled datasets."""

import logging

import numpy as np
import pytest

from conlex import InsufficientData, SchemaError, ingest_csv
from conlex.datasets import synth_diabetes, write_dataset_csv

from conftest import DATA_DIR


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


GOOD_ROWS = "a,b,label\n" + "".join(
    f"{i}.5,{-i},{'pos' if i % 2 else 'neg'}\n" for i in range(12)
)


class TestIngest:
    def test_round_trip_through_writer(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3)) * 100
        y = (rng.uniform(size=40) < 0.5).astype(int)
        path = write_dataset_csv(tmp_path / "rt.csv", X, y, ["u", "v", "w"])
        ds = ingest_csv(path, "label", seed=3)
        assert ds.feature_names == ["u", "v", "w"]
        assert ds.X.shape == (40, 3)
        np.testing.assert_allclose(ds.X, X, rtol=1e-9)
        np.testing.assert_array_equal(ds.y, y)
        assert ds.label_values == ["0", "1"]
        assert ds.name == "rt"

    def test_split_is_disjoint_and_exhaustive(self, tmp_path):
        ds = ingest_csv(_write(tmp_path, GOOD_ROWS), "label", split_fraction=0.75)
        ds.validate()
        assert len(ds.train_idx) == round(0.75 * 12)
        assert len(set(ds.train_idx) & set(ds.test_idx)) == 0
        assert sorted(np.concatenate([ds.train_idx, ds.test_idx]).tolist()) == list(range(12))
        assert np.all(np.diff(ds.train_idx) > 0)
        assert np.all(np.diff(ds.test_idx) > 0)

    def test_split_is_seeded(self, tmp_path):
        p = _write(tmp_path, GOOD_ROWS)
        a = ingest_csv(p, "label", seed=1)
        b = ingest_csv(p, "label", seed=1)
        c = ingest_csv(p, "label", seed=2)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert not np.array_equal(a.train_idx, c.train_idx)

    def test_label_column_by_position(self, tmp_path):
        p = _write(tmp_path, GOOD_ROWS)
        by_name = ingest_csv(p, "label", seed=0)
        by_pos = ingest_csv(p, 2, seed=0)
        np.testing.assert_array_equal(by_name.X, by_pos.X)
        np.testing.assert_array_equal(by_name.y, by_pos.y)
        assert by_pos.feature_names == ["a", "b"]

    def test_bad_rows_are_dropped_and_logged(self, tmp_path, caplog):
        text = (
            "a,b,label\n"
            + "".join(f"{i},1,x\n{i},2,y\n" for i in range(6))
            + "1,2\n"            # wrong arity
            + "1,2,\n"           # missing label
            + "oops,2,x\n"       # unparseable feature
            + "inf,2,y\n"        # non-finite feature
        )
        with caplog.at_level(logging.INFO, logger="conlex.data"):
            ds = ingest_csv(_write(tmp_path, text), "label")
        assert ds.n == 12
        assert "dropped 4" in caplog.text

    def test_labels_sort_numerically_when_numeric(self, tmp_path):
        text = "a,label\n" + "".join(f"{i},10\n{i},2\n" for i in range(6))
        ds = ingest_csv(_write(tmp_path, text), "label")
        assert ds.label_values == ["2", "10"]
        assert ds.y[0] == 1 and ds.y[1] == 0

    def test_labels_sort_lexicographically_otherwise(self, tmp_path):
        text = "a,label\n" + "".join(f"{i},malignant\n{i},benign\n" for i in range(6))
        ds = ingest_csv(_write(tmp_path, text), "label")
        assert ds.label_values == ["benign", "malignant"]

    def test_stats_cover_the_train_split_only(self, tmp_path):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 2))
        y = (rng.uniform(size=50) < 0.5).astype(int)
        path = write_dataset_csv(tmp_path / "s.csv", X, y, ["a", "b"])
        ds = ingest_csv(path, "label", seed=4)
        st = ds.stats()
        np.testing.assert_allclose(st.mean, ds.X[ds.train_idx].mean(axis=0))
        np.testing.assert_allclose(st.std, ds.X[ds.train_idx].std(axis=0))


class TestIngestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_csv(tmp_path / "absent.csv", "label")

    def test_empty_file(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_csv(_write(tmp_path, ""), "label")

    def test_unknown_label_name(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_csv(_write(tmp_path, GOOD_ROWS), "target")

    def test_label_index_out_of_range(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_csv(_write(tmp_path, GOOD_ROWS), 3)

    def test_bad_split_fraction(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_csv(_write(tmp_path, GOOD_ROWS), "label", split_fraction=0.0)

    def test_too_few_usable_rows(self, tmp_path):
        text = "a,label\n1,x\n2,y\n3,x\n"
        with pytest.raises(InsufficientData):
            ingest_csv(_write(tmp_path, text), "label")

    def test_single_class_label(self, tmp_path):
        text = "a,label\n" + "".join(f"{i},same\n" for i in range(12))
        with pytest.raises(InsufficientData):
            ingest_csv(_write(tmp_path, text), "label")


class TestBundledDatasets:
    def test_breast_cancer_shape(self):
        ds = ingest_csv(DATA_DIR / "breast_cancer.csv", "diagnosis", seed=0)
        assert ds.X.shape == (569, 30)
        assert ds.label_values == ["B", "M"]
        counts = np.bincount(ds.y)
        assert counts.tolist() == [357, 212]

    def test_diabetes_shape(self):
        ds = ingest_csv(DATA_DIR / "diabetes_synth.csv", "outcome", seed=0)
        assert ds.X.shape == (768, 8)
        assert len(ds.label_values) == 2
        # positive rate near the original cohort's ~35%
        assert 0.25 <= ds.y.mean() <= 0.45

    def test_diabetes_standin_is_deterministic(self, tmp_path):
        X1, y1, names = synth_diabetes(seed=7)
        X2, y2, _ = synth_diabetes(seed=7)
        np.testing.assert_array_equal(X1, X2)
        np.testing.assert_array_equal(y1, y2)
        # the bundled file is exactly the seed-7 draw
        p = write_dataset_csv(tmp_path / "d.csv", X1, y1, names, label_name="outcome")
        assert p.read_text() == (DATA_DIR / "diabetes_synth.csv").read_text()
