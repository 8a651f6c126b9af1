import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camproxy.data import (
    FeatureDataset,
    LoadError,
    l2_normalize_rows,
    load_dataset,
    save_dataset,
)


def _toy_dataset(true_ids=True):
    feats = np.array(
        [
            [1.0, 0.0, 0.25],
            [0.0, 1.0, -0.5],
            [0.5, 0.5, 0.125],
            [-1.0, 2.0, 3.5],
        ]
    )
    return FeatureDataset(
        features=feats,
        camera_ids=np.array([1, 2, 1, 2]),
        instance_keys=("a", "b", "c", "d"),
        true_ids=np.array([7, 7, 9, 9]) if true_ids else None,
    )


class TestNormalize:
    def test_three_four_five(self):
        out = l2_normalize_rows(np.array([[3.0, 4.0]]))
        np.testing.assert_allclose(out, [[0.6, 0.8]], rtol=0, atol=1e-15)

    def test_unit_row_unchanged(self):
        row = np.array([[0.0, 1.0, 0.0]])
        np.testing.assert_array_equal(l2_normalize_rows(row), row)

    def test_random_norms(self):
        rng = np.random.default_rng(3)
        out = l2_normalize_rows(rng.standard_normal((100, 16)))
        norms = np.linalg.norm(out, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-12)

    def test_zero_row_named(self):
        m = np.ones((3, 4))
        m[1] = 0.0
        with pytest.raises(ValueError, match="row 1"):
            l2_normalize_rows(m)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_direction_preserved(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((5, 6)) + 0.01
        out = l2_normalize_rows(m)
        cos = np.einsum("ij,ij->i", out, m) / np.linalg.norm(m, axis=1)
        np.testing.assert_allclose(cos, 1.0, atol=1e-12)


class TestValidation:
    def test_rejects_nonfinite(self):
        feats = np.ones((2, 3))
        feats[1, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            FeatureDataset(feats, np.array([1, 1]), ("a", "b"))

    def test_rejects_zero_camera(self):
        with pytest.raises(ValueError, match="camera"):
            FeatureDataset(np.ones((2, 3)), np.array([0, 1]), ("a", "b"))

    def test_arrays_read_only(self):
        ds = _toy_dataset()
        with pytest.raises(ValueError):
            ds.features[0, 0] = 5.0


class TestCsvRoundTrip:
    def test_small_csv(self, tmp_path):
        ds = _toy_dataset()
        path = tmp_path / "data.csv"
        save_dataset(ds, path, format="csv")
        loaded = load_dataset(path, format="csv")
        assert loaded.equals(ds)
        assert loaded.num_instances == 4
        assert loaded.num_cameras == 2

    def test_without_true_ids(self, tmp_path):
        ds = _toy_dataset(true_ids=False)
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.true_ids is None
        assert loaded.equals(ds)

    def test_random_values_round_trip_exactly(self, tmp_path):
        rng = np.random.default_rng(19)
        ds = FeatureDataset(
            features=rng.standard_normal((25, 7)) * 10.0 ** rng.integers(-8, 8, size=(25, 1)),
            camera_ids=rng.integers(1, 4, size=25),
            instance_keys=tuple(f"key,with,commas {i}" for i in range(25)),
            true_ids=rng.integers(0, 9, size=25),
        )
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        assert load_dataset(path).equals(ds)

    def test_camera_reindexing(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text(
            "key,camera,f0,f1\n"
            "a,10,1.0,2.0\n"
            "b,30,3.0,4.0\n"
            "c,10,5.0,6.0\n"
        )
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.camera_ids, [1, 2, 1])

    def test_nan_row_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("key,camera,f0,f1\na,1,1.0,2.0\nb,1,nan,4.0\n")
        with pytest.raises(LoadError, match="row 2"):
            load_dataset(path)

    def test_short_row_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("key,camera,f0,f1\na,1,1.0,2.0\nb,1,3.0\n")
        with pytest.raises(LoadError, match="row 2"):
            load_dataset(path)

    def test_malformed_value_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("key,camera,f0,f1\na,1,1.0,oops\n")
        with pytest.raises(LoadError, match="row 1"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope.csv")


class TestBinaryRoundTrip:
    def test_round_trip(self, tmp_path):
        ds = _toy_dataset()
        path = tmp_path / "data.bin"
        save_dataset(ds, path, format="binary")
        loaded = load_dataset(path, format="binary")
        assert loaded.equals(ds)

    def test_round_trip_no_true_ids(self, tmp_path):
        ds = _toy_dataset(true_ids=False)
        path = tmp_path / "data.bin"
        save_dataset(ds, path, format="binary")
        loaded = load_dataset(path, format="binary")
        assert loaded.true_ids is None
        assert loaded.equals(ds)

    def test_random_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        ds = FeatureDataset(
            features=rng.standard_normal((37, 9)),
            camera_ids=rng.integers(1, 5, size=37),
            instance_keys=tuple(f"k{i:03d}" for i in range(37)),
            true_ids=rng.integers(0, 12, size=37),
        )
        path = tmp_path / "data.bin"
        save_dataset(ds, path, format="binary")
        assert load_dataset(path, format="binary").equals(ds)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "data.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(LoadError, match="magic"):
            load_dataset(path, format="binary")

    def test_truncated(self, tmp_path):
        ds = _toy_dataset()
        path = tmp_path / "data.bin"
        save_dataset(ds, path, format="binary")
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(LoadError, match="truncated"):
            load_dataset(path, format="binary")
