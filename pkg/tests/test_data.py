import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalsupport import (
    ConfigError,
    Dataset,
    DegenerateOutcomeError,
    DegenerateSampleError,
    MissingColumnError,
    MissingValueError,
    NonBinaryTreatmentError,
    load_csv,
    rng_for,
    write_csv,
)
from causalsupport.data import OutcomeTransform, child_seed, standardize_outcome

from conftest import make_dataset


class TestDataset:
    def test_basic_shapes(self):
        d = make_dataset([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], [0, 1, 0],
                         [1.0, 2.0, 3.0])
        assert d.n == 3
        assert d.p == 2
        assert d.names == ("x1", "x2")

    def test_arrays_are_frozen(self):
        d = make_dataset([[1.0], [2.0]], [0, 1], [0.0, 1.0])
        with pytest.raises(ValueError):
            d.y[0] = 99.0

    def test_defensive_copy(self):
        x = np.array([[1.0], [2.0]])
        d = make_dataset(x, [0, 1], [0.0, 1.0])
        x[0, 0] = -50.0
        assert d.x[0, 0] == 1.0

    def test_rejects_nonbinary_z(self):
        with pytest.raises(NonBinaryTreatmentError):
            make_dataset([[1.0], [2.0]], [0, 2], [0.0, 1.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(DegenerateSampleError):
            make_dataset([[np.nan], [2.0]], [0, 1], [0.0, 1.0])
        with pytest.raises(DegenerateSampleError):
            make_dataset([[1.0], [2.0]], [0, 1], [np.inf, 1.0])

    def test_rejects_bad_names(self):
        with pytest.raises(DegenerateSampleError):
            make_dataset([[1.0], [2.0]], [0, 1], [0.0, 1.0], names=("only",) * 2)

    def test_subset(self):
        d = make_dataset([[1.0], [2.0], [3.0]], [0, 1, 1], [5.0, 6.0, 7.0])
        s = d.subset(np.array([True, False, True]))
        assert s.n == 2
        assert list(s.y) == [5.0, 7.0]


class TestStandardize:
    def test_range_is_unit(self):
        d = make_dataset([[0.0], [1.0], [2.0]], [0, 1, 0], [3.0, 9.0, 5.0])
        s, t = standardize_outcome(d)
        assert s.y.min() == pytest.approx(-0.5)
        assert s.y.max() == pytest.approx(0.5)
        np.testing.assert_allclose(t.inverse(s.y), d.y)

    def test_constant_outcome_rejected(self):
        d = make_dataset([[0.0], [1.0]], [0, 1], [4.0, 4.0])
        with pytest.raises(DegenerateOutcomeError):
            standardize_outcome(d)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=12, unique=True))
    def test_roundtrip(self, ys):
        y = np.asarray(ys)
        n = y.size
        d = make_dataset(np.arange(n, dtype=float)[:, None],
                         np.arange(n) % 2, y)
        s, t = standardize_outcome(d)
        np.testing.assert_allclose(t.inverse(s.y), y, rtol=1e-12, atol=1e-9)

    def test_transform_apply_inverse(self):
        t = OutcomeTransform(shift=3.0, scale=2.0)
        assert t.apply(5.0) == pytest.approx(1.0)
        assert t.inverse(1.0) == pytest.approx(5.0)


class TestCsvRoundtrip:
    def test_roundtrip(self, tmp_path, rng):
        x = rng.normal(size=(9, 3))
        z = rng.integers(0, 2, size=9)
        z[:2] = [0, 1]
        y = rng.normal(size=9)
        d = Dataset(x, z, y, ("a", "b", "c"))
        path = tmp_path / "d.csv"
        write_csv(d, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.z, d.z)
        np.testing.assert_allclose(back.x, d.x, rtol=0, atol=0)
        np.testing.assert_allclose(back.y, d.y, rtol=0, atol=0)
        assert back.names == d.names

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("z,x1\n0,1.5\n1,2.5\n")
        with pytest.raises(MissingColumnError) as ei:
            load_csv(p)
        assert ei.value.details()["column"] == "y"

    def test_missing_value_position(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("z,y,x1\n0,1.0,2.0\n1,,3.0\n")
        with pytest.raises(MissingValueError) as ei:
            load_csv(p)
        assert ei.value.row == 2
        assert ei.value.column == "y"

    def test_nonbinary_treatment(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("z,y,x1\n0,1.0,2.0\n7,2.0,3.0\n")
        with pytest.raises(NonBinaryTreatmentError) as ei:
            load_csv(p)
        assert ei.value.row == 2

    def test_custom_column_names(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("treat,resp,age\n0,1.25,30\n1,2.5,40\n")
        d = load_csv(p, treatment_col="treat", outcome_col="resp")
        assert d.names == ("age",)
        assert list(d.z) == [0, 1]


class TestSeeding:
    def test_streams_disjoint(self):
        a = rng_for(5, "bart-chain").random(4)
        b = rng_for(5, "dgp").random(4)
        assert not np.allclose(a, b)

    def test_reproducible(self):
        a = rng_for(9, "matching", 2).random(6)
        b = rng_for(9, "matching", 2).random(6)
        np.testing.assert_array_equal(a, b)

    def test_key_sensitivity(self):
        a = rng_for(9, "study", 0, 1).random(4)
        b = rng_for(9, "study", 1, 0).random(4)
        assert not np.allclose(a, b)

    def test_child_seed_deterministic(self):
        assert child_seed(3, "study", 2, 5) == child_seed(3, "study", 2, 5)
        assert child_seed(3, "study", 2, 5) != child_seed(3, "study", 2, 6)

    def test_unknown_stream(self):
        with pytest.raises(ConfigError):
            rng_for(1, "no-such-stream")
