"""Container validation and the band-statistics feature reduction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segrel.datamodel import (
    AttributeTable,
    FeatureMatrix,
    PredictionStack,
    reduce_bands,
)
from segrel.errors import DataError, NonFiniteValuesError


class TestFeatureMatrix:
    def test_basic(self):
        fm = FeatureMatrix(("a", "b"), np.zeros((2, 3)), "raw")
        assert fm.n_samples == 2
        assert fm.n_features == 3
        assert fm.values.dtype == np.float64

    def test_id_count_mismatch(self):
        with pytest.raises(DataError):
            FeatureMatrix(("a",), np.zeros((2, 3)), "raw")

    def test_duplicate_ids(self):
        with pytest.raises(DataError):
            FeatureMatrix(("a", "a"), np.zeros((2, 3)), "raw")

    def test_bad_space_tag(self):
        with pytest.raises(DataError):
            FeatureMatrix(("a",), np.zeros((1, 3)), "latent")

    def test_non_finite(self):
        with pytest.raises(NonFiniteValuesError):
            FeatureMatrix(("a",), np.array([[np.inf]]), "raw")

    def test_values_read_only(self):
        fm = FeatureMatrix(("a",), np.zeros((1, 3)), "embedding")
        with pytest.raises(ValueError):
            fm.values[0, 0] = 1.0

    def test_canonical_order_sorts_by_id(self):
        fm = FeatureMatrix(
            ("c", "a", "b"), np.array([[3.0], [1.0], [2.0]]), "raw"
        )
        ordered = fm.canonical_order()
        assert ordered.sample_ids == ("a", "b", "c")
        np.testing.assert_array_equal(ordered.values[:, 0], [1.0, 2.0, 3.0])


class TestPredictionStack:
    def test_valid(self):
        st_ = PredictionStack("s", np.full((3, 4, 5), 0.5))
        assert st_.n_members == 3
        assert st_.image_shape == (4, 5)

    def test_rejects_out_of_range_probs(self):
        with pytest.raises(DataError):
            PredictionStack("s", np.full((1, 2, 2), 1.5))

    def test_rejects_nan_probs(self):
        with pytest.raises(DataError):
            PredictionStack("s", np.full((1, 2, 2), np.nan))

    def test_rejects_2d(self):
        with pytest.raises(DataError):
            PredictionStack("s", np.full((2, 2), 0.5))

    def test_mask_shape_checked(self):
        with pytest.raises(DataError):
            PredictionStack(
                "s", np.full((1, 2, 2), 0.5), mask=np.zeros((3, 3), dtype=np.uint8)
            )

    def test_mask_must_be_binary(self):
        with pytest.raises(DataError):
            PredictionStack(
                "s", np.full((1, 2, 2), 0.5), mask=np.full((2, 2), 2, dtype=np.uint8)
            )


class TestAttributeTable:
    CSV = "scene_id,elevation,river_area\ns1,10.5,\ns2,,3.25\n"

    def test_parse_missing_as_none(self):
        table = AttributeTable.from_csv_text(self.CSV)
        assert table.columns == ["elevation", "river_area"]
        assert table.get("s1", "elevation") == 10.5
        assert table.get("s1", "river_area") is None
        assert table.get("s2", "elevation") is None
        assert table.get("s2", "river_area") == 3.25
        assert table.get("missing-scene", "elevation") is None

    def test_round_trip(self):
        table = AttributeTable.from_csv_text(self.CSV)
        again = AttributeTable.from_csv_text(table.to_csv_text())
        assert again.columns == table.columns
        assert again.rows == table.rows

    def test_rejects_missing_scene_id_header(self):
        with pytest.raises(DataError):
            AttributeTable.from_csv_text("id,elevation\ns1,2\n")

    def test_rejects_duplicate_rows(self):
        with pytest.raises(DataError):
            AttributeTable.from_csv_text("scene_id,a\ns1,1\ns1,2\n")

    def test_rejects_non_numeric(self):
        with pytest.raises(DataError):
            AttributeTable.from_csv_text("scene_id,a\ns1,high\n")

    def test_rejects_wrong_field_count(self):
        with pytest.raises(DataError):
            AttributeTable.from_csv_text("scene_id,a,b\ns1,1\n")


class TestReduceBands:
    def test_known_values(self):
        # band 0: constant 3 -> mean 3, std 0
        # band 1: [0, 2] -> mean 1, population std 1
        chip = np.stack(
            [np.full((1, 2), 3.0), np.array([[0.0, 2.0]])]
        )
        out = reduce_bands(chip)
        np.testing.assert_allclose(out, [3.0, 1.0, 0.0, 1.0])

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        chip = rng.uniform(size=(4, 7, 5))
        out = reduce_bands(chip)
        for b in range(4):
            flat = chip[b].ravel()
            assert out[b] == pytest.approx(flat.mean(), abs=1e-12)
            mean = flat.mean()
            var = ((flat - mean) ** 2).mean()  # population variance
            assert out[4 + b] == pytest.approx(np.sqrt(var), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_invariant_under_pixel_permutation(self, seed):
        rng = np.random.default_rng(seed)
        chip = rng.uniform(size=(3, 4, 4))
        perm = rng.permutation(16)
        shuffled = chip.reshape(3, 16)[:, perm].reshape(3, 4, 4)
        np.testing.assert_allclose(
            reduce_bands(chip), reduce_bands(shuffled), atol=1e-12
        )

    def test_output_length_is_twice_bands(self):
        assert reduce_bands(np.zeros((6, 2, 2))).shape == (12,)

    def test_rejects_non_finite(self):
        chip = np.zeros((1, 2, 2))
        chip[0, 0, 0] = np.nan
        with pytest.raises(NonFiniteValuesError):
            reduce_bands(chip)

    def test_rejects_2d(self):
        with pytest.raises(DataError):
            reduce_bands(np.zeros((2, 2)))
