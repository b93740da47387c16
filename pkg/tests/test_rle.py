"""Run-length codec: frozen examples, identity round-trip, and overrun guard."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sp3d.errors import RleOverrun
from sp3d.rle import rle_decode, rle_encode


def test_all_background_is_one_zero_run():
    raster = np.zeros((4, 5), dtype=bool)
    assert rle_encode(raster).tolist() == [20]


def test_all_foreground_starts_with_empty_zero_run():
    raster = np.ones((4, 5), dtype=bool)
    assert rle_encode(raster).tolist() == [0, 20]


def test_hand_encoded_small_mask():
    raster = np.array([[0, 1, 1], [1, 0, 0]], dtype=bool)  # flat: 011100
    assert rle_encode(raster).tolist() == [1, 3, 2]
    np.testing.assert_array_equal(rle_decode(np.array([1, 3, 2]), 3, 2), raster)


def test_empty_raster_round_trip():
    raster = np.zeros((0, 0), dtype=bool)
    runs = rle_encode(raster)
    assert runs.size == 0
    assert rle_decode(runs, 0, 0).size == 0


def test_decode_rejects_wrong_total():
    with pytest.raises(RleOverrun):
        rle_decode(np.array([3, 3]), 4, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_round_trip_identity(w, h, seed):
    rng = np.random.default_rng(seed)
    raster = rng.random((h, w)) < rng.random()
    runs = rle_encode(raster)
    # alternating runs, starting with a (possibly empty) background run
    assert (np.asarray(runs)[1:] > 0).all()
    np.testing.assert_array_equal(rle_decode(runs, w, h), raster)
