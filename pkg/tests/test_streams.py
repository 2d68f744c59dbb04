import numpy as np
import pytest
from hypothesis import given, strategies as st

from stein_tc.streams import StreamKey, derive_seed, keys, lane_id


def test_same_key_same_numbers():
    a = StreamKey(42, "rw", 3).rng().standard_normal(100)
    b = StreamKey(42, "rw", 3).rng().standard_normal(100)
    assert np.array_equal(a, b)


@given(st.integers(0, 2**64 - 1), st.integers(0, 10_000))
def test_distinct_indices_and_lanes_differ(root, index):
    base = StreamKey(root, "x", index)
    draws = {
        base.rng().integers(0, 2**63, 4).tobytes(),
        base.at(index + 1).rng().integers(0, 2**63, 4).tobytes(),
        base.child("y").rng().integers(0, 2**63, 4).tobytes(),
        base.rng(1).integers(0, 2**63, 4).tobytes(),
        StreamKey(root, "y", index).rng().integers(0, 2**63, 4).tobytes(),
    }
    assert len(draws) == 5


def test_streams_are_uncorrelated():
    m = 20_000
    a = StreamKey(7, "lane", 0).rng().standard_normal(m)
    b = StreamKey(7, "lane", 1).rng().standard_normal(m)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(m)


def test_validation():
    with pytest.raises(ValueError):
        StreamKey(-1, "a")
    with pytest.raises(ValueError):
        StreamKey(2**64, "a")
    with pytest.raises(ValueError):
        StreamKey(0, "a", -1)


def test_derive_seed_is_stable_and_label_sensitive():
    assert derive_seed(1, "rate", 64) == derive_seed(1, "rate", 64)
    assert derive_seed(1, "rate", 64) != derive_seed(1, "rate", 128)
    assert 0 <= derive_seed(2**64 - 1, "x") < 2**64


def test_keys_and_lane_id():
    ks = keys(5, "moran", 3, start=10)
    assert [k.index for k in ks] == [10, 11, 12]
    assert lane_id("a") != lane_id("b")
    assert StreamKey(1, "a").child("b").lane == "a/b"
