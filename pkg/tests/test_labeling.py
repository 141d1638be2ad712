import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import label_ref, smooth_ref
from thermaug.errors import BadWindow
from thermaug.labeling import TrendClass, classify, label_records, label_series, smooth_ma

finite = st.floats(-50, 50, allow_nan=False)


def test_trend_class_values():
    assert [int(c) for c in TrendClass] == [0, 1, 2]


def test_smooth_constant_unchanged():
    x = np.full(50, 0.1)
    assert np.array_equal(smooth_ma(x, 5), x)


def test_smooth_window_one_identity(rng):
    x = rng.normal(size=30)
    assert np.array_equal(smooth_ma(x, 1), x)


def test_smooth_spike_hand_example():
    # a window of 5 spreads the spike at index 3 over indices 1..5
    out = smooth_ma([0, 0, 0, 5, 0, 0, 0], 5)
    assert np.allclose(out, [0, 1, 1, 1, 1, 1, 0], atol=1e-15)


@pytest.mark.parametrize("w", [0, 2, 9])
def test_smooth_bad_window(w):
    with pytest.raises(BadWindow):
        smooth_ma(np.zeros(7), w)


@given(arrays(float, st.integers(5, 40), elements=finite), st.sampled_from([1, 3, 5]))
def test_smooth_matches_oracle(x, w):
    out = smooth_ma(x, w)
    assert out.shape == x.shape
    assert np.allclose(out, smooth_ref(list(x), w), rtol=1e-12, atol=1e-12)


def test_fixture_classes():
    t = np.arange(240.0)
    ramp = 20 + 0.1 * t
    assert classify(ramp) == 0
    assert classify(-ramp) == 1
    sine = 20 + 3 * np.sin(2 * np.pi * 2 * t / 180)
    assert classify(sine) == 2
    assert classify(np.full(240, 21.0)) == 2


def _sim_values(records):
    return [r.values for r in records]


def test_labels_match_oracle(sim_records):
    for r in sim_records:
        assert label_series(r) == label_ref(r.values)


def test_label_records_attaches_labels(sim_records):
    assert all(r.label in (0, 1, 2) for r in sim_records)
    relabeled = label_records(sim_records)
    assert [r.label for r in relabeled] == [r.label for r in sim_records]


@given(st.integers(0, 146), st.floats(-100, 100))
def test_antisymmetry_and_shift(sim_records, i, c):
    x = sim_records[i].values
    lab = classify(x)
    neg = classify(-x)
    assert (neg == 1) == (lab == 0)
    assert (neg == 0) == (lab == 1)
    assert (neg == 2) == (lab == 2)
    assert classify(x + c) == lab


@given(st.integers(0, 146), arrays(float, 60, elements=st.floats(-1e3, 1e3)))
def test_last_hour_irrelevant(sim_records, i, tail):
    x = sim_records[i].values.copy()
    lab = classify(x)
    x[180:] = tail
    assert classify(x) == lab


def test_negative_tolerance_rejected():
    with pytest.raises(ValueError):
        classify(np.zeros(240), eps_slope=-1)
