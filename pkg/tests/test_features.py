import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from clstm_bearing.audio_io import Frame
from clstm_bearing.errors import EmptySetError
from clstm_bearing.features import (
    STD_FLOOR, StandardizationStats, build_feature, build_features, compute_standardization,
    magnitude_spectrum,
)
from clstm_bearing.labels import FaultLabel


def frame(x, label=FaultLabel.NORMAL):
    return Frame(samples=np.asarray(x, dtype=float), frame_index=0, source_id="s", label=label)


def test_zero_frame_zero_spectrum():
    assert np.all(magnitude_spectrum(np.zeros(480)) == 0)


@pytest.mark.parametrize("n, k", [(480, 12), (4800, 37), (30, 1)])
def test_cosine_lines(n, k):
    a = 0.7
    t = np.arange(n)
    s = magnitude_spectrum(a * np.cos(2 * np.pi * k * t / n))
    assert abs(s[k] - a / 2) < 1e-12 and abs(s[n - k] - a / 2) < 1e-12
    rest = np.delete(s, [k, n - k])
    assert np.max(rest) < 1e-12


def test_hermitian_symmetry(rng):
    s = magnitude_spectrum(rng.standard_normal(4800))
    assert np.allclose(s[1:], s[1:][::-1], rtol=0, atol=1e-14)


def test_circular_shift_invariance(rng):
    x = rng.standard_normal(480)
    assert np.allclose(magnitude_spectrum(x), magnitude_spectrum(np.roll(x, 77)), atol=1e-14)


def test_stats_zero_frames_floor():
    st_ = compute_standardization([frame(np.zeros(8)), frame(np.zeros(8))])
    assert st_.mean_time == 0.0
    assert st_.std_time == STD_FLOOR
    assert st_.std_freq == STD_FLOOR


def test_stats_constant_one():
    assert compute_standardization([frame(np.ones(10))]).mean_time == 1.0


def test_stats_two_levels():
    st_ = compute_standardization([frame(np.zeros(6)), frame(np.full(6, 2.0))])
    assert st_.mean_time == pytest.approx(1.0, abs=1e-15)
    assert st_.std_time == pytest.approx(1.0, abs=1e-15)


def test_stats_need_frames():
    with pytest.raises(EmptySetError):
        compute_standardization([])


def test_feature_shape_and_metadata(rng):
    f = build_feature(frame(rng.uniform(-1, 1, 4800), FaultLabel.DRIVE_OUTER_SPALL),
                      StandardizationStats(0.0, 0.5, 0.01, 0.02))
    assert f.matrix.shape == (2, 4800)
    assert f.label is FaultLabel.DRIVE_OUTER_SPALL
    assert f.source_id == "s"


def test_mean_frame_centres_to_zero():
    stats = StandardizationStats(mean_time=0.25, std_time=0.1, mean_freq=0.0, std_freq=1.0)
    f = build_feature(frame(np.full(64, 0.25)), stats)
    assert np.all(f.matrix[0] == 0.0)


def test_identity_stats_pass_spectrum_through(rng):
    x = rng.standard_normal(480)
    f = build_feature(frame(x), StandardizationStats(0.0, 1.0, 0.0, 1.0))
    assert np.array_equal(f.matrix[0], x)
    assert np.array_equal(f.matrix[1], magnitude_spectrum(x))


def test_batch_equals_single(rng):
    x = rng.standard_normal((4, 120))
    stats = StandardizationStats(0.1, 2.0, 0.3, 0.5)
    batch = build_features(x, stats)
    for row, out in zip(x, batch):
        assert np.array_equal(build_feature(frame(row), stats).matrix, out)


def test_stats_round_trip_array():
    s = StandardizationStats(1.0, 2.0, 3.0, 4.0)
    assert StandardizationStats.from_array(s.as_array()) == s


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 60, elements=st.floats(-1e6, 1e6)))
def test_features_always_finite(x):
    stats = compute_standardization(x[None, :])
    assert np.all(np.isfinite(build_features(x[None, :], stats)))
