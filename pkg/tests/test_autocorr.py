import numpy as np
import pytest

from dancegen.autocorr import autocorrelate, detect_peaks
from dancegen.exceptions import DegenerateInputError, DimensionError


def test_sine_first_peak_at_period():
    t = np.arange(300)
    corr = autocorrelate(np.sin(2 * np.pi * t / 30.0), max_lag=100)
    assert corr.peak_lags[0] == 30


def test_r0_is_one_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(5):
        corr = autocorrelate(rng.normal(size=400), max_lag=150)
        assert corr.values[0] == 1.0
        assert np.max(np.abs(corr.values)) <= 1.0 + 1e-6


def test_constant_sequence_rejected():
    with pytest.raises(DegenerateInputError):
        autocorrelate(np.full(100, 3.7), max_lag=10)


def test_length_vs_lag_validation():
    with pytest.raises(DimensionError):
        autocorrelate(np.arange(10.0), max_lag=10)
    with pytest.raises(DimensionError):
        autocorrelate(np.arange(10.0), max_lag=0)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_white_noise_has_no_strong_peaks(seed):
    x = np.random.default_rng(seed).normal(size=1000)
    corr = autocorrelate(x, max_lag=100)
    assert np.max(np.abs(corr.values[1:])) < 0.15


def test_affine_invariance_exact():
    # integer-valued data keeps every intermediate exact, so the normalized
    # correlogram of a*x + b is bit-identical for integer a > 0 and b
    x = np.random.default_rng(7).integers(-50, 50, size=500).astype(np.float64)
    base = autocorrelate(x, max_lag=60).values
    for a, b in [(2.0, 0.0), (3.0, 4.0), (7.0, -11.0)]:
        scaled = autocorrelate(a * x + b, max_lag=60).values
        assert np.array_equal(scaled, base)


def test_circular_shift_moves_peaks_at_most_one_frame():
    t = np.arange(240)
    x = np.sin(2 * np.pi * t / 24.0) + 0.3 * np.sin(4 * np.pi * t / 24.0)
    base_peaks = autocorrelate(x, max_lag=80).peak_lags
    for shift in [1, 5, 11, 17]:
        shifted = np.roll(x, shift)
        peaks = autocorrelate(shifted, max_lag=80).peak_lags
        assert len(peaks) == len(base_peaks)
        assert all(abs(p - q) <= 1 for p, q in zip(peaks, base_peaks))


def test_peaks_are_strict_local_maxima_above_threshold():
    values = np.array([1.0, 0.2, 0.5, 0.2, 0.09, 0.11, 0.09, 0.3, 0.3])
    assert detect_peaks(values) == [2, 5]
