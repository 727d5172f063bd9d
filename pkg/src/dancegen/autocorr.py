"""Lag-domain autocorrelation with peak detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionError

PEAK_THRESHOLD = 0.1


@dataclass
class Correlogram:
    """Normalized autocorrelation r[0..max_lag] plus detected peak lags."""

    values: np.ndarray
    peak_lags: list[int] = field(default_factory=list)

    @property
    def max_lag(self) -> int:
        return self.values.size - 1


def detect_peaks(values: np.ndarray, threshold: float = PEAK_THRESHOLD) -> list[int]:
    """Strict local maxima above ``threshold``, ascending lag order."""
    peaks = []
    for lag in range(1, values.size - 1):
        if values[lag] > values[lag - 1] and values[lag] > values[lag + 1] and values[lag] > threshold:
            peaks.append(lag)
    return peaks


def autocorrelate(sequence, max_lag: int) -> Correlogram:
    """Mean-removed, r[0]-normalized autocorrelation.

    r[lag] = sum_t (x[t]-mean)(x[t+lag]-mean) / sum_t (x[t]-mean)^2, which
    keeps |r| <= 1 and makes the result exactly invariant to positive
    affine rescaling of the input.
    """
    x = np.asarray(sequence, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("autocorrelate expects a 1-D sequence")
    if max_lag < 1 or x.size <= max_lag:
        raise DimensionError(f"need length > max_lag >= 1, got {x.size} and {max_lag}")
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise DegenerateInputError("zero-variance sequence has no periodic structure")
    values = np.empty(max_lag + 1)
    values[0] = 1.0
    for lag in range(1, max_lag + 1):
        values[lag] = float(centered[:-lag] @ centered[lag:]) / denom
    return Correlogram(values, detect_peaks(values))
