"""Motion periodicity analysis: per-axis autocorrelation vs the music beat.

For each axis the 15 joint trajectories are autocorrelated individually,
the correlograms averaged, and peaks re-detected on the average. A motion
is "on the beat" when its first or second averaged peak falls within a
small tolerance of the beat period or of twice the beat period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autocorr import Correlogram, autocorrelate, detect_peaks
from .exceptions import DegenerateInputError, DimensionError
from .skeleton import SkeletonSequence

DEFAULT_TOLERANCE = 2.0
AXES = ("x", "y")


@dataclass(frozen=True)
class BeatGrid:
    """Beat period in frames, from BPM or explicit beat positions."""

    period: float
    beats: tuple = ()

    def __post_init__(self):
        if not self.period > 1.0:
            raise DimensionError(f"beat period must exceed one frame, got {self.period}")
        if any(b2 <= b1 for b1, b2 in zip(self.beats, self.beats[1:])):
            raise DimensionError("explicit beats must be strictly increasing")

    @classmethod
    def from_bpm(cls, bpm: float, fps: float) -> "BeatGrid":
        if bpm <= 0 or fps <= 0:
            raise DimensionError("bpm and fps must be positive")
        return cls(period=60.0 * fps / bpm)

    @classmethod
    def from_beats(cls, beats) -> "BeatGrid":
        beats = tuple(int(b) for b in beats)
        if len(beats) < 2:
            raise DimensionError("need at least two beat positions")
        diffs = np.diff(beats)
        return cls(period=float(np.median(diffs)), beats=beats)


def motion_autocorrelation(seq: SkeletonSequence, max_lag: int) -> dict[str, Correlogram]:
    """Averaged per-axis correlograms over all joints with motion.

    Joints that are exactly constant on an axis are excluded; an axis with
    no moving joint at all is degenerate.
    """
    coords = seq.coords()  # (T, 15, 2)
    if coords.shape[0] <= max_lag:
        raise DimensionError(f"need more than {max_lag} frames, got {coords.shape[0]}")
    out: dict[str, Correlogram] = {}
    for axis_idx, axis in enumerate(AXES):
        stacks = []
        for j in range(coords.shape[1]):
            track = coords[:, j, axis_idx]
            if track.max() == track.min():
                continue
            stacks.append(autocorrelate(track, max_lag).values)
        if not stacks:
            raise DegenerateInputError(f"every joint is constant on the {axis} axis")
        mean_values = np.mean(np.stack(stacks), axis=0)
        out[axis] = Correlogram(mean_values, detect_peaks(mean_values))
    return out


def _axis_verdict(correlogram: Correlogram, grid: BeatGrid, tolerance: float) -> dict:
    candidates = correlogram.peak_lags[:2]
    if not candidates:
        return {"status": "no_peak", "peak_index": None, "peak_lag": None,
                "beat_multiple": None, "offset_frames": None}
    best = None
    for peak_index, lag in enumerate(candidates, start=1):
        for multiple in (1, 2):
            offset = lag - multiple * grid.period
            key = (abs(offset), peak_index, multiple)
            if best is None or key < best[0]:
                best = (key, peak_index, lag, multiple, offset)
    _, peak_index, lag, multiple, offset = best
    matched = abs(offset) <= tolerance
    return {"status": "matched" if matched else "unmatched",
            "peak_index": peak_index, "peak_lag": lag,
            "beat_multiple": multiple, "offset_frames": float(offset)}


def beat_alignment(correlograms: dict[str, Correlogram], grid: BeatGrid,
                   tolerance: float = DEFAULT_TOLERANCE) -> dict[str, dict]:
    """Per-axis matched/unmatched verdicts against the beat period."""
    return {axis: _axis_verdict(c, grid, tolerance) for axis, c in correlograms.items()}


@dataclass
class MotionAutocorrReport:
    fps: float
    max_lag: int
    beat_period: float
    correlograms: dict[str, Correlogram]
    verdicts: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "max_lag": self.max_lag,
            "beat_period_frames": self.beat_period,
            "axes": {
                axis: {
                    "correlogram": [float(v) for v in self.correlograms[axis].values],
                    "peak_lags": list(self.correlograms[axis].peak_lags),
                    "verdict": self.verdicts[axis],
                }
                for axis in self.correlograms
            },
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def analyze_motion(seq: SkeletonSequence, grid: BeatGrid, max_lag: int,
                   tolerance: float = DEFAULT_TOLERANCE) -> MotionAutocorrReport:
    correlograms = motion_autocorrelation(seq, max_lag)
    verdicts = beat_alignment(correlograms, grid, tolerance)
    return MotionAutocorrReport(seq.fps, max_lag, grid.period, correlograms, verdicts)


def plot_report_svg(report: MotionAutocorrReport, path) -> None:
    """Two stacked correlogram panels with vertical lines on beat multiples."""
    width, panel_h, pad = 640, 160, 36
    height = pad + len(report.correlograms) * (panel_h + pad)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
             f'font-family="monospace" font-size="12">']
    for row, axis in enumerate(sorted(report.correlograms)):
        corr = report.correlograms[axis]
        top = pad + row * (panel_h + pad)
        left, right = pad, width - pad
        span = right - left

        def sx(lag):
            return left + span * lag / corr.max_lag

        def sy(value):
            return top + panel_h * (1.0 - (value + 1.0) / 2.0)

        parts.append(f'<rect x="{left}" y="{top}" width="{span}" height="{panel_h}" '
                     'fill="none" stroke="#888"/>')
        parts.append(f'<line x1="{left}" y1="{sy(0):.1f}" x2="{right}" y2="{sy(0):.1f}" '
                     'stroke="#ccc"/>')
        multiple = 1
        while multiple * report.beat_period <= corr.max_lag:
            x = sx(multiple * report.beat_period)
            parts.append(f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" '
                         f'y2="{top + panel_h}" stroke="#4169e1" stroke-dasharray="4 3"/>')
            multiple += 1
        points = " ".join(f"{sx(lag):.1f},{sy(v):.1f}" for lag, v in enumerate(corr.values))
        parts.append(f'<polyline points="{points}" fill="none" stroke="#d2413a" stroke-width="1.5"/>')
        for lag in corr.peak_lags:
            parts.append(f'<circle cx="{sx(lag):.1f}" cy="{sy(corr.values[lag]):.1f}" '
                         'r="3" fill="#d2413a"/>')
        verdict = report.verdicts[axis]["status"]
        parts.append(f'<text x="{left}" y="{top - 6}">{axis}-axis autocorrelation '
                     f'({verdict}); beat period {report.beat_period:.2f} frames</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
