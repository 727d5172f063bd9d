"""Synthetic clips shared across tests: a bouncing stick figure and a click track."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from dancegen.audio import AudioClip, mel_spectrogram
from dancegen.skeleton import JointFrame, pipeline
from dancegen.training import ClipPair

# A plausible standing pose in pixel coordinates (x right, y down).
BASE_POSE = np.array([
    [200.0, 50.0],   # Head
    [200.0, 90.0],   # Neck
    [165.0, 95.0],   # RShoulder
    [150.0, 140.0],  # RElbow
    [140.0, 185.0],  # RWrist
    [235.0, 95.0],   # LShoulder
    [250.0, 140.0],  # LElbow
    [260.0, 185.0],  # LWrist
    [200.0, 150.0],  # Chest
    [180.0, 210.0],  # RHip
    [175.0, 270.0],  # RKnee
    [170.0, 330.0],  # RAnkle
    [220.0, 210.0],  # LHip
    [225.0, 270.0],  # LKnee
    [230.0, 330.0],  # LAnkle
])

# Per-joint motion amplitudes (pixels); arms swing hard, torso bobs.
Y_AMP = np.array([14, 12, 20, 45, 70, 20, 45, 70, 10, 8, 14, 6, 8, 14, 6], dtype=float)
X_AMP = np.array([6, 5, 8, 22, 34, 8, 22, 34, 4, 4, 7, 3, 4, 7, 3], dtype=float)
PHASE = np.linspace(0.0, np.pi, 15)


def make_motion_frames(n_frames: int, period: float = 30.0) -> list[JointFrame]:
    """Perfectly periodic 15-joint motion around the base pose."""
    frames = []
    for t in range(n_frames):
        angle = 2.0 * np.pi * t / period
        xy = BASE_POSE.copy()
        xy[:, 0] += X_AMP * np.sin(angle + PHASE)
        xy[:, 1] += Y_AMP * np.sin(angle + 0.5 * PHASE)
        frames.append(JointFrame(xy, np.ones(15, dtype=bool)))
    return frames


def make_click_audio(n_frames: int, period_frames: float = 30.0, fps: float = 30.0,
                     sample_rate: int = 22050) -> AudioClip:
    """A click every ``period_frames`` video frames over ``n_frames`` frames."""
    n_samples = int(np.ceil((n_frames + 1) * sample_rate / fps))
    samples = np.zeros(n_samples)
    burst_len = int(0.02 * sample_rate)
    burst = np.sin(2 * np.pi * 1000.0 * np.arange(burst_len) / sample_rate)
    burst *= np.exp(-np.arange(burst_len) / (0.004 * sample_rate))
    t = 0.0
    while True:
        start = int(round(t * sample_rate / fps))
        if start >= n_samples:
            break
        stop = min(start + burst_len, n_samples)
        samples[start:stop] += burst[: stop - start]
        t += period_frames
    return AudioClip(0.8 * samples, sample_rate)


def make_clip_pair(n_frames: int = 256, period: float = 30.0, fps: float = 30.0,
                   sample_rate: int = 22050) -> ClipPair:
    seq = pipeline(make_motion_frames(n_frames, period), fps=fps)
    clip = make_click_audio(n_frames, period, fps, sample_rate)
    mel = mel_spectrogram(clip, fps)
    return ClipPair(seq, mel, name="synthetic")


def write_openpose_dir(directory: Path, frames: list[JointFrame],
                       layout: int = 18, confidence: float = 0.9) -> None:
    """Write per-frame keypoint JSON files for CLI/ingestion tests.

    For the 18-point layout the Chest row is dropped (the reader
    re-synthesizes it from the hips); for 25 points the extra
    eye/ear/foot keypoints are filled with zeros at zero confidence.
    """
    directory.mkdir(parents=True, exist_ok=True)
    # joints 0..7 keep their index; hips/legs shift down one slot (no Chest row)
    to_src_18 = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]
    for i, frame in enumerate(frames):
        kp = np.zeros((layout, 3))
        if layout == 18:
            for joint, src in zip([j for j in range(15) if j != 8], to_src_18):
                kp[src, :2] = frame.xy[joint]
                kp[src, 2] = confidence if frame.present[joint] else 0.0
        elif layout == 25:
            for joint in range(15):
                kp[joint, :2] = frame.xy[joint]
                kp[joint, 2] = confidence if frame.present[joint] else 0.0
        else:
            raise ValueError(layout)
        doc = {"version": 1.3, "people": [{"pose_keypoints_2d": kp.reshape(-1).tolist()}]}
        with open(directory / f"frame_{i:06d}_keypoints.json", "w") as fh:
            json.dump(doc, fh)
