"""Audio frontend: WAV ingestion, resampling, and the video-rate mel spectrogram.

The hop is not a fixed integer: frame i of the spectrogram is a
1024-sample window centered at sample round(i * sample_rate / fps), so
mel frames stay aligned to video frames with no drift even when
sample_rate / fps is non-integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .exceptions import DegenerateInputError, DimensionError, NumericError

N_FFT = 1024
N_MELS = 80
DEFAULT_SAMPLE_RATE = 22050
DEFAULT_FPS = 30.0


@dataclass
class AudioClip:
    """Mono samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DimensionError("AudioClip holds a mono sample vector")
        if self.sample_rate <= 0:
            raise DimensionError("sample_rate must be positive")
        if self.samples.size and not np.isfinite(self.samples).all():
            raise NumericError("non-finite audio samples")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class MelSequence:
    """80 x T spectrogram aligned to the video frame rate."""

    data: np.ndarray  # (80, T) float32, values in [0, 1]
    fps: float
    sample_rate: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] != N_MELS:
            raise DimensionError(f"mel data must be {N_MELS} x T, got {self.data.shape}")

    @property
    def frames(self) -> int:
        return self.data.shape[1]


def load_wav(path) -> AudioClip:
    """Read PCM16 or float32 WAV; stereo is downmixed by averaging."""
    rate, raw = wavfile.read(path)
    data = np.asarray(raw)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    else:
        data = data.astype(np.float64)
    return AudioClip(data, int(rate))


def save_wav(path, clip: AudioClip) -> None:
    wavfile.write(path, clip.sample_rate, clip.samples.astype(np.float32))


def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling; keeps duration within one sample period."""
    if target_rate <= 0:
        raise DimensionError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    n_in = clip.samples.size
    if n_in == 0:
        return AudioClip(np.zeros(0), target_rate)
    n_out = max(1, int(round(n_in * target_rate / clip.sample_rate)))
    src_pos = np.arange(n_out) * (clip.sample_rate / target_rate)
    out = np.interp(src_pos, np.arange(n_in), clip.samples)
    return AudioClip(out, target_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """Triangular mel filters over rfft bins, spanning 0 Hz to Nyquist.

    Returns an (n_mels, n_fft // 2 + 1) nonnegative matrix; raises if the
    configuration leaves any filter without support on the bin grid.
    """
    if n_mels >= n_fft // 2:
        raise DimensionError("n_mels must be < n_fft / 2")
    if sample_rate < 2048:
        raise DimensionError("sample_rate too low for a 1024-sample analysis window")
    n_bins = n_fft // 2 + 1
    bin_freqs = np.arange(n_bins) * (sample_rate / n_fft)
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    hz_points = mel_to_hz(mel_points)

    filters = np.zeros((n_mels, n_bins))
    for b in range(n_mels):
        lo, center, hi = hz_points[b], hz_points[b + 1], hz_points[b + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        filters[b] = np.maximum(0.0, np.minimum(rising, falling))
    if (filters.sum(axis=1) == 0).any():
        raise DegenerateInputError(
            "mel filterbank has an empty filter; raise n_fft or lower n_mels")
    return filters


def filter_center_frequencies(sample_rate: int, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """Peak frequency of each triangular filter, in Hz."""
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    return mel_to_hz(mel_points)[1:-1]


def mel_frame_count(n_samples: int, sample_rate: int, fps: float) -> int:
    return int(np.floor(n_samples * fps / sample_rate))


def mel_spectrogram(clip: AudioClip, fps: float = DEFAULT_FPS) -> MelSequence:
    """Video-rate log-mel features, min-max scaled to [0, 1] per clip.

    Frame i: Hann-windowed 1024-sample slice centered at
    round(i * sample_rate / fps), zero-padded at the clip edges;
    magnitude rfft -> mel filterbank -> log(1 + energy).
    """
    if clip.samples.size == 0:
        raise DegenerateInputError("empty audio clip")
    if fps <= 0:
        raise DimensionError("fps must be positive")
    n_frames = mel_frame_count(clip.samples.size, clip.sample_rate, fps)
    if n_frames < 1:
        raise DegenerateInputError("clip too short for even one frame at this fps")

    filters = mel_filterbank(clip.sample_rate)
    window = np.hanning(N_FFT)
    half = N_FFT // 2
    padded = np.concatenate([np.zeros(half), clip.samples, np.zeros(half)])

    centers = np.rint(np.arange(n_frames) * (clip.sample_rate / fps)).astype(np.int64)
    spec = np.empty((N_MELS, n_frames))
    for i, c in enumerate(centers):
        frame = padded[c : c + N_FFT] * window
        mag = np.abs(np.fft.rfft(frame))
        spec[:, i] = filters @ mag
    spec = np.log1p(spec)

    lo, hi = spec.min(), spec.max()
    if hi > lo:
        spec = (spec - lo) / (hi - lo)
    else:
        spec = np.zeros_like(spec)
    return MelSequence(spec.astype(np.float32), fps, clip.sample_rate)
