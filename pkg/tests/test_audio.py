import numpy as np
import pytest
from scipy.io import wavfile

from dancegen.audio import (AudioClip, filter_center_frequencies, load_wav, mel_filterbank,
                            mel_frame_count, mel_spectrogram, resample_linear, save_wav)
from dancegen.exceptions import DegenerateInputError, DimensionError


def tone(freq, duration, rate, amp=0.5):
    t = np.arange(int(duration * rate)) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), rate)


class TestWavIO:
    def test_pcm16_round_trip(self, tmp_path):
        clip = tone(440.0, 0.5, 22050)
        path = tmp_path / "t.wav"
        wavfile.write(path, 22050, (clip.samples * 32767).astype(np.int16))
        back = load_wav(path)
        assert back.sample_rate == 22050
        assert back.samples.size == clip.samples.size
        assert np.abs(back.samples - clip.samples).max() < 1e-3

    def test_float32_round_trip(self, tmp_path):
        clip = tone(440.0, 0.25, 22050)
        path = tmp_path / "t.wav"
        save_wav(path, clip)
        back = load_wav(path)
        assert np.abs(back.samples - clip.samples).max() < 1e-6

    def test_stereo_downmix(self, tmp_path):
        left = np.full(1000, 0.2, dtype=np.float32)
        right = np.full(1000, 0.6, dtype=np.float32)
        path = tmp_path / "st.wav"
        wavfile.write(path, 22050, np.stack([left, right], axis=1))
        back = load_wav(path)
        assert np.allclose(back.samples, 0.4, atol=1e-6)


class TestResample:
    def test_identity_rate(self):
        clip = tone(440.0, 0.3, 22050)
        out = resample_linear(clip, 22050)
        assert np.array_equal(out.samples, clip.samples)

    def test_constant_stays_constant(self):
        out = resample_linear(AudioClip(np.full(4410, 0.25), 44100), 22050)
        assert np.allclose(out.samples, 0.25)
        assert abs(out.duration - 0.1) <= 1.0 / 22050

    def test_tone_frequency_preserved(self):
        # DFT oracle: dominant bin of the resampled tone still sits at 440 Hz
        clip = tone(440.0, 1.0, 44100)
        out = resample_linear(clip, 22050)
        spectrum = np.abs(np.fft.rfft(out.samples * np.hanning(out.samples.size)))
        freqs = np.fft.rfftfreq(out.samples.size, 1.0 / 22050)
        bin_width = freqs[1] - freqs[0]
        assert abs(freqs[np.argmax(spectrum)] - 440.0) <= bin_width


class TestFilterbank:
    def test_shape_and_nonnegative(self):
        fb = mel_filterbank(22050)
        assert fb.shape == (80, 513)
        assert fb.min() >= 0.0
        assert np.all(fb.sum(axis=1) > 0)

    def test_centers_strictly_increasing(self):
        centers = filter_center_frequencies(22050)
        assert np.all(np.diff(centers) > 0)

    def test_bin_coverage(self):
        # direct scan: every bin between the first and last centers has weight
        fb = mel_filterbank(22050)
        centers = filter_center_frequencies(22050)
        bin_freqs = np.arange(513) * 22050 / 1024
        inside = (bin_freqs >= centers[0]) & (bin_freqs <= centers[-1])
        assert np.all(fb.sum(axis=0)[inside] > 0)

    def test_rejects_too_many_mels(self):
        with pytest.raises(DimensionError):
            mel_filterbank(22050, n_fft=64, n_mels=80)


class TestMelSpectrogram:
    def test_frame_count_one_second(self):
        mel = mel_spectrogram(tone(440.0, 1.0, 22050), fps=30.0)
        assert mel.data.shape == (80, 30)

    def test_frame_alignment_various_durations(self):
        for duration, fps in [(0.5, 30.0), (1.37, 30.0), (2.0, 24.0), (0.81, 29.97)]:
            clip = tone(300.0, duration, 22050)
            mel = mel_spectrogram(clip, fps)
            expected = int(np.floor(clip.duration * fps))
            assert abs(mel.frames - expected) <= 1

    def test_silence_constant_frames(self):
        mel = mel_spectrogram(AudioClip(np.zeros(22050), 22050), fps=30.0)
        assert np.all(mel.data == mel.data[:, :1])

    def test_range_and_extremes(self):
        mel = mel_spectrogram(make_two_tone_clip(), fps=30.0)
        assert mel.data.min() == 0.0
        assert mel.data.max() == 1.0

    @pytest.mark.parametrize("band", [10, 40, 70])
    def test_pure_tone_peaks_at_its_band(self, band):
        rate = 22050
        centers = filter_center_frequencies(rate)
        clip = tone(centers[band], 1.0, rate)
        # oracle: filterbank response to one directly-windowed frame
        fb = mel_filterbank(rate)
        frame = clip.samples[4096 : 4096 + 1024] * np.hanning(1024)
        expected = int(np.argmax(fb @ np.abs(np.fft.rfft(frame))))
        assert expected == band
        mel = mel_spectrogram(clip, fps=30.0)
        assert np.all(np.argmax(mel.data, axis=0) == band)

    def test_empty_audio_rejected(self):
        with pytest.raises(DegenerateInputError):
            mel_spectrogram(AudioClip(np.zeros(0), 22050), fps=30.0)

    def test_too_short_for_one_frame(self):
        with pytest.raises(DegenerateInputError):
            mel_spectrogram(AudioClip(np.zeros(100), 22050), fps=30.0)

    def test_frame_count_helper(self):
        assert mel_frame_count(22050, 22050, 30.0) == 30
        assert mel_frame_count(16 * 22050, 22050, 30.0) == 480


def make_two_tone_clip():
    t = np.arange(22050) / 22050
    x = 0.4 * np.sin(2 * np.pi * 440 * t) + 0.2 * np.sin(2 * np.pi * 1200 * t)
    return AudioClip(x, 22050)
