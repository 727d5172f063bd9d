"""dancegen: music-driven 2-D dance skeleton generation.

A causal dilated highway convolution encoder-decoder predicts the next
44-dim skeleton frame (15 joint coordinates + 14 limb lengths) from past
motion and a video-rate mel spectrogram, trained with L1 + limb-length
losses and run autoregressively at inference time.
"""

from .autodiff import ConvSpec, Gradients, Param, Tensor2D, backward
from .autocorr import Correlogram, autocorrelate
from .audio import AudioClip, MelSequence, load_wav, mel_filterbank, mel_spectrogram, resample_linear
from .model import CdhcBlock, DanceModel, ModelConfig, cdhc_forward, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from .skeleton import (JointFrame, NormMeta, SkeletonSequence, SkeletonTopology, TOPOLOGY,
                       build_sequence, ingest_openpose, interpolate_missing, limb_lengths,
                       minmax_normalize)
from .training import ClipPair, TrainingConfig, compute_loss, fit, identity_baseline, sample_windows, train_step
from .analysis import BeatGrid, MotionAutocorrReport, analyze_motion, beat_alignment, motion_autocorrelation

__version__ = "0.1.0"
