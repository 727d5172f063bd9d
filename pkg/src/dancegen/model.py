"""The generation network: two causal encoders fused into a causal decoder.

Skeleton (44ch) and mel (80ch) streams each pass a 3-conv stem and ten
gated highway blocks; the decoder mixes them per frame, runs six more
blocks, and squashes to 44 sigmoid outputs. Column t of the output sees
input columns <= t only, so the prediction at t can be read as "frame
t+1 given history through t".
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorfile
from .autodiff import (ConvSpec, Param, Tensor2D, add, affine, conv1d_causal, init_bound,
                       mul, pointwise_affine, relu, sigmoid, slice_channels, tanh)
from .exceptions import DimensionError, FormatError

ENCODER_DILATIONS = (1, 3, 9, 27, 1, 3, 9, 27, 3, 3)
DECODER_DILATIONS = (1, 3, 9, 27, 3, 3)

CHECKPOINT_MAGIC = b"L2DC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    skeleton_dim: int = 44
    mel_bins: int = 80
    enc_channels: int = 256
    dec_channels: int = 128
    enc_dilations: tuple = ENCODER_DILATIONS
    dec_dilations: tuple = DECODER_DILATIONS

    def __post_init__(self):
        if self.enc_channels != 2 * self.dec_channels:
            raise DimensionError(
                "encoder width must be twice the decoder width (the decoder "
                "splits the encoded audio into two halves)")

    @property
    def receptive_field(self) -> int:
        """Frames of history (incl. the current one) that can reach one output."""
        return 1 + 2 * (sum(self.enc_dilations) + sum(self.dec_dilations))

    def to_dict(self) -> dict:
        return {
            "skeleton_dim": self.skeleton_dim,
            "mel_bins": self.mel_bins,
            "enc_channels": self.enc_channels,
            "dec_channels": self.dec_channels,
            "enc_dilations": list(self.enc_dilations),
            "dec_dilations": list(self.dec_dilations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            skeleton_dim=d["skeleton_dim"],
            mel_bins=d["mel_bins"],
            enc_channels=d["enc_channels"],
            dec_channels=d["dec_channels"],
            enc_dilations=tuple(d["enc_dilations"]),
            dec_dilations=tuple(d["dec_dilations"]),
        )


@dataclass
class CdhcBlock:
    """One causal dilated highway conv block (channels C in, C out)."""

    channels: int
    dilation: int
    w: Param
    b: Param

    @property
    def spec(self) -> ConvSpec:
        return ConvSpec(self.channels, 2 * self.channels, 3, self.dilation)


def cdhc_forward(block: CdhcBlock, x: Tensor2D) -> Tensor2D:
    """tanh(H1) * relu(H2) + (1 - tanh(H1)) * x with [H1; H2] = conv(x).

    With zero conv weights and bias the gate is 0 and the block is the
    identity map.
    """
    if x.channels != block.channels:
        raise DimensionError(f"block expects {block.channels} channels, got {x.channels}")
    h = conv1d_causal(x, block.spec, block.w, block.b)
    h1 = slice_channels(h, 0, block.channels)
    h2 = slice_channels(h, block.channels, 2 * block.channels)
    gate = tanh(h1)
    return add(mul(gate, relu(h2)), mul(affine(gate, -1.0, 1.0), x))


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class DanceModel:
    """Parameters plus the forward passes; read-only during inference."""

    def __init__(self, config: ModelConfig, params: dict[str, Param]):
        self.config = config
        self.params = params
        c_enc, c_dec = config.enc_channels, config.dec_channels
        self.skel_blocks = [
            CdhcBlock(c_enc, d, params[f"skel.block{i}.w"], params[f"skel.block{i}.b"])
            for i, d in enumerate(config.enc_dilations)]
        self.audio_blocks = [
            CdhcBlock(c_enc, d, params[f"audio.block{i}.w"], params[f"audio.block{i}.b"])
            for i, d in enumerate(config.enc_dilations)]
        self.dec_blocks = [
            CdhcBlock(c_dec, d, params[f"dec.block{i}.w"], params[f"dec.block{i}.b"])
            for i, d in enumerate(config.dec_dilations)]

    # -- construction ----------------------------------------------------

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator) -> "DanceModel":
        """Fresh parameters, uniform in +-sqrt(1/(fan_in * kernel))."""
        c_enc, c_dec = config.enc_channels, config.dec_channels
        params: dict[str, Param] = {}

        def conv3(name, c_in, c_out):
            bound = init_bound(c_in, 3)
            params[f"{name}.w"] = Param(f"{name}.w", _uniform(rng, (c_out, c_in, 3), bound))
            params[f"{name}.b"] = Param(f"{name}.b", _uniform(rng, (c_out,), bound))

        def conv1(name, c_in, c_out):
            bound = init_bound(c_in, 1)
            params[f"{name}.w"] = Param(f"{name}.w", _uniform(rng, (c_out, c_in), bound))
            params[f"{name}.b"] = Param(f"{name}.b", _uniform(rng, (c_out,), bound))

        for stream, c_in in (("skel", config.skeleton_dim), ("audio", config.mel_bins)):
            conv1(f"{stream}.stem0", c_in, c_enc)
            conv1(f"{stream}.stem1", c_enc, c_enc)
            conv1(f"{stream}.stem2", c_enc, c_enc)
            for i in range(len(config.enc_dilations)):
                conv3(f"{stream}.block{i}", c_enc, 2 * c_enc)
        conv1("dec.fuse_a", c_enc, c_dec)
        conv1("dec.fuse_b", c_enc, c_dec)
        for i in range(len(config.dec_dilations)):
            conv3(f"dec.block{i}", c_dec, 2 * c_dec)
        for i in range(3):
            conv1(f"dec.post{i}", c_dec, c_dec)
        conv1("dec.out", c_dec, config.skeleton_dim)
        return cls(config, params)

    def astype(self, dtype) -> "DanceModel":
        """Copy with parameters cast (float64 shadow for gradient checks)."""
        return DanceModel(self.config,
                          {k: p.astype(dtype) for k, p in self.params.items()})

    def zero_cdhc(self) -> None:
        """Zero every highway block's conv; each block becomes the identity."""
        for name, p in self.params.items():
            if ".block" in name:
                p.data[...] = 0.0

    def passthrough_blocks(self) -> None:
        """Make every highway block forward its oldest tap at gain 1.

        The gate bias saturates tanh to 1 and the transform half copies
        x[t - 2d], so each block computes relu(x[t - 2d]). Useful for
        probing the structural receptive field, where random weights
        attenuate the longest path below float resolution.
        """
        for name, p in self.params.items():
            if ".block" not in name:
                continue
            c = p.data.shape[0] // 2
            if p.data.ndim == 3:
                p.data[...] = 0.0
                p.data[c:, :, 0] = np.eye(c, dtype=p.data.dtype)
            else:
                p.data[:c] = 20.0
                p.data[c:] = 0.0

    # -- forward passes ---------------------------------------------------

    def _stem(self, stream: str, x: Tensor2D) -> Tensor2D:
        for i in range(3):
            x = pointwise_affine(x, self.params[f"{stream}.stem{i}.w"],
                                 self.params[f"{stream}.stem{i}.b"])
        return x

    def encode_skeleton(self, skel: Tensor2D) -> Tensor2D:
        if skel.channels != self.config.skeleton_dim:
            raise DimensionError(f"skeleton input must have {self.config.skeleton_dim} channels")
        h = self._stem("skel", skel)
        for block in self.skel_blocks:
            h = cdhc_forward(block, h)
        return h

    def encode_audio(self, mel: Tensor2D) -> Tensor2D:
        if mel.channels != self.config.mel_bins:
            raise DimensionError(f"mel input must have {self.config.mel_bins} channels")
        h = self._stem("audio", mel)
        for block in self.audio_blocks:
            h = cdhc_forward(block, h)
        return h

    def fuse(self, e_skel: Tensor2D, e_audio: Tensor2D) -> Tensor2D:
        """sigmoid(conv_a(e_skel) + audio[:C]) * tanh(conv_b(e_skel) + audio[C:])."""
        if e_skel.frames != e_audio.frames:
            raise DimensionError("encoded streams must share a frame count")
        c = self.config.dec_channels
        h1 = add(pointwise_affine(e_skel, self.params["dec.fuse_a.w"],
                                  self.params["dec.fuse_a.b"]),
                 slice_channels(e_audio, 0, c))
        h2 = add(pointwise_affine(e_skel, self.params["dec.fuse_b.w"],
                                  self.params["dec.fuse_b.b"]),
                 slice_channels(e_audio, c, 2 * c))
        return mul(sigmoid(h1), tanh(h2))

    def decode(self, e_skel: Tensor2D, e_audio: Tensor2D) -> Tensor2D:
        comb = self.fuse(e_skel, e_audio)
        for block in self.dec_blocks:
            comb = cdhc_forward(block, comb)
        for i in range(3):
            comb = tanh(pointwise_affine(comb, self.params[f"dec.post{i}.w"],
                                         self.params[f"dec.post{i}.b"]))
        out = pointwise_affine(comb, self.params["dec.out.w"], self.params["dec.out.b"])
        return sigmoid(out)

    def teacher_forced_forward(self, skel: Tensor2D, mel: Tensor2D) -> Tensor2D:
        """Predictions aligned so column t estimates skeleton frame t+1."""
        if skel.frames != mel.frames:
            raise DimensionError("skeleton and mel must have equal frame counts")
        return self.decode(self.encode_skeleton(skel), self.encode_audio(mel))

    def generate(self, seed_pose: np.ndarray, mel: np.ndarray,
                 teacher_frames: np.ndarray | None = None) -> np.ndarray:
        """Autoregressive rollout: frame 0 is the seed, frame k+1 is the
        model's prediction from frames 0..k and mel columns 0..k.

        Recomputes the whole prefix each step (quadratic but exactly the
        teacher-forced computation at every step). With ``teacher_frames``
        (44 x T) the prefix is built from those ground-truth frames instead
        of the model's own output while the returned array still holds the
        predictions, which must then equal a single teacher-forced pass.
        """
        seed = np.asarray(seed_pose, dtype=np.float32).reshape(-1)
        if seed.size != self.config.skeleton_dim:
            raise DimensionError(f"seed pose must have {self.config.skeleton_dim} values")
        mel = np.asarray(mel, dtype=np.float32)
        if mel.ndim != 2 or mel.shape[0] != self.config.mel_bins:
            raise DimensionError(f"mel must be {self.config.mel_bins} x T")
        total = mel.shape[1]
        if total < 1:
            raise DimensionError("need at least one mel frame")
        if teacher_frames is not None:
            teacher_frames = np.asarray(teacher_frames, dtype=np.float32)
            if teacher_frames.shape != (self.config.skeleton_dim, total):
                raise DimensionError("teacher frames must match the mel frame count")

        out = np.empty((self.config.skeleton_dim, total), dtype=np.float32)
        out[:, 0] = seed
        prefix_src = out if teacher_frames is None else teacher_frames
        for k in range(total - 1):
            prefix = Tensor2D(prefix_src[:, : k + 1].copy())
            pred = self.teacher_forced_forward(prefix, Tensor2D(mel[:, : k + 1].copy()))
            out[:, k + 1] = pred.data[:, k]
        return out


# -- checkpoints ----------------------------------------------------------


def _embed_shape(arr: np.ndarray) -> np.ndarray:
    """Any-rank array as a 2-D view for the tensor container."""
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim == 2:
        return arr
    return arr.reshape(arr.shape[0], -1)


def save_checkpoint(path, model: DanceModel, sidecar: dict | None = None,
                    optimizer_state=None) -> Path:
    """Binary container of named tensors plus a JSON sidecar at <path>.json.

    Layout: magic L2DC, u32 version, u32 tensor count, then per tensor a
    u32 byte length + UTF-8 name followed by an embedded L2D1 record.
    """
    path = Path(path)
    entries: list[tuple[str, np.ndarray]] = [(n, p.data) for n, p in model.params.items()]
    extra: dict = {"model": model.config.to_dict(), "format_version": CHECKPOINT_VERSION}
    if optimizer_state is not None:
        for name in model.params:
            entries.append((f"adam.m.{name}", optimizer_state.m[name]))
            entries.append((f"adam.v.{name}", optimizer_state.v[name]))
        extra["adam"] = {"t": optimizer_state.t,
                         "learning_rate": optimizer_state.learning_rate}
    if sidecar:
        extra.update(sidecar)

    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(entries)))
        for name, arr in entries:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            tensorfile.write_tensor_stream(fh, _embed_shape(arr))
    with open(Path(str(path) + ".json"), "w") as fh:
        json.dump(extra, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_checkpoint_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    """Raw named 2-D tensors and the sidecar dict."""
    path = Path(path)
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            tensors[name] = tensorfile.read_tensor_stream(fh)
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise FormatError(f"missing checkpoint sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    return tensors, sidecar


def load_checkpoint(path):
    """Rebuild (model, optimizer_state_or_None, sidecar) from disk."""
    from .optim import AdamState  # local import to avoid a cycle

    tensors, sidecar = read_checkpoint_tensors(path)
    config = ModelConfig.from_dict(sidecar["model"])
    rng = np.random.default_rng(0)
    model = DanceModel.init(config, rng)  # shapes only; data overwritten below
    for name, p in model.params.items():
        if name not in tensors:
            raise FormatError(f"checkpoint missing tensor {name}")
        p.data = tensors[name].reshape(p.data.shape).astype(np.float32)

    state = None
    if "adam" in sidecar:
        state = AdamState.for_params(model.params,
                                     learning_rate=sidecar["adam"]["learning_rate"])
        state.t = sidecar["adam"]["t"]
        for name, p in model.params.items():
            state.m[name] = tensors[f"adam.m.{name}"].reshape(p.data.shape).astype(np.float32)
            state.v[name] = tensors[f"adam.v.{name}"].reshape(p.data.shape).astype(np.float32)
    return model, state, sidecar
