"""Window sampling, the L1 + limb-length objective, and the Adam training loop."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import MelSequence
from .autodiff import Tensor2D, add, affine, backward, edge_lengths, l1_loss, slice_channels, slice_frames
from .exceptions import DegenerateInputError, DimensionError, NumericError
from .model import DanceModel, ModelConfig, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from .skeleton import LENGTH_SCALE, TOPOLOGY, SkeletonSequence, SkeletonTopology


@dataclass
class TrainingConfig:
    window_length: int = 128
    batch_size: int = 8
    learning_rate: float = 2e-4
    limb_loss_weight: float = 1.0
    max_steps: int = 1000
    checkpoint_interval: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if self.window_length < 2:
            raise DimensionError("window_length must be >= 2")
        if min(self.batch_size, self.max_steps, self.checkpoint_interval) < 1:
            raise DimensionError("batch_size, max_steps, checkpoint_interval must be positive")
        if self.learning_rate <= 0 or self.limb_loss_weight < 0:
            raise DimensionError("learning_rate must be > 0 and limb_loss_weight >= 0")


@dataclass
class ClipPair:
    """A skeleton sequence and its mel sequence, truncated to a shared length."""

    skeleton: SkeletonSequence
    mel: MelSequence
    name: str = "clip"

    def __post_init__(self):
        if self.skeleton.fps != self.mel.fps:
            raise DimensionError(
                f"fps mismatch: skeleton {self.skeleton.fps} vs mel {self.mel.fps}")
        t = min(len(self.skeleton), self.mel.frames)
        if t < 2:
            raise DegenerateInputError("aligned clip is shorter than 2 frames")
        if len(self.skeleton) != t:
            self.skeleton = SkeletonSequence(self.skeleton.frames[:t],
                                             self.skeleton.norm_meta, self.skeleton.fps)
        if self.mel.frames != t:
            self.mel = MelSequence(self.mel.data[:, :t], self.mel.fps, self.mel.sample_rate)

    @property
    def frames(self) -> int:
        return len(self.skeleton)


def sample_windows(pairs: list[ClipPair], config: TrainingConfig,
                   rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """One batch of (44 x W skeleton, 80 x W mel) windows.

    A clip is picked uniformly among those long enough, then a start
    offset uniformly in [0, T - W].
    """
    w = config.window_length
    eligible = [p for p in pairs if p.frames >= w]
    if not eligible:
        raise DegenerateInputError(f"no clip has at least {w} frames")
    batch = []
    for _ in range(config.batch_size):
        pair = eligible[int(rng.integers(len(eligible)))]
        start = int(rng.integers(pair.frames - w + 1))
        skel = pair.skeleton.to_tensor()[:, start : start + w]
        mel = pair.mel.data[:, start : start + w]
        batch.append((np.ascontiguousarray(skel), np.ascontiguousarray(mel)))
    return batch


def compute_loss(predictions: Tensor2D, target: np.ndarray,
                 topology: SkeletonTopology = TOPOLOGY,
                 limb_weight: float = 1.0):
    """(total, l1_term, limb_term) with prediction column t scored against
    target frame t+1.

    l1_term averages |pred - target| over all 44 dims; limb_term averages
    |lengths(pred coords)/sqrt(2) - target length block| over the 14 edges.
    total = l1_term + limb_weight * limb_term.
    """
    target = np.asarray(target)
    if target.shape != predictions.data.shape:
        raise DimensionError(f"target shape {target.shape} != predictions {predictions.data.shape}")
    w = predictions.frames
    if w < 2:
        raise DimensionError("need at least 2 frames to form a shifted target")

    aligned = slice_frames(predictions, 0, w - 1)
    shifted_target = target[:, 1:w]
    l1_term = l1_loss(aligned, shifted_target)

    coords = slice_channels(aligned, 0, 30)
    pred_lengths = affine(edge_lengths(coords, topology.edges), LENGTH_SCALE)
    limb_term = l1_loss(pred_lengths, shifted_target[30:44])

    total = add(l1_term, affine(limb_term, limb_weight))
    return total, l1_term, limb_term


def identity_baseline(skeleton: np.ndarray) -> float:
    """l1_term of the predictor that repeats the current frame: the mean
    one-frame difference of the data. Any useful model must beat this."""
    x = np.asarray(skeleton, dtype=np.float64)
    return float(np.abs(x[:, :-1] - x[:, 1:]).mean())


def train_step(model: DanceModel, state: AdamState,
               batch: list[tuple[np.ndarray, np.ndarray]],
               config: TrainingConfig, step: int) -> dict:
    """One forward/backward/Adam update on a batch; returns the loss record."""
    if not batch:
        raise DegenerateInputError("empty batch")
    totals = []
    l1_vals = []
    limb_vals = []
    for skel_win, mel_win in batch:
        pred = model.teacher_forced_forward(Tensor2D(skel_win), Tensor2D(mel_win))
        total, l1_term, limb_term = compute_loss(
            pred, skel_win, limb_weight=config.limb_loss_weight)
        totals.append(total)
        l1_vals.append(l1_term.item())
        limb_vals.append(limb_term.item())
    batch_total = totals[0]
    for t in totals[1:]:
        batch_total = add(batch_total, t)
    batch_total = affine(batch_total, 1.0 / len(batch))
    if not math.isfinite(batch_total.item()):
        raise NumericError(f"non-finite loss at step {step}: {batch_total.item()}")
    grads = backward(batch_total)
    adam_step(model.params, grads, state)
    return {
        "step": step,
        "total": batch_total.item(),
        "l1": float(np.mean(l1_vals)),
        "limb": float(np.mean(limb_vals)),
    }


def write_loss_log(path, records: list[dict], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(["step", "total", "l1", "limb"])
        for rec in records:
            writer.writerow([rec["step"], f"{rec['total']:.8f}",
                             f"{rec['l1']:.8f}", f"{rec['limb']:.8f}"])


def mean_seed_pose(pairs: list[ClipPair]) -> np.ndarray:
    """Mean 44-dim frame over every training skeleton frame."""
    stacked = np.concatenate([p.skeleton.frames for p in pairs], axis=0)
    return stacked.mean(axis=0).astype(np.float32)


def fit(pairs: list[ClipPair], config: TrainingConfig, out_dir,
        model_config: ModelConfig | None = None, resume_from=None,
        stop_when=None, holdout_pairs=None, log_every: int = 0,
        printer=None) -> dict:
    """Run the training loop; write interval + final checkpoints and a loss log.

    Batches are drawn with a per-step generator seeded by (rng_seed, step),
    so resuming from a checkpoint replays the exact batch stream and, with
    the serialized optimizer state, the exact loss trajectory.
    """
    if not pairs:
        raise DegenerateInputError("empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    start_step = 0
    if resume_from is not None:
        model, state, sidecar = load_checkpoint(resume_from)
        if state is None:
            raise DegenerateInputError("checkpoint has no optimizer state; cannot resume")
        start_step = sidecar["train"]["step"]
    else:
        model = DanceModel.init(model_config or ModelConfig(),
                                np.random.default_rng(config.rng_seed))
        state = AdamState.for_params(model.params, learning_rate=config.learning_rate)

    seed_pose = mean_seed_pose(pairs)
    sidecar_base = {
        "norm_meta": pairs[0].skeleton.norm_meta.to_dict(),
        "fps": pairs[0].skeleton.fps,
        "mean_seed_pose": [float(v) for v in seed_pose],
        "train": {"rng_seed": config.rng_seed, "window_length": config.window_length,
                  "batch_size": config.batch_size,
                  "limb_loss_weight": config.limb_loss_weight},
    }

    records: list[dict] = []
    stopped_early = False
    for step in range(start_step, config.max_steps):
        rng = np.random.default_rng([config.rng_seed, step])
        batch = sample_windows(pairs, config, rng)
        record = train_step(model, state, batch, config, step)
        records.append(record)
        if printer and log_every and (step % log_every == 0 or step == config.max_steps - 1):
            printer(f"step {record['step']} total {record['total']:.6f} "
                    f"l1 {record['l1']:.6f} limb {record['limb']:.6f}")
        done = step + 1
        if done % config.checkpoint_interval == 0 and done < config.max_steps:
            sidecar = dict(sidecar_base, train=dict(sidecar_base["train"], step=done))
            save_checkpoint(out_dir / f"ckpt_{done:07d}.l2dc", model, sidecar, state)
        if stop_when is not None and stop_when(record):
            stopped_early = True
            break

    final_step = records[-1]["step"] + 1 if records else start_step
    sidecar = dict(sidecar_base, train=dict(sidecar_base["train"], step=final_step))
    if holdout_pairs:
        sidecar["holdout_l1"] = evaluate_l1(model, holdout_pairs, config)
    final_path = save_checkpoint(out_dir / "model.l2dc", model, sidecar, state)
    write_loss_log(out_dir / "loss_log.csv", records, append=start_step > 0)
    return {
        "model": model,
        "state": state,
        "records": records,
        "final_checkpoint": final_path,
        "stopped_early": stopped_early,
        "mean_seed_pose": seed_pose,
    }


def evaluate_l1(model: DanceModel, pairs: list[ClipPair],
                config: TrainingConfig) -> float:
    """Teacher-forced l1_term averaged over whole held-out clips."""
    vals = []
    for pair in pairs:
        skel = pair.skeleton.to_tensor()
        pred = model.teacher_forced_forward(Tensor2D(skel), Tensor2D(pair.mel.data))
        _, l1_term, _ = compute_loss(pred, skel, limb_weight=config.limb_loss_weight)
        vals.append(l1_term.item())
    return float(np.mean(vals))
