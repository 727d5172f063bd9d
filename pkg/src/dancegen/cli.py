"""Command-line surface: prepare, train, generate, analyze, render."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import render as render_mod
from . import skeleton as skel_mod
from . import tensorfile
from .analysis import BeatGrid, analyze_motion, plot_report_svg
from .exceptions import DegenerateInputError, DimensionError, FormatError, NumericError
from .model import ModelConfig, load_checkpoint
from .skeleton import NormMeta, SkeletonSequence
from .training import ClipPair, TrainingConfig, fit


def load_manifest(path):
    """Manifest JSON: {"root": optional, "clips": [{name, skeleton, audio, fps}]}."""
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable manifest {path}: {exc}") from exc
    root = Path(doc.get("root", path.parent))
    if not root.is_absolute():
        root = path.parent / root
    clips = doc.get("clips", [])
    if not clips:
        raise FormatError("manifest lists no clips")
    seen = set()
    entries = []
    missing = []
    for c in clips:
        name = c["name"]
        if name in seen:
            raise FormatError(f"duplicate clip name {name!r}")
        seen.add(name)
        entry = {
            "name": name,
            "skeleton": root / c["skeleton"],
            "audio": root / c["audio"],
            "fps": float(c.get("fps", 30.0)),
        }
        for key in ("skeleton", "audio"):
            if not entry[key].exists():
                missing.append(str(entry[key]))
        entries.append(entry)
    if missing:
        raise FormatError("manifest references missing files: " + ", ".join(missing))
    return entries


def _prepare_clip(entry, out_dir: Path, sample_rate: int) -> tuple[int, int]:
    src = entry["skeleton"]
    frames = skel_mod.ingest_csv(src) if src.is_file() else skel_mod.ingest_openpose(src)
    seq = skel_mod.pipeline(frames, fps=entry["fps"])

    clip = audio_mod.load_wav(entry["audio"])
    clip = audio_mod.resample_linear(clip, sample_rate)
    mel = audio_mod.mel_spectrogram(clip, entry["fps"])

    t = min(len(seq), mel.frames)
    seq = SkeletonSequence(seq.frames[:t], seq.norm_meta, seq.fps)
    mel_data = mel.data[:, :t]

    skel_mod.save_sequence(out_dir / entry["name"], seq)
    tensorfile.write_tensor(out_dir / f"{entry['name']}.mel.l2d", mel_data)
    return len(seq), t


def cmd_prepare(args) -> int:
    entries = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for entry in entries:
        try:
            t_skel, t_aligned = _prepare_clip(entry, out_dir, args.sample_rate)
        except (ValueError, OSError, NumericError) as exc:
            failures += 1
            print(f"clip {entry['name']}: FAILED ({exc})", file=sys.stderr)
            continue
        print(f"clip {entry['name']}: {t_aligned} aligned frames")
    return 1 if failures else 0


def load_dataset(data_dir) -> list[ClipPair]:
    data_dir = Path(data_dir)
    pairs = []
    for skel_path in sorted(data_dir.glob("*.skel.l2d")):
        name = skel_path.name[: -len(".skel.l2d")]
        mel_path = data_dir / f"{name}.mel.l2d"
        if not mel_path.exists():
            raise FormatError(f"no mel tensor for clip {name}")
        seq = skel_mod.load_sequence(skel_path)
        mel = audio_mod.MelSequence(tensorfile.read_tensor(mel_path), seq.fps, 0)
        pairs.append(ClipPair(seq, mel, name=name))
    if not pairs:
        raise FormatError(f"no prepared clips in {data_dir}")
    return pairs


def cmd_train(args) -> int:
    pairs = load_dataset(args.data)
    config = TrainingConfig(
        window_length=args.window,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        limb_loss_weight=args.limb_weight,
        max_steps=args.steps,
        checkpoint_interval=args.checkpoint_interval,
        rng_seed=args.seed,
    )
    model_config = ModelConfig(enc_channels=args.enc_channels,
                               dec_channels=args.dec_channels)
    result = fit(pairs, config, args.out, model_config=model_config,
                 resume_from=args.resume, log_every=args.log_every, printer=print)
    print(f"final checkpoint: {result['final_checkpoint']}")
    return 0


def _seed_pose_from(args, sidecar) -> np.ndarray:
    if args.seed_pose == "mean":
        if "mean_seed_pose" not in sidecar:
            raise FormatError("checkpoint has no stored mean pose; pass --seed-pose FILE")
        return np.asarray(sidecar["mean_seed_pose"], dtype=np.float32)
    pose = tensorfile.read_tensor(args.seed_pose).reshape(-1)
    if pose.size != 44:
        raise FormatError(f"seed pose must have 44 values, got {pose.size}")
    return pose


def cmd_generate(args) -> int:
    model, _, sidecar = load_checkpoint(args.checkpoint)
    clip = audio_mod.load_wav(args.audio)
    clip = audio_mod.resample_linear(clip, args.sample_rate)
    mel = audio_mod.mel_spectrogram(clip, args.fps)
    seed_pose = _seed_pose_from(args, sidecar)

    generated = model.generate(seed_pose, mel.data)
    out_prefix = Path(args.out)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    tensorfile.write_tensor(Path(str(out_prefix) + ".l2d"), generated)

    meta = NormMeta.from_dict(sidecar["norm_meta"]) if "norm_meta" in sidecar else NormMeta.identity()
    coords = generated[:30].T.reshape(-1, 15, 2)
    denorm = meta.denormalize(coords).reshape(-1, 30)
    render_mod.write_coords_csv(Path(str(out_prefix) + ".csv"), denorm)
    print(f"generated {generated.shape[1]} frames -> {out_prefix}.l2d, {out_prefix}.csv")
    return 0


def _load_beats(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return [int(line) for line in text.split() if line.strip()]


def cmd_analyze(args) -> int:
    data = tensorfile.read_tensor(args.motion)
    seq = SkeletonSequence.from_tensor(data, NormMeta.identity(), args.fps)
    grid = (BeatGrid.from_bpm(args.bpm, args.fps) if args.bpm is not None
            else BeatGrid.from_beats(_load_beats(args.beats)))
    max_lag = args.max_lag if args.max_lag else min(len(seq) - 1, int(4 * grid.period))
    report = analyze_motion(seq, grid, max_lag, tolerance=args.tolerance)
    report.save(args.out)
    if args.plot:
        plot_report_svg(report, args.plot)
    for axis in sorted(report.verdicts):
        v = report.verdicts[axis]
        print(f"{axis}: {v['status']}"
              + (f" (peak {v['peak_lag']} vs period {grid.period:.2f}, "
                 f"offset {v['offset_frames']:+.2f})" if v["peak_lag"] is not None else ""))
    return 0


def cmd_render(args) -> int:
    coords = render_mod.load_coords_csv(args.motion)
    if args.format == "svg":
        paths = render_mod.render_svg_frames(coords, args.out)
        print(f"wrote {len(paths)} SVG frames to {args.out}")
    else:
        out = Path(args.out)
        if out.suffix != ".csv":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "segments.csv"
        render_mod.render_segments_csv(coords, out)
        print(f"wrote limb segments to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dancegen",
        description="Train and run the music-to-dance skeleton generator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build aligned skeleton/mel feature files")
    p.add_argument("--manifest", required=True, help="clip manifest JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--sample-rate", type=int, default=audio_mod.DEFAULT_SAMPLE_RATE)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on a prepared dataset")
    p.add_argument("--data", required=True, help="prepared dataset directory")
    p.add_argument("--out", required=True, help="checkpoint/log output directory")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--limb-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-interval", type=int, default=500)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--enc-channels", type=int, default=256)
    p.add_argument("--dec-channels", type=int, default=128)
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate motion for a piece of music")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--audio", required=True, help="WAV file")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--fps", type=float, default=audio_mod.DEFAULT_FPS)
    p.add_argument("--sample-rate", type=int, default=audio_mod.DEFAULT_SAMPLE_RATE)
    p.add_argument("--seed-pose", default="mean",
                   help='"mean" for the checkpoint average pose, or an L2D1 file')
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="autocorrelation vs beat report")
    p.add_argument("--motion", required=True, help="44 x T L2D1 motion tensor")
    beat = p.add_mutually_exclusive_group(required=True)
    beat.add_argument("--bpm", type=float, default=None)
    beat.add_argument("--beats", default=None, help="file of beat frame indices")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--plot", default=None, help="optional SVG plot path")
    p.add_argument("--fps", type=float, default=audio_mod.DEFAULT_FPS)
    p.add_argument("--max-lag", type=int, default=0, help="0 = four beat periods")
    p.add_argument("--tolerance", type=float, default=2.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("render", help="stick-figure frames from a coordinate CSV")
    p.add_argument("--motion", required=True, help="30-column coordinate CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("svg", "csv"), default="svg")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DimensionError, DegenerateInputError, FormatError, NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
