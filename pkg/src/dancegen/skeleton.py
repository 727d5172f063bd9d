"""Pose ingestion and the 44-dim skeleton feature pipeline.

Per clip: per-frame keypoint JSON (or a 45-column CSV) -> 15-joint frames
with presence flags -> linear interpolation of missing joints -> per-axis
min-max normalization -> 44-dim frame vectors (30 coordinates + 14 limb
lengths scaled by 1/sqrt(2) so everything lives in [0, 1]).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, FormatError
from . import tensorfile

CONFIDENCE_THRESHOLD = 0.1
LENGTH_SCALE = 1.0 / math.sqrt(2.0)  # unit-square coords bound lengths by sqrt(2)
TOPOLOGY_VERSION = 1

JOINT_NAMES = (
    "Head", "Neck", "RShoulder", "RElbow", "RWrist",
    "LShoulder", "LElbow", "LWrist", "Chest",
    "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
)

LIMB_EDGES = (
    (0, 1),    # Head-Neck
    (1, 2),    # Neck-RShoulder
    (2, 3),    # RShoulder-RElbow
    (3, 4),    # RElbow-RWrist
    (1, 5),    # Neck-LShoulder
    (5, 6),    # LShoulder-LElbow
    (6, 7),    # LElbow-LWrist
    (1, 8),    # Neck-Chest
    (8, 9),    # Chest-RHip
    (9, 10),   # RHip-RKnee
    (10, 11),  # RKnee-RAnkle
    (8, 12),   # Chest-LHip
    (12, 13),  # LHip-LKnee
    (13, 14),  # LKnee-LAnkle
)

# Source keypoint index per joint, by detector layout. The 18-point layout
# has no pelvis point, so Chest is synthesized as the hip midpoint; the
# 25-point layout maps Chest to its MidHip keypoint.
_LAYOUT_18 = (0, 1, 2, 3, 4, 5, 6, 7, None, 8, 9, 10, 11, 12, 13)
_LAYOUT_25 = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14)


@dataclass(frozen=True)
class SkeletonTopology:
    joint_names: tuple = JOINT_NAMES
    edges: tuple = LIMB_EDGES

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.edges) != n - 1:
            raise DimensionError("edge count must be joints - 1 for a tree")
        reached = {0}
        frontier = [0]
        adjacency = {i: [] for i in range(n)}
        for a, b in self.edges:
            adjacency[a].append(b)
            adjacency[b].append(a)
        while frontier:
            node = frontier.pop()
            for other in adjacency[node]:
                if other not in reached:
                    reached.add(other)
                    frontier.append(other)
        if len(reached) != n:
            raise DimensionError("limb edges do not span all joints")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)


TOPOLOGY = SkeletonTopology()


@dataclass
class JointFrame:
    """One frame: (15, 2) coordinates and a (15,) presence mask."""

    xy: np.ndarray
    present: np.ndarray

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64)
        self.present = np.asarray(self.present, dtype=bool)
        if self.xy.shape != (15, 2) or self.present.shape != (15,):
            raise DimensionError("JointFrame holds 15 joints")


@dataclass
class NormMeta:
    """Per-axis (min, max) used by min-max normalization."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max,
                "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d: dict) -> "NormMeta":
        return cls(d["x_min"], d["x_max"], d["y_min"], d["y_max"])

    @classmethod
    def identity(cls) -> "NormMeta":
        return cls(0.0, 1.0, 0.0, 1.0)

    def denormalize(self, coords: np.ndarray) -> np.ndarray:
        """Map (..., 15, 2) normalized coordinates back to source units."""
        out = np.array(coords, dtype=np.float64)
        out[..., 0] = out[..., 0] * (self.x_max - self.x_min) + self.x_min
        out[..., 1] = out[..., 1] * (self.y_max - self.y_min) + self.y_min
        return out


def _frame_from_keypoints(kp: np.ndarray) -> JointFrame:
    n = kp.shape[0]
    if n == 18:
        layout = _LAYOUT_18
    elif n == 25:
        layout = _LAYOUT_25
    else:
        raise FormatError(f"unsupported keypoint layout with {n} points")
    xy = np.zeros((15, 2))
    present = np.zeros(15, dtype=bool)
    for j, src in enumerate(layout):
        if src is None:
            continue
        xy[j] = kp[src, :2]
        present[j] = kp[src, 2] >= CONFIDENCE_THRESHOLD
    if layout is _LAYOUT_18:
        # Chest := hip midpoint, available only when both hips are.
        r_hip, l_hip = 9, 12
        if present[r_hip] and present[l_hip]:
            xy[8] = 0.5 * (xy[r_hip] + xy[l_hip])
            present[8] = True
    return JointFrame(xy, present)


def ingest_openpose(directory) -> list[JointFrame]:
    """Load per-frame keypoint JSON files (zero-padded names sort in time order).

    The first detected person in each file is used; frames with no people
    come back with every joint absent.
    """
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise FormatError(f"no keypoint JSON files in {directory}")
    frames = []
    for path in paths:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"unreadable keypoint file {path}: {exc}") from exc
        people = doc.get("people", [])
        if not people:
            frames.append(JointFrame(np.zeros((15, 2)), np.zeros(15, dtype=bool)))
            continue
        flat = np.asarray(people[0].get("pose_keypoints_2d", []), dtype=np.float64)
        if flat.size % 3 != 0:
            raise FormatError(f"keypoint array in {path} is not (x, y, c) triples")
        frames.append(_frame_from_keypoints(flat.reshape(-1, 3)))
    return frames


def ingest_csv(path) -> list[JointFrame]:
    """Canonical CSV ingestion: T rows of 45 values (15 x (x, y, conf))."""
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    if table.shape[1] != 45:
        raise FormatError(f"expected 45 columns, got {table.shape[1]}")
    frames = []
    for row in table:
        kp = row.reshape(15, 3)
        xy = kp[:, :2].copy()
        present = kp[:, 2] >= CONFIDENCE_THRESHOLD
        frames.append(JointFrame(xy, present))
    return frames


def interpolate_missing(frames: list[JointFrame]) -> list[JointFrame]:
    """Fill absent joints by linear interpolation in time (hold at the ends).

    Idempotent; raises if some joint is absent from every frame.
    """
    T = len(frames)
    if T == 0:
        raise DegenerateInputError("no frames to interpolate")
    xy = np.stack([f.xy for f in frames])          # (T, 15, 2)
    present = np.stack([f.present for f in frames])  # (T, 15)
    times = np.arange(T)
    out = xy.copy()
    for j in range(15):
        known = np.flatnonzero(present[:, j])
        if known.size == 0:
            raise DegenerateInputError(
                f"joint {JOINT_NAMES[j]} is absent from every frame")
        if known.size == T:
            continue
        for axis in (0, 1):
            out[:, j, axis] = np.interp(times, known, xy[known, j, axis])
    return [JointFrame(out[t], np.ones(15, dtype=bool)) for t in range(T)]


def minmax_normalize(frames: list[JointFrame]) -> tuple[list[JointFrame], NormMeta]:
    """Per-axis min-max over the whole clip; all joints must be present."""
    if not all(f.present.all() for f in frames):
        raise DegenerateInputError("normalize requires fully interpolated frames")
    xy = np.stack([f.xy for f in frames])
    x_min, x_max = float(xy[..., 0].min()), float(xy[..., 0].max())
    y_min, y_max = float(xy[..., 1].min()), float(xy[..., 1].max())
    if x_max == x_min or y_max == y_min:
        raise DegenerateInputError("degenerate axis: max equals min")
    scaled = np.empty_like(xy)
    scaled[..., 0] = (xy[..., 0] - x_min) / (x_max - x_min)
    scaled[..., 1] = (xy[..., 1] - y_min) / (y_max - y_min)
    meta = NormMeta(x_min, x_max, y_min, y_max)
    return [JointFrame(scaled[t], np.ones(15, dtype=bool)) for t in range(len(frames))], meta


def limb_lengths(xy: np.ndarray, topology: SkeletonTopology = TOPOLOGY) -> np.ndarray:
    """Euclidean limb lengths in edge order; accepts (..., 15, 2)."""
    pts = np.asarray(xy, dtype=np.float64)
    a = np.asarray([e[0] for e in topology.edges])
    b = np.asarray([e[1] for e in topology.edges])
    diff = pts[..., a, :] - pts[..., b, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass
class SkeletonSequence:
    """T x 44 feature matrix plus the metadata needed to undo normalization."""

    frames: np.ndarray  # (T, 44) float32 in [0, 1]
    norm_meta: NormMeta
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[1] != 44:
            raise DimensionError(f"SkeletonSequence frames must be T x 44, got {self.frames.shape}")

    def __len__(self) -> int:
        return self.frames.shape[0]

    def coords(self) -> np.ndarray:
        """(T, 15, 2) normalized coordinates."""
        return self.frames[:, :30].reshape(len(self), 15, 2).astype(np.float64)

    def length_block(self) -> np.ndarray:
        """(T, 14) stored limb lengths (already scaled by 1/sqrt(2))."""
        return self.frames[:, 30:]

    def to_tensor(self) -> np.ndarray:
        """(44, T) float32 layout the model consumes."""
        return np.ascontiguousarray(self.frames.T)

    @classmethod
    def from_tensor(cls, data: np.ndarray, norm_meta: NormMeta, fps: float) -> "SkeletonSequence":
        if data.shape[0] != 44:
            raise DimensionError(f"expected 44 x T tensor, got {data.shape}")
        return cls(np.ascontiguousarray(data.T), norm_meta, fps)


def build_sequence(frames: list[JointFrame], topology: SkeletonTopology = TOPOLOGY,
                   fps: float = 30.0, norm_meta: NormMeta | None = None) -> SkeletonSequence:
    """Pack normalized frames into 44-dim vectors: x0,y0..x14,y14 then lengths/sqrt(2)."""
    xy = np.stack([f.xy for f in frames])  # (T, 15, 2)
    coords = xy.reshape(len(frames), 30)
    lengths = limb_lengths(xy, topology) * LENGTH_SCALE
    feats = np.concatenate([coords, lengths], axis=1)
    if feats.min() < -1e-6 or feats.max() > 1.0 + 1e-6:
        raise DegenerateInputError("features outside [0, 1]; normalize before building")
    return SkeletonSequence(feats.astype(np.float32),
                            norm_meta or NormMeta.identity(), fps)


def pipeline(frames: list[JointFrame], topology: SkeletonTopology = TOPOLOGY,
             fps: float = 30.0) -> SkeletonSequence:
    """ingest -> interpolate -> normalize -> 44-dim sequence."""
    filled = interpolate_missing(frames)
    normalized, meta = minmax_normalize(filled)
    return build_sequence(normalized, topology, fps, meta)


def save_sequence(path_prefix, seq: SkeletonSequence) -> tuple[Path, Path]:
    """Write <prefix>.skel.l2d (44 x T) and <prefix>.skel.json sidecar."""
    tensor_path = Path(str(path_prefix) + ".skel.l2d")
    sidecar_path = Path(str(path_prefix) + ".skel.json")
    tensorfile.write_tensor(tensor_path, seq.to_tensor())
    sidecar = {
        "norm_meta": seq.norm_meta.to_dict(),
        "fps": seq.fps,
        "topology_version": TOPOLOGY_VERSION,
        "frames": len(seq),
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return tensor_path, sidecar_path


def load_sequence(tensor_path) -> SkeletonSequence:
    """Read a 44 x T tensor plus its .json sidecar back into a sequence."""
    tensor_path = Path(tensor_path)
    if not tensor_path.name.endswith(".l2d"):
        raise FormatError(f"expected a .l2d tensor path, got {tensor_path}")
    sidecar_path = tensor_path.with_name(tensor_path.name[: -len(".l2d")] + ".json")
    data = tensorfile.read_tensor(tensor_path)
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    return SkeletonSequence.from_tensor(
        data, NormMeta.from_dict(sidecar["norm_meta"]), sidecar["fps"])
