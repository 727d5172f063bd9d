"""Stick-figure rendering of 30-column coordinate CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .exceptions import FormatError
from .skeleton import SkeletonTopology, TOPOLOGY

VIEW = 400
MARGIN = 0.05


def load_coords_csv(path) -> np.ndarray:
    """T x 30 coordinate rows (x0, y0, ..., x14, y14)."""
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.shape[1] != 30:
        raise FormatError(f"expected 30 columns of coordinates, got {rows.shape[1]}")
    if not np.isfinite(rows).all():
        raise FormatError("non-finite coordinate values")
    return rows


def write_coords_csv(path, coords: np.ndarray) -> None:
    np.savetxt(path, np.asarray(coords).reshape(len(coords), 30),
               delimiter=",", fmt="%.6f")


def _view_transform(coords: np.ndarray):
    """Map the whole clip's bounding box into the fixed viewbox."""
    pts = coords.reshape(-1, 15, 2)
    x_lo, x_hi = pts[..., 0].min(), pts[..., 0].max()
    y_lo, y_hi = pts[..., 1].min(), pts[..., 1].max()
    span = max(x_hi - x_lo, y_hi - y_lo, 1e-9)
    scale = VIEW * (1 - 2 * MARGIN) / span

    def to_view(x, y):
        return (VIEW * MARGIN + (x - x_lo) * scale,
                VIEW * MARGIN + (y - y_lo) * scale)

    return to_view


def frame_svg(frame_xy: np.ndarray, to_view, topology: SkeletonTopology = TOPOLOGY) -> str:
    """One pose as an SVG: exactly 14 limb lines and 15 joint circles."""
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW} {VIEW}">']
    for a, b in topology.edges:
        x1, y1 = to_view(*frame_xy[a])
        x2, y2 = to_view(*frame_xy[b])
        parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                     'stroke="#222" stroke-width="2"/>')
    for x, y in frame_xy:
        vx, vy = to_view(x, y)
        parts.append(f'<circle cx="{vx:.2f}" cy="{vy:.2f}" r="4" fill="#d2413a"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_svg_frames(coords: np.ndarray, out_dir,
                      topology: SkeletonTopology = TOPOLOGY) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    to_view = _view_transform(coords)
    paths = []
    for t, row in enumerate(coords):
        path = out_dir / f"frame_{t:06d}.svg"
        path.write_text(frame_svg(row.reshape(15, 2), to_view, topology))
        paths.append(path)
    return paths


def render_segments_csv(coords: np.ndarray, out_path,
                        topology: SkeletonTopology = TOPOLOGY) -> Path:
    """Consolidated per-frame limb segments: frame, edge, x1, y1, x2, y2."""
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "edge", "x1", "y1", "x2", "y2"])
        for t, row in enumerate(coords):
            pts = row.reshape(15, 2)
            for e, (a, b) in enumerate(topology.edges):
                writer.writerow([t, e, f"{pts[a, 0]:.6f}", f"{pts[a, 1]:.6f}",
                                 f"{pts[b, 0]:.6f}", f"{pts[b, 1]:.6f}"])
    return out_path
