"""Identity-coloured box overlays written as PPM frames."""

from __future__ import annotations

import colorsys
from pathlib import Path
from typing import Iterable

import numpy as np

from .appearance import FrameStore, write_frame
from .core import Trajectory


def identity_color(tid: int) -> tuple[int, int, int]:
    hue = (tid * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.9, 1.0)
    return int(255 * r), int(255 * g), int(255 * b)


def draw_box(rgb: np.ndarray, box, color, thickness: int = 2) -> None:
    H, W = rgb.shape[:2]
    x0 = int(np.clip(np.floor(box.x), 0, W - 1))
    y0 = int(np.clip(np.floor(box.y), 0, H - 1))
    x1 = int(np.clip(np.ceil(box.x + box.w) - 1, 0, W - 1))
    y1 = int(np.clip(np.ceil(box.y + box.h) - 1, 0, H - 1))
    t = thickness
    rgb[y0 : min(y0 + t, y1 + 1), x0 : x1 + 1] = color
    rgb[max(y1 - t + 1, y0) : y1 + 1, x0 : x1 + 1] = color
    rgb[y0 : y1 + 1, x0 : min(x0 + t, x1 + 1)] = color
    rgb[y0 : y1 + 1, max(x1 - t + 1, x0) : x1 + 1] = color


def dump_overlays(frames: FrameStore, trajectories: Iterable[Trajectory], out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_frame: dict[int, list] = {}
    for t in trajectories:
        for d in t.detections:
            by_frame.setdefault(d.frame, []).append((t.id, d.box))
    for f in range(1, len(frames) + 1):
        gray = np.clip(np.rint(frames[f] * 255.0), 0, 255).astype(np.uint8)
        rgb = np.repeat(gray[:, :, None], 3, axis=2)
        for tid, box in by_frame.get(f, ()):
            draw_box(rgb, box, identity_color(tid))
        write_frame(out / f"{f:06d}.ppm", rgb)
    return len(frames)
