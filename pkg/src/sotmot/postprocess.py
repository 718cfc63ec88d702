"""Gap interpolation and sliding-window smoothing of trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundingBox, Detection, Source, Trajectory


@dataclass(frozen=True)
class SmoothParams:
    window: int = 3

    def __post_init__(self):
        if self.window < 0:
            raise ValueError(f"smoothing half-width must be >= 0, got {self.window}")


def interpolate(t: Trajectory) -> Trajectory:
    """Fill every internal gap with linearly interpolated boxes.

    Filled detections are tagged Interpolated and take the smaller of the two
    boundary scores; existing detections are passed through untouched.
    """
    out: list[Detection] = []
    for d1, d2 in zip(t.detections, t.detections[1:]):
        out.append(d1)
        n = d2.frame - d1.frame
        if n <= 1:
            continue
        b1 = np.array(d1.box.as_tuple())
        b2 = np.array(d2.box.as_tuple())
        score = min(d1.score, d2.score)
        for k in range(1, n):
            frac = k / n
            box = b1 + (b2 - b1) * frac
            out.append(Detection(d1.frame + k, BoundingBox(*box), score, Source.INTERPOLATED))
    if t.detections:
        out.append(t.detections[-1])
    return Trajectory(t.id, out)


def smooth(t: Trajectory, params: SmoothParams = SmoothParams()) -> Trajectory:
    """Replace each box's centre and size by the mean over ``[I - l, I + l]``.

    All windows read the original boxes. Frames, scores and sources are kept.
    """
    if len(t) == 0 or params.window == 0:
        return Trajectory(t.id, list(t.detections))
    frames = np.array(t.frames)
    boxes = np.array([d.box.as_tuple() for d in t.detections])
    state = np.column_stack([boxes[:, 0] + 0.5 * boxes[:, 2], boxes[:, 1] + 0.5 * boxes[:, 3], boxes[:, 2], boxes[:, 3]])
    lo = np.searchsorted(frames, frames - params.window, side="left")
    hi = np.searchsorted(frames, frames + params.window, side="right")
    out = []
    for k, d in enumerate(t.detections):
        window = state[lo[k] : hi[k]]
        cx, cy, w, h = window.mean(axis=0)
        out.append(Detection(d.frame, BoundingBox.from_center(cx, cy, w, h), d.score, d.source))
    return Trajectory(t.id, out)
