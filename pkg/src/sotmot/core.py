"""Geometric types, overlap measures and non-maximum suppression."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np


class Source(enum.Enum):
    DETECTOR = "detector"
    SOT = "sot"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box; ``(x, y)`` is the top-left corner, all values in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box needs positive width and height, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + 0.5 * self.w, self.y + 0.5 * self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - 0.5 * w, cy - 0.5 * h, w, h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h

    def clip(self, width: int, height: int) -> "BoundingBox | None":
        """Clip to ``[0, width] x [0, height]``; None when nothing remains."""
        x0 = max(self.x, 0.0)
        y0 = max(self.y, 0.0)
        x1 = min(self.x + self.w, float(width))
        y1 = min(self.y + self.h, float(height))
        if x1 <= x0 or y1 <= y0:
            return None
        if (x0, y0, x1 - x0, y1 - y0) == self.as_tuple():
            return self
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True, slots=True)
class Detection:
    frame: int
    box: BoundingBox
    score: float
    source: Source = Source.DETECTOR

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frames are 1-indexed, got {self.frame}")


@dataclass
class Trajectory:
    """Identity-labelled detections ordered by frame; gaps are allowed."""

    id: int
    detections: list[Detection] = field(default_factory=list)

    def __post_init__(self):
        frames = [d.frame for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"trajectory {self.id}: frames must be strictly increasing")

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self):
        return iter(self.detections)

    @property
    def frames(self) -> list[int]:
        return [d.frame for d in self.detections]

    @property
    def first_frame(self) -> int:
        return self.detections[0].frame

    @property
    def last_frame(self) -> int:
        return self.detections[-1].frame

    def at(self, frame: int) -> Detection | None:
        for d in self.detections:
            if d.frame == frame:
                return d
        return None

    def with_detections(self, detections: Sequence[Detection]) -> "Trajectory":
        return Trajectory(self.id, list(detections))


def _extent(b: BoundingBox) -> float:
    # corner-based so identical boxes give intersection == area bit for bit
    return ((b.x + b.w) - b.x) * ((b.y + b.h) - b.y)


def _intersection(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    return min(1.0, inter / (_extent(a) + _extent(b) - inter))


def iom(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over the smaller of the two areas."""
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    return min(1.0, inter / min(_extent(a), _extent(b)))


OVERLAPS = {"iou": iou, "iom": iom}


def boxes_array(boxes: Iterable[BoundingBox]) -> np.ndarray:
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def nms(detections: Sequence[Detection], overlap: str = "iom", threshold: float = 0.6) -> list[Detection]:
    """Greedy score-ordered suppression within one frame.

    A detection survives iff its overlap with every already-kept detection is
    at most ``threshold``. Equal scores keep input order. Survivors are
    returned in the order they were kept.
    """
    if overlap not in OVERLAPS:
        raise ValueError(f"unknown overlap measure {overlap!r}")
    measure = OVERLAPS[overlap]
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    kept: list[Detection] = []
    for i in order:
        d = detections[i]
        if all(measure(d.box, k.box) <= threshold for k in kept):
            kept.append(d)
    return kept


def nms_by_frame(detections: Iterable[Detection], overlap: str = "iom", threshold: float = 0.6) -> list[Detection]:
    """Apply :func:`nms` frame by frame; output sorted by frame (stable within a frame)."""
    out: list[Detection] = []
    for frame, group in sorted(group_by_frame(detections).items()):
        out.extend(nms(group, overlap, threshold))
    return out


def group_by_frame(detections: Iterable[Detection]) -> dict[int, list[Detection]]:
    groups: dict[int, list[Detection]] = {}
    for d in detections:
        groups.setdefault(d.frame, []).append(d)
    return groups


def with_source(d: Detection, source: Source, score: float | None = None) -> Detection:
    return replace(d, source=source, score=d.score if score is None else score)
