"""Single-object-tracking extension of detections (detector false-negative recovery).

Every detection spawns a forward and a backward tracklet end. Ends are
processed best-score-first: an end either merges with an opposite end in the
adjacent frame, or is extended by template search around its current box,
always compared against the detector anchor it started from.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .appearance import AppearanceBackend, FeatureCache, FrameStore, affinity, affinity_matrix
from .core import BoundingBox, Detection, Source, Trajectory, boxes_array, iou
from .kernels import iou_matrix


class IncompatibleBackend(ValueError):
    """The backend cannot score freshly sampled candidate boxes."""


@dataclass(frozen=True)
class SotParams:
    tau: float = 0.5
    tau_iou: float = 0.5
    tau_app: float = 0.75
    decay: float = 0.9
    max_len: int = 15
    n_candidates: int = 256
    sigma_pos_frac: float = 0.2
    sigma_scale: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must lie in (0, 1), got {self.decay}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        for name in ("tau", "tau_iou", "tau_app"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_candidates < 0 or self.sigma_pos_frac < 0 or self.sigma_scale < 0:
            raise ValueError("sampling parameters must be nonnegative")


@dataclass
class TrackletEnd:
    current: Detection
    anchor: Detection
    score: float
    length: int
    direction: int
    valid: bool = True
    current_idx: int = -1
    anchor_idx: int = -1
    stamp: int = 0


class EndRegistry:
    """Valid tracklet ends keyed by (detection index, direction)."""

    def __init__(self):
        self._stamps: dict[tuple[int, int], int] = {}
        self._by_frame: dict[tuple[int, int], set[int]] = {}
        self._next_stamp = 0

    def add(self, idx: int, frame: int, direction: int) -> int:
        self._next_stamp += 1
        self._stamps[(idx, direction)] = self._next_stamp
        self._by_frame.setdefault((frame, direction), set()).add(idx)
        return self._next_stamp

    def remove(self, idx: int, frame: int, direction: int) -> None:
        self._stamps.pop((idx, direction), None)
        self._by_frame.get((frame, direction), set()).discard(idx)

    def is_valid(self, idx: int, direction: int, stamp: int) -> bool:
        return self._stamps.get((idx, direction)) == stamp

    def __contains__(self, key: tuple[int, int]) -> bool:
        return key in self._stamps

    def open_at(self, frame: int, direction: int) -> list[int]:
        return sorted(self._by_frame.get((frame, direction), ()))


@dataclass
class SotResult:
    detections: list[Detection]
    tracklets: list[Trajectory]
    added: list[Detection] = field(default_factory=list)
    anchors: dict[int, int] = field(default_factory=dict)
    depth: dict[int, int] = field(default_factory=dict)
    directions: dict[int, int] = field(default_factory=dict)
    popped_scores: list[float] = field(default_factory=list)
    n_next_calls: int = 0
    n_merges: int = 0


def sample_candidates(prior: BoundingBox, frame: int, params: SotParams, rng: np.random.Generator) -> list[Detection]:
    """Gaussian position/scale samples around ``prior``; candidate 0 is ``prior`` itself.

    Returns ``1 + params.n_candidates`` detections (score 0, source SOT).
    """
    boxes = candidate_boxes(prior, params, rng)
    return [Detection(frame, BoundingBox(*b), 0.0, Source.SOT) for b in boxes]


def candidate_boxes(prior: BoundingBox, params: SotParams, rng: np.random.Generator) -> np.ndarray:
    n = params.n_candidates
    cx, cy = prior.center
    centres = rng.standard_normal((n, 2)) * np.array([params.sigma_pos_frac * prior.w, params.sigma_pos_frac * prior.h])
    scale = np.exp(rng.standard_normal(n) * params.sigma_scale)
    w = prior.w * scale
    h = prior.h * scale
    out = np.empty((n + 1, 4))
    out[0] = prior.as_tuple()
    out[1:, 0] = cx + centres[:, 0] - 0.5 * w
    out[1:, 1] = cy + centres[:, 1] - 0.5 * h
    out[1:, 2] = w
    out[1:, 3] = h
    return out


def _clip_boxes(boxes: np.ndarray, frames: FrameStore | None) -> np.ndarray:
    if frames is None:
        return boxes
    x0 = np.maximum(boxes[:, 0], 0.0)
    y0 = np.maximum(boxes[:, 1], 0.0)
    x1 = np.minimum(boxes[:, 0] + boxes[:, 2], float(frames.width))
    y1 = np.minimum(boxes[:, 1] + boxes[:, 3], float(frames.height))
    out = np.stack([x0, y0, x1 - x0, y1 - y0], axis=1)
    # keep the exact input where clipping was a no-op
    same = (boxes[:, 0] >= 0) & (boxes[:, 1] >= 0) & (boxes[:, 0] + boxes[:, 2] <= frames.width) & (boxes[:, 1] + boxes[:, 3] <= frames.height)
    out[same] = boxes[same]
    return out


def next_detection(
    prior: BoundingBox,
    anchor_feature: np.ndarray,
    frame: int,
    backend: AppearanceBackend,
    frames: FrameStore | None,
    params: SotParams,
    rng: np.random.Generator,
) -> Detection | None:
    """Best-matching candidate in ``frame`` against the anchor feature.

    None when no candidate is valid or the best affinity does not exceed
    ``params.tau``. The returned detection is scored with that affinity.
    """
    if not backend.can_score_arbitrary_boxes:
        raise IncompatibleBackend(f"backend {backend.name!r} cannot score sampled boxes")
    boxes = _clip_boxes(candidate_boxes(prior, params, rng), frames)
    keep = (boxes[:, 2] > 0) & (boxes[:, 3] > 0)
    boxes = boxes[keep]
    if len(boxes) == 0:
        return None
    cand = [BoundingBox(*b) for b in boxes]
    feats = backend.features(frames, frame, cand)
    scores = affinity_matrix(anchor_feature, feats)[0]
    best = int(np.argmax(scores))
    if scores[best] <= params.tau:
        return None
    return Detection(frame, cand[best], float(scores[best]), Source.SOT)


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def run_sot(
    detections: Sequence[Detection],
    backend: AppearanceBackend,
    frames: FrameStore | None,
    params: SotParams = SotParams(),
    frame_range: tuple[int, int] | None = None,
    features: FeatureCache | None = None,
    regressor: Callable[[Detection], Detection] | None = None,
) -> SotResult:
    """Extend every detection through adjacent frames of one batch.

    ``frame_range`` (inclusive) bounds the extension; it defaults to the span
    of the input. Returns the enlarged detection set (inputs first, in input
    order, then SOT detections in creation order) and the provisional
    tracklets.
    """
    if not backend.can_score_arbitrary_boxes:
        raise IncompatibleBackend(f"backend {backend.name!r} cannot score sampled boxes; disable the SOT step")
    dets = list(detections)
    result = SotResult(detections=dets, tracklets=[])
    if not dets:
        return result
    if frame_range is None:
        frame_range = (min(d.frame for d in dets), max(d.frame for d in dets))
    lo, hi = frame_range
    if frames is not None:
        hi = min(hi, len(frames))
    cache = features if features is not None else FeatureCache(backend, frames)
    cache.prime(dets)
    rng = np.random.default_rng(np.random.SeedSequence(params.rng_seed, spawn_key=(lo,)))

    uf = _UnionFind()
    frame_index: dict[int, list[int]] = {}
    for i, d in enumerate(dets):
        uf.add()
        frame_index.setdefault(d.frame, []).append(i)

    ends = EndRegistry()
    queue: list[tuple[float, int, TrackletEnd]] = []
    counter = 0

    def push(end: TrackletEnd):
        nonlocal counter
        heapq.heappush(queue, (-end.score, counter, end))
        counter += 1

    for i, d in enumerate(dets):
        for direction in (-1, 1):
            stamp = ends.add(i, d.frame, direction)
            push(TrackletEnd(d, d, d.score, 1, direction, True, i, i, stamp))

    while queue:
        _, _, end = heapq.heappop(queue)
        if not ends.is_valid(end.current_idx, end.direction, end.stamp):
            end.valid = False
            continue
        result.popped_scores.append(end.score)
        if end.length >= params.max_len:
            continue
        d, direction = end.current, end.direction
        target = d.frame + direction
        if target < lo or target > hi:
            continue

        # merge with an opposite-facing end in the adjacent frame
        f_d = cache[d]
        best_j, best_aff = -1, -np.inf
        for j in ends.open_at(target, -direction):
            if uf.find(j) == uf.find(end.current_idx):
                continue
            d0 = dets[j]
            a = affinity(cache[d0], f_d)
            if a > params.tau_app and iou(d0.box, d.box) > params.tau_iou and a > best_aff:
                best_j, best_aff = j, a
        if best_j >= 0:
            ends.remove(end.current_idx, d.frame, direction)
            ends.remove(best_j, target, -direction)
            uf.union(end.current_idx, best_j)
            result.n_merges += 1
            continue

        anchor_feature = cache[end.anchor]
        result.n_next_calls += 1
        found = next_detection(d.box, anchor_feature, target, backend, frames, params, rng)
        if found is None:
            continue
        if regressor is not None:
            found = regressor(found)
        if affinity(anchor_feature, cache[found]) < params.tau_app:
            continue
        root = uf.find(end.current_idx)
        others = [j for j in frame_index.get(target, ()) if uf.find(j) != root]
        if others:
            ious = iou_matrix(boxes_array([found.box]), boxes_array(dets[j].box for j in others))[0]
            if np.any(ious > params.tau_iou):
                continue
        new_idx = len(dets)
        dets.append(found)
        uf.add()
        uf.union(end.current_idx, new_idx)
        frame_index.setdefault(target, []).append(new_idx)
        result.added.append(found)
        result.anchors[new_idx] = end.anchor_idx
        result.depth[new_idx] = end.length
        result.directions[new_idx] = direction
        ends.remove(end.current_idx, d.frame, direction)
        stamp = ends.add(new_idx, target, direction)
        push(TrackletEnd(found, end.anchor, end.score * params.decay, end.length + 1, direction, True, new_idx, end.anchor_idx, stamp))

    groups: dict[int, list[Detection]] = {}
    for i, d in enumerate(dets):
        groups.setdefault(uf.find(i), []).append(d)
    result.tracklets = [
        Trajectory(k + 1, sorted(members, key=lambda x: x.frame))
        for k, (_, members) in enumerate(sorted(groups.items()))
    ]
    return result
