"""Batch tracklet generation and long-term trajectory association."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .appearance import affinity_matrix, mean_feature, trajectory_feature
from .core import Detection, Trajectory, group_by_frame, iou


@dataclass(frozen=True)
class MotParams:
    batch_seconds: float = 1.0
    tail_size: int = 5
    l_min: int = 1
    l_max: int = 60
    tau_overlap: float = 0.5
    tau_match: float = 0.5
    tau_merge: float = 0.5
    max_open_gap: int = 1
    nms_mode: str = "iom"
    nms_threshold: float = 0.6

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError(f"l_max must be >= 1, got {self.l_max}")
        if self.tail_size < 1 or self.l_min < 0 or self.max_open_gap < 1:
            raise ValueError("tail_size and max_open_gap must be >= 1, l_min >= 0")
        if self.batch_seconds <= 0:
            raise ValueError("batch_seconds must be positive")
        for name in ("tau_overlap", "tau_match", "tau_merge", "nms_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.nms_mode not in ("iou", "iom"):
            raise ValueError(f"nms_mode must be 'iou' or 'iom', got {self.nms_mode!r}")


def batch_size(fps: float, params: MotParams) -> int:
    return max(1, int(round(fps * params.batch_seconds)))


def solve_assignment(m, gate: float) -> list[tuple[int, int]]:
    """Maximum-total one-to-one matching restricted to entries ``>= gate``.

    Forbidden entries are given weight zero for the solver and dropped from
    its answer, so the result is optimal among gated matchings.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return []
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise ValueError("assignment needs a finite 2-D matrix")
    allowed = m >= gate
    weights = np.where(allowed, np.maximum(m, 0.0), 0.0)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if allowed[r, c]]


def tail_feature(t: Trajectory, features: Mapping[Detection, np.ndarray], size: int = 5) -> np.ndarray:
    return mean_feature(features[d] for d in t.detections[-size:])


def _link(frames: Mapping[int, Sequence[Detection]], features, params: MotParams, tracklets: list[Trajectory], next_id: int) -> int:
    for frame in sorted(frames):
        dets = list(frames[frame])
        if not dets:
            continue
        open_ts = [t for t in tracklets if 0 < frame - t.last_frame <= params.max_open_gap]
        matched: set[int] = set()
        if open_ts:
            tails = np.array([tail_feature(t, features, params.tail_size) for t in open_ts])
            feats = np.array([features[d] for d in dets])
            for r, c in solve_assignment(affinity_matrix(tails, feats), params.tau_match):
                open_ts[r].detections.append(dets[c])
                matched.add(c)
        for c, d in enumerate(dets):
            if c not in matched:
                tracklets.append(Trajectory(next_id, [d]))
                next_id += 1
    return next_id


def generate_tracklets(batch: Mapping[int, Sequence[Detection]] | Iterable[Detection], features, params: MotParams = MotParams()) -> list[Trajectory]:
    """Frame-by-frame bipartite matching of tail features within one batch.

    Unmatched detections open new tracklets; tracklets of length
    ``<= params.l_min`` are dropped at the end.
    """
    if not isinstance(batch, Mapping):
        batch = group_by_frame(batch)
    tracklets: list[Trajectory] = []
    _link(batch, features, params, tracklets, 1)
    return [t for t in tracklets if len(t) > params.l_min]


def build_tracklets(detections: Iterable[Detection], features, params: MotParams, fps: float) -> list[Trajectory]:
    """Run tracklet generation batch after batch; open tracklets carry over batch edges."""
    by_frame = group_by_frame(detections)
    if not by_frame:
        return []
    size = batch_size(fps, params)
    first, last = min(by_frame), max(by_frame)
    tracklets: list[Trajectory] = []
    next_id = 1
    for start in range(first, last + 1, size):
        window = {f: by_frame[f] for f in range(start, start + size) if f in by_frame}
        next_id = _link(window, features, params, tracklets, next_id)
    return [t for t in tracklets if len(t) > params.l_min]


def merge_detections(t1: Trajectory, t2: Trajectory) -> list[Detection]:
    """Union by frame; on a shared frame the higher score wins (ties favour ``t1``)."""
    by_frame = {d.frame: d for d in t1.detections}
    for d in t2.detections:
        other = by_frame.get(d.frame)
        if other is None or d.score > other.score:
            by_frame[d.frame] = d
    return [by_frame[f] for f in sorted(by_frame)]


def velocity_bound(gap: int, width: float) -> float:
    if gap == 1:
        return width
    if gap <= 5:
        return 2.0 * width / 3.0
    return width / 3.0


def _overlap_runs(frames: Sequence[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for f in frames:
        if runs and f == runs[-1][-1] + 1:
            runs[-1].append(f)
        else:
            runs.append([f])
    return runs


def check_constraints(t1: Trajectory, t2: Trajectory, params: MotParams = MotParams()) -> bool:
    """Association predicate: overlap IOU, gap velocity and gap length."""
    a = {d.frame: d for d in t1.detections}
    b = {d.frame: d for d in t2.detections}
    common = sorted(a.keys() & b.keys())
    for run in _overlap_runs(common):
        mean_iou = sum(iou(a[f].box, b[f].box) for f in run) / len(run)
        if not mean_iou > params.tau_overlap:
            return False
    merged = merge_detections(t1, t2)
    for d1, d2 in zip(merged, merged[1:]):
        gap = d2.frame - d1.frame
        if gap > params.l_max:
            return False
        (x1, y1), (x2, y2) = d1.box.center, d2.box.center
        v = math.hypot(x2 - x1, y2 - y1) / gap
        if v > velocity_bound(gap, 0.5 * (d1.box.w + d2.box.w)):
            return False
    return True


def long_term_associate(trajectories: Iterable[Trajectory], features, params: MotParams = MotParams()) -> list[Trajectory]:
    """Greedily merge the most similar admissible pair until none is left.

    A pair is admissible when :func:`check_constraints` holds and the
    trajectory-feature affinity exceeds ``params.tau_merge``. The merged
    trajectory keeps the smaller id.
    """
    trajectories = list(trajectories)
    active = {t.id: Trajectory(t.id, list(t.detections)) for t in trajectories}
    if len(active) != len(trajectories):
        raise ValueError("trajectory ids must be unique")
    feats = {tid: trajectory_feature(t, features) for tid, t in active.items()}
    rejected: set[tuple[int, int]] = set()
    while len(active) > 1:
        ids = sorted(active)
        mat = np.array([feats[i] for i in ids])
        aff = np.clip((1.0 + mat @ mat.T) / 2.0, 0.0, 1.0)
        iu, ju = np.triu_indices(len(ids), k=1)
        vals = aff[iu, ju]
        mask = vals > params.tau_merge
        iu, ju, vals = iu[mask], ju[mask], vals[mask]
        order = np.lexsort((ju, iu, -vals))
        chosen = None
        for k in order:
            pair = (ids[iu[k]], ids[ju[k]])
            if pair in rejected:
                continue
            if check_constraints(active[pair[0]], active[pair[1]], params):
                chosen = pair
                break
            rejected.add(pair)
        if chosen is None:
            break
        i, j = chosen
        merged = Trajectory(i, merge_detections(active[i], active[j]))
        del active[j]
        active[i] = merged
        feats.pop(j)
        feats[i] = trajectory_feature(merged, features)
        rejected = {p for p in rejected if i not in p and j not in p}
    return [active[k] for k in sorted(active)]
