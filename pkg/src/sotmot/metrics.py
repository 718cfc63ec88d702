"""CLEAR-MOT evaluation (MOTA, MOTP, FP, FN, ID switches, MT/ML, Frag)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .association import solve_assignment
from .core import BoundingBox, Trajectory, boxes_array, iom
from .kernels import iou_matrix


class MalformedInput(ValueError):
    pass


@dataclass
class FrameLog:
    frame: int
    matches: dict[int, int]
    missed: list[int]
    false_positives: list[int]
    switches: list[int]


@dataclass
class EvalReport:
    mota: float
    motp: float
    fp: int
    fn: int
    idsw: int
    frag: int
    mt: int
    ml: int
    gt_total: int
    gt_tracks: int
    matches: int
    frames: list[FrameLog] = field(default_factory=list, repr=False)

    @property
    def mt_pct(self) -> float:
        return 100.0 * self.mt / self.gt_tracks if self.gt_tracks else 0.0

    @property
    def ml_pct(self) -> float:
        return 100.0 * self.ml / self.gt_tracks if self.gt_tracks else 0.0

    def as_dict(self) -> dict[str, float | int]:
        return {
            "MOTA": self.mota,
            "MOTP": self.motp,
            "FP": self.fp,
            "FN": self.fn,
            "ID Sw.": self.idsw,
            "Frag": self.frag,
            "MT": self.mt,
            "ML": self.ml,
            "MT%": self.mt_pct,
            "ML%": self.ml_pct,
            "GT": self.gt_total,
            "GT tracks": self.gt_tracks,
        }

    def to_keyvalue(self) -> str:
        return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in self.as_dict().items())

    def to_table(self, name: str = "") -> str:
        header = ["", "MOTA", "MOTP", "MT", "ML", "FP", "FN", "ID Sw.", "Frag"]
        row = [
            name or "-",
            f"{100 * self.mota:.1f}",
            f"{100 * self.motp:.1f}",
            f"{self.mt_pct:.1f}%",
            f"{self.ml_pct:.1f}%",
            str(self.fp),
            str(self.fn),
            str(self.idsw),
            str(self.frag),
        ]
        widths = [max(len(a), len(b)) for a, b in zip(header, row)]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths)).rstrip()
        return fmt(header) + "\n" + fmt(row) + "\n"


def parse_keyvalue_report(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = float(v)
    return out


def _index(trajectories: Iterable[Trajectory], what: str) -> dict[int, dict[int, BoundingBox]]:
    by_frame: dict[int, dict[int, BoundingBox]] = {}
    for t in trajectories:
        for d in t.detections:
            slot = by_frame.setdefault(d.frame, {})
            if t.id in slot:
                raise MalformedInput(f"{what}: duplicate (frame, id) = ({d.frame}, {t.id})")
            slot[t.id] = d.box
    return by_frame


def _filter_ignored(hyp: dict[int, dict[int, BoundingBox]], ignore: dict[int, list[BoundingBox]], threshold: float = 0.5):
    out = {}
    for frame, boxes in hyp.items():
        regions = ignore.get(frame, [])
        out[frame] = {hid: b for hid, b in boxes.items() if not any(iom(b, r) > threshold for r in regions)}
    return out


def evaluate(
    gt: Sequence[Trajectory],
    hyp: Sequence[Trajectory],
    iou_gate: float = 0.5,
    ignore: Iterable[tuple[int, BoundingBox]] | None = None,
) -> EvalReport:
    """CLEAR-MOT scores of ``hyp`` against ``gt``.

    Correspondences from the previous frame are kept while their IOU stays
    at or above the gate; the rest are matched by maximum total IOU.
    ``ignore`` holds ``(frame, box)`` regions; hypotheses covering one with
    IOM > 0.5 are discarded before counting.
    """
    gt_frames = _index(gt, "ground truth")
    hyp_frames = _index(hyp, "hypotheses")
    if ignore is not None:
        regions: dict[int, list[BoundingBox]] = {}
        for frame, box in ignore:
            regions.setdefault(frame, []).append(box)
        hyp_frames = _filter_ignored(hyp_frames, regions)

    fp = fn = idsw = frag = matches = 0
    iou_sum = 0.0
    current: dict[int, int] = {}
    last_match: dict[int, int] = {}
    present: dict[int, int] = {}
    tracked: dict[int, int] = {}
    was_tracked: dict[int, bool] = {}
    logs: list[FrameLog] = []

    for frame in sorted(gt_frames.keys() | hyp_frames.keys()):
        g = gt_frames.get(frame, {})
        h = hyp_frames.get(frame, {})
        pairs: dict[int, int] = {}
        overlaps: dict[int, float] = {}
        used: set[int] = set()
        for gid, hid in sorted(current.items()):
            if gid in g and hid in h and hid not in used:
                v = float(iou_matrix(boxes_array([g[gid]]), boxes_array([h[hid]]))[0, 0])
                if v >= iou_gate:
                    pairs[gid] = hid
                    overlaps[gid] = v
                    used.add(hid)
        free_g = [gid for gid in sorted(g) if gid not in pairs]
        free_h = [hid for hid in sorted(h) if hid not in used]
        if free_g and free_h:
            m = iou_matrix(boxes_array(g[i] for i in free_g), boxes_array(h[j] for j in free_h))
            for r, c in solve_assignment(m, iou_gate):
                pairs[free_g[r]] = free_h[c]
                overlaps[free_g[r]] = float(m[r, c])
        switches = []
        for gid, hid in sorted(pairs.items()):
            if gid in last_match and last_match[gid] != hid:
                switches.append(gid)
            last_match[gid] = hid
        matched_h = set(pairs.values())
        missed = [gid for gid in sorted(g) if gid not in pairs]
        false_pos = [hid for hid in sorted(h) if hid not in matched_h]
        for gid in g:
            present[gid] = present.get(gid, 0) + 1
            is_tracked = gid in pairs
            if is_tracked:
                tracked[gid] = tracked.get(gid, 0) + 1
            elif was_tracked.get(gid, False):
                frag += 1
            was_tracked[gid] = is_tracked
        fn += len(missed)
        fp += len(false_pos)
        idsw += len(switches)
        matches += len(pairs)
        iou_sum += sum(overlaps.values())
        current = pairs
        logs.append(FrameLog(frame, dict(pairs), missed, false_pos, switches))

    gt_total = sum(present.values())
    errors = fn + fp + idsw
    if gt_total:
        mota = 1.0 - errors / gt_total
    else:
        mota = 1.0 if errors == 0 else -math.inf
    motp = iou_sum / matches if matches else 0.0
    mt = sum(1 for gid, n in present.items() if tracked.get(gid, 0) >= 0.8 * n)
    ml = sum(1 for gid, n in present.items() if tracked.get(gid, 0) <= 0.2 * n)
    return EvalReport(mota, motp, fp, fn, idsw, frag, mt, ml, gt_total, len(present), matches, logs)
