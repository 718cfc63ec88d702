"""MOT-Challenge text files and the embedding table format.

Rows are ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``.
Everything written goes through a temp file and an atomic rename.
"""

from __future__ import annotations

import enum
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import BoundingBox, Detection, Source, Trajectory


class Kind(enum.Enum):
    DETECTIONS = "detections"
    GROUND_TRUTH = "gt"
    RESULTS = "results"


class MotParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True, slots=True)
class MotRow:
    frame: int
    id: int
    box: BoundingBox
    conf: float


def parse_mot_file(path, kind: Kind = Kind.DETECTIONS) -> dict[int, list[MotRow]]:
    """Parse a MOT text file into rows grouped by frame (frames ascending)."""
    path = Path(path)
    rows: dict[int, list[MotRow]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 6:
                raise MotParseError(path, lineno, f"expected at least 6 columns, got {len(parts)}")
            try:
                frame = int(float(parts[0]))
                tid = int(float(parts[1]))
                x, y, w, h = (float(p) for p in parts[2:6])
                conf = float(parts[6]) if len(parts) > 6 else 1.0
            except ValueError as exc:
                raise MotParseError(path, lineno, f"non-numeric field ({exc})") from None
            if not all(np.isfinite(v) for v in (x, y, w, h, conf)):
                raise MotParseError(path, lineno, "non-finite value")
            if frame < 1:
                raise MotParseError(path, lineno, f"frame must be >= 1, got {frame}")
            if w <= 0 or h <= 0:
                raise MotParseError(path, lineno, f"nonpositive box size {w}x{h}")
            if kind is not Kind.DETECTIONS and tid < 0:
                raise MotParseError(path, lineno, f"{kind.value} rows need a nonnegative id")
            rows.setdefault(frame, []).append(MotRow(frame, tid, BoundingBox(x, y, w, h), conf))
    return dict(sorted(rows.items()))


def read_detections(path) -> list[Detection]:
    rows = parse_mot_file(path, Kind.DETECTIONS)
    return [Detection(r.frame, r.box, r.conf, Source.DETECTOR) for frame_rows in rows.values() for r in frame_rows]


class DuplicateEntry(ValueError):
    pass


def rows_to_trajectories(rows: Mapping[int, list[MotRow]], path="<rows>") -> list[Trajectory]:
    by_id: dict[int, list[Detection]] = {}
    seen = set()
    for frame_rows in rows.values():
        for r in frame_rows:
            if (r.frame, r.id) in seen:
                raise DuplicateEntry(f"{path}: duplicate (frame, id) = ({r.frame}, {r.id})")
            seen.add((r.frame, r.id))
            by_id.setdefault(r.id, []).append(Detection(r.frame, r.box, r.conf))
    return [Trajectory(tid, sorted(dets, key=lambda d: d.frame)) for tid, dets in sorted(by_id.items())]


def read_trajectories(path, kind: Kind = Kind.RESULTS) -> list[Trajectory]:
    return rows_to_trajectories(parse_mot_file(path, kind), path)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def format_row(frame: int, tid: int, box: BoundingBox, conf: float) -> str:
    x, y, w, h = box.as_tuple()
    return f"{frame},{tid},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},{_fmt(conf)},-1,-1,-1\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_detections(detections: Iterable[Detection]) -> str:
    ordered = sorted(detections, key=lambda d: d.frame)
    return "".join(format_row(d.frame, -1, d.box, d.score) for d in ordered)


def format_trajectories(trajectories: Iterable[Trajectory]) -> str:
    rows = [(d.frame, t.id, d) for t in trajectories for d in t.detections]
    rows.sort(key=lambda r: (r[0], r[1]))
    return "".join(format_row(f, tid, d.box, d.score) for f, tid, d in rows)


def write_detections(path, detections: Iterable[Detection]) -> None:
    atomic_write_text(path, format_detections(detections))


def write_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    atomic_write_text(path, format_trajectories(trajectories))


def canonicalize(path, out_path, kind: Kind) -> None:
    """Rewrite ``path`` in canonical form (2 decimals, sorted rows)."""
    rows = parse_mot_file(path, kind)
    ordered = sorted((r for fr in rows.values() for r in fr), key=lambda r: (r.frame, r.id))
    atomic_write_text(out_path, "".join(format_row(r.frame, r.id, r.box, r.conf) for r in ordered))


# --------------------------------------------------------------------------
# embeddings


def read_embeddings(path) -> dict[tuple, np.ndarray]:
    from .appearance import embedding_key, normalize

    path = Path(path)
    table: dict[tuple, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                frame = int(parts[0])
                x, y, w, h = (float(p) for p in parts[1:5])
                dim = int(parts[5])
                values = np.array([float(p) for p in parts[6:]], dtype=np.float64)
            except (ValueError, IndexError) as exc:
                raise MotParseError(path, lineno, f"malformed embedding row ({exc})") from None
            if values.size != dim or dim == 0:
                raise MotParseError(path, lineno, f"declared dim {dim} but found {values.size} values")
            if w <= 0 or h <= 0:
                raise MotParseError(path, lineno, f"nonpositive box size {w}x{h}")
            table[embedding_key(frame, BoundingBox(x, y, w, h))] = normalize(values)
    return table


def format_embeddings(entries: Iterable[tuple[Detection, np.ndarray]]) -> str:
    lines = []
    for d, v in entries:
        v = np.asarray(v, dtype=np.float64)
        coords = ",".join(repr(float(c)) for c in d.box.as_tuple())
        values = ",".join(repr(float(c)) for c in v)
        lines.append(f"{d.frame},{coords},{v.size},{values}\n")
    return "".join(lines)


def write_embeddings(path, entries: Iterable[tuple[Detection, np.ndarray]]) -> None:
    atomic_write_text(path, format_embeddings(entries))
