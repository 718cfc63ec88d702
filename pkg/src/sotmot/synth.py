"""Deterministic synthetic sequences with ground truth and a degraded detector.

Objects are rigid textured rectangles over per-frame background noise.
Per-frame random streams are derived from ``(seed, frame)`` so any frame can be
rendered independently of the others.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .appearance import FrameStore, OracleBackend, write_frame
from .core import BoundingBox, Detection, Source, Trajectory, boxes_array
from .kernels import iou_matrix
from .motio import atomic_write_text, format_detections, format_embeddings, format_trajectories


class SpecOutOfBounds(ValueError):
    pass


class InvalidScenario(ValueError):
    pass


@dataclass
class ObjectSpec:
    id: int
    spawn: int
    despawn: int
    box: tuple[float, float, float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    texture_seed: int = 0
    velocity_changes: list[tuple[int, tuple[float, float]]] = field(default_factory=list)


@dataclass
class DetectorModel:
    drop_prob: float = 0.0
    occlusions: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    jitter: float = 0.0
    fp_rate: float = 0.0
    score_range: tuple[float, float] = (0.6, 1.0)
    fp_score_range: tuple[float, float] = (0.3, 0.7)


@dataclass
class ScenarioSpec:
    n_frames: int
    width: int
    height: int
    objects: list[ObjectSpec]
    detector: DetectorModel = field(default_factory=DetectorModel)
    seed: int = 0
    fps: float = 30.0
    texture_grid: tuple[int, int] = (24, 12)
    texture_contrast: float = 0.15
    decorrelate_textures: bool = True
    background_cell: int = 16
    pixel_noise: float = 0.02

    def __post_init__(self):
        if self.n_frames < 1 or self.width < 2 or self.height < 2:
            raise InvalidScenario("need at least one frame of at least 2x2 pixels")
        d = self.detector
        if not (0.0 <= d.drop_prob <= 1.0) or d.fp_rate < 0 or d.jitter < 0:
            raise InvalidScenario("detector probabilities must lie in [0, 1] and rates be nonnegative")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids) or any(i < 0 for i in ids):
            raise InvalidScenario("object ids must be unique and nonnegative")
        for o in self.objects:
            if not 1 <= o.spawn <= o.despawn <= self.n_frames:
                raise InvalidScenario(f"object {o.id}: need 1 <= spawn <= despawn <= n_frames")
            if o.box[2] <= 0 or o.box[3] <= 0:
                raise InvalidScenario(f"object {o.id}: box needs positive size")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidScenario(f"unknown scenario keys: {sorted(unknown)}")
        try:
            objects = [
                ObjectSpec(
                    id=int(o["id"]),
                    spawn=int(o["spawn"]),
                    despawn=int(o["despawn"]),
                    box=tuple(float(v) for v in o["box"]),
                    velocity=tuple(float(v) for v in o.get("velocity", (0.0, 0.0))),
                    texture_seed=int(o.get("texture_seed", 0)),
                    velocity_changes=[(int(f), (float(v[0]), float(v[1]))) for f, v in o.get("velocity_changes", [])],
                )
                for o in data.pop("objects")
            ]
            det = dict(data.pop("detector", {}))
            det["occlusions"] = {int(k): [(int(a), int(b)) for a, b in v] for k, v in det.get("occlusions", {}).items()}
            for key in ("score_range", "fp_score_range"):
                if key in det:
                    det[key] = tuple(float(v) for v in det[key])
            detector = DetectorModel(**det)
            if "texture_grid" in data:
                data["texture_grid"] = tuple(int(v) for v in data["texture_grid"])
            return cls(objects=objects, detector=detector, **data)
        except (KeyError, TypeError) as exc:
            raise InvalidScenario(f"malformed scenario: {exc}") from None

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise InvalidScenario(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["detector"]["occlusions"] = {str(k): [list(w) for w in v] for k, v in self.detector.occlusions.items()}
        return out


@dataclass
class SyntheticSequence:
    spec: ScenarioSpec
    frames: FrameStore
    gt: list[Trajectory]
    detections: list[Detection]
    detection_ids: list[int]
    embeddings: list[tuple[Detection, np.ndarray]]
    dropped: list[tuple[int, int]]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        (out / "frames").mkdir(parents=True, exist_ok=True)
        for i in range(1, len(self.frames) + 1):
            write_frame(out / "frames" / f"{i:06d}.pgm", render_uint8(self.frames[i]))
        atomic_write_text(out / "gt.txt", format_trajectories(self.gt))
        atomic_write_text(out / "det.txt", format_detections(self.detections))
        atomic_write_text(out / "embeddings.txt", format_embeddings(self.embeddings))
        atomic_write_text(out / "scenario.json", json.dumps(self.spec.to_dict(), indent=2, sort_keys=True) + "\n")
        atomic_write_text(
            out / "track.cfg",
            "\n".join(
                [
                    "detections = det.txt",
                    "frames = frames",
                    f"fps = {self.spec.fps:g}",
                    "appearance = ncc",
                    "output = result.txt",
                    "",
                ]
            ),
        )
        return out


def _r2(v: float) -> float:
    return float(round(v, 2))


def ground_truth_boxes(spec: ScenarioSpec) -> list[Trajectory]:
    """Exact per-frame object boxes (rounded to 0.01 px)."""
    out = []
    for o in sorted(spec.objects, key=lambda o: o.id):
        x, y, w, h = o.box
        vx, vy = o.velocity
        changes = dict(o.velocity_changes)
        dets = []
        for f in range(o.spawn, o.despawn + 1):
            if f > o.spawn:
                if f in changes:
                    vx, vy = changes[f]
                x += vx
                y += vy
            box = (_r2(x), _r2(y), _r2(w), _r2(h))
            if box[0] < 0 or box[1] < 0 or box[0] + box[2] > spec.width or box[1] + box[3] > spec.height:
                raise SpecOutOfBounds(f"object {o.id} leaves the {spec.width}x{spec.height} frame at frame {f}: {box}")
            dets.append(Detection(f, BoundingBox(*box), 1.0))
        out.append(Trajectory(o.id, dets))
    return out


def _frame_rng(seed: int, frame: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame, stream)))


def _bilinear(lattice: np.ndarray, v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample ``lattice`` at fractional rows ``v`` / columns ``u`` (both broadcastable)."""
    gy, gx = lattice.shape
    v = np.clip(v, 0.0, gy - 1.0)
    u = np.clip(u, 0.0, gx - 1.0)
    v0 = np.minimum(np.floor(v).astype(np.intp), max(gy - 2, 0))
    u0 = np.minimum(np.floor(u).astype(np.intp), max(gx - 2, 0))
    v1 = np.minimum(v0 + 1, gy - 1)
    u1 = np.minimum(u0 + 1, gx - 1)
    fv = v - v0
    fu = u - u0
    top = lattice[v0, u0] * (1 - fu) + lattice[v0, u1] * fu
    bottom = lattice[v1, u0] * (1 - fu) + lattice[v1, u1] * fu
    return top * (1 - fv) + bottom * fv


def textures(spec: ScenarioSpec) -> dict[int, np.ndarray]:
    """Per-identity value-noise lattices.

    With ``decorrelate_textures`` the ensemble mean is subtracted, which makes
    distinct identities negatively correlated on average.
    """
    gy, gx = spec.texture_grid
    lattices = {o.id: np.random.default_rng(o.texture_seed).standard_normal((gy, gx)) for o in spec.objects}
    if spec.decorrelate_textures and len(lattices) > 2:
        mean = np.mean(list(lattices.values()), axis=0)
        lattices = {k: v - mean for k, v in lattices.items()}
    return {k: v / v.std() for k, v in lattices.items()}


def render_frame(spec: ScenarioSpec, frame: int, gt_boxes: Sequence[tuple[int, BoundingBox]], tex: dict[int, np.ndarray]) -> np.ndarray:
    rng = _frame_rng(spec.seed, frame, 0)
    H, W = spec.height, spec.width
    cell = spec.background_cell
    lat = rng.uniform(0.25, 0.75, size=(H // cell + 2, W // cell + 2))
    rows = (np.arange(H) + 0.5) / cell
    cols = (np.arange(W) + 0.5) / cell
    img = _bilinear(lat, rows[:, None], cols[None, :])
    gy, gx = spec.texture_grid
    for oid, box in gt_boxes:
        x0 = max(int(np.ceil(box.x - 0.5)), 0)
        y0 = max(int(np.ceil(box.y - 0.5)), 0)
        x1 = min(int(np.floor(box.x + box.w - 0.5)), W - 1)
        y1 = min(int(np.floor(box.y + box.h - 0.5)), H - 1)
        if x1 < x0 or y1 < y0:
            continue
        u = ((np.arange(x0, x1 + 1) + 0.5 - box.x) / box.w) * (gx - 1)
        v = ((np.arange(y0, y1 + 1) + 0.5 - box.y) / box.h) * (gy - 1)
        patch = 0.5 + spec.texture_contrast * _bilinear(tex[oid], v[:, None], u[None, :])
        img[y0 : y1 + 1, x0 : x1 + 1] = patch
    img = img + rng.standard_normal(img.shape) * spec.pixel_noise
    return np.clip(img, 0.0, 1.0)


def render_uint8(gray: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(gray * 255.0), 0, 255).astype(np.uint8)


def _occluded(windows: Sequence[tuple[int, int]], frame: int) -> bool:
    return any(a <= frame <= b for a, b in windows)


def degrade(spec: ScenarioSpec, gt: Sequence[Trajectory]) -> tuple[list[Detection], list[int], list[tuple[int, int]]]:
    """Detector output: jittered gt boxes minus drops/occlusions plus background false positives.

    Returns detections, the gt id behind each detection (-1 for false
    positives) and the ``(frame, id)`` pairs that were not detected.
    """
    model = spec.detector
    by_frame: dict[int, list[tuple[int, BoundingBox]]] = {}
    for t in gt:
        for d in t.detections:
            by_frame.setdefault(d.frame, []).append((t.id, d.box))
    dets: list[Detection] = []
    ids: list[int] = []
    dropped: list[tuple[int, int]] = []
    sizes = [o.box[2:] for o in spec.objects] or [(30.0, 75.0)]
    for frame in range(1, spec.n_frames + 1):
        rng = _frame_rng(spec.seed, frame, 1)
        objects = sorted(by_frame.get(frame, []), key=lambda e: e[0])
        for oid, box in objects:
            drop = rng.random() < model.drop_prob
            noise = rng.standard_normal(4)
            score = rng.uniform(*model.score_range)
            if drop or _occluded(model.occlusions.get(oid, ()), frame):
                dropped.append((frame, oid))
                continue
            j = model.jitter
            w = max(1.0, box.w * (1.0 + j * noise[2]))
            h = max(1.0, box.h * (1.0 + j * noise[3]))
            cx = box.center[0] + j * box.w * noise[0]
            cy = box.center[1] + j * box.h * noise[1]
            jb = BoundingBox.from_center(cx, cy, w, h).clip(spec.width, spec.height)
            if jb is None:
                dropped.append((frame, oid))
                continue
            jb = BoundingBox(_r2(jb.x), _r2(jb.y), _r2(jb.w), _r2(jb.h))
            dets.append(Detection(frame, jb, _r2(score), Source.DETECTOR))
            ids.append(oid)
        n_fp = rng.poisson(model.fp_rate) if model.fp_rate > 0 else 0
        gt_arr = boxes_array(b for _, b in objects)
        for _ in range(n_fp):
            for _attempt in range(50):
                w, h = sizes[int(rng.integers(len(sizes)))]
                x = rng.uniform(0, spec.width - w)
                y = rng.uniform(0, spec.height - h)
                cand = BoundingBox(_r2(x), _r2(y), _r2(w), _r2(h))
                if len(gt_arr) == 0 or iou_matrix(boxes_array([cand]), gt_arr).max() < 0.3:
                    dets.append(Detection(frame, cand, _r2(rng.uniform(*model.fp_score_range)), Source.DETECTOR))
                    ids.append(-1)
                    break
    if any(d.box.w <= 0 or d.box.h <= 0 for d in dets):
        raise InvalidScenario("degenerate detection produced")
    return dets, ids, dropped


def generate(spec: ScenarioSpec) -> SyntheticSequence:
    gt = ground_truth_boxes(spec)
    tex = textures(spec)
    per_frame: dict[int, list[tuple[int, BoundingBox]]] = {}
    for t in gt:
        for d in t.detections:
            per_frame.setdefault(d.frame, []).append((t.id, d.box))
    # 8-bit quantisation happens here so in-memory frames equal the files on disk
    frames = [
        render_uint8(render_frame(spec, f, sorted(per_frame.get(f, []), key=lambda e: e[0]), tex)) / 255.0
        for f in range(1, spec.n_frames + 1)
    ]
    store = FrameStore(arrays=frames)
    dets, ids, dropped = degrade(spec, gt)
    oracle = OracleBackend(gt, seed=spec.seed)
    embeddings = []
    for d in dets:
        embeddings.append((d, oracle.features(None, d.frame, [d.box])[0]))
    return SyntheticSequence(spec, store, gt, dets, ids, embeddings, dropped)


def drop_scenario(
    seed: int = 0,
    n_objects: int = 6,
    n_frames: int = 60,
    drop_prob: float = 0.2,
    occlusion_range: tuple[int, int] = (5, 10),
    jitter: float = 0.01,
    fp_rate: float = 0.0,
    width: int = 640,
    height: int = 480,
    fps: float = 30.0,
) -> ScenarioSpec:
    """Seeded scenario: objects in separate grid cells, slow piecewise-constant motion,
    random detector drops and one occlusion window per object."""
    rng = np.random.default_rng(seed)
    cols = int(np.ceil(np.sqrt(n_objects * width / height)))
    rows = int(np.ceil(n_objects / cols))
    cw, ch = width / cols, height / rows
    objects = []
    occlusions = {}
    for k in range(n_objects):
        r, c = divmod(k, cols)
        w = float(rng.uniform(0.3, 0.4) * cw)
        h = float(min(w * rng.uniform(2.0, 2.6), 0.7 * ch))
        spawn, despawn = 1, n_frames
        roll = rng.random()
        if roll < 0.25:
            spawn = int(rng.integers(2, max(3, n_frames // 4)))
        elif roll < 0.5:
            despawn = int(rng.integers(max(spawn + 1, 3 * n_frames // 4), n_frames))
        life = despawn - spawn
        slack_x = cw - w - 4.0
        slack_y = ch - h - 4.0
        vx = float(rng.uniform(-1, 1) * min(1.2, 0.5 * slack_x / max(life, 1)))
        vy = float(rng.uniform(-1, 1) * min(1.2, 0.5 * slack_y / max(life, 1)))
        changes = []
        if life > 10 and rng.random() < 0.5:
            f = int(rng.integers(spawn + 5, despawn - 4))
            changes.append((f, (-vx, vy)))
        # start so the whole path, whichever way it turns, stays inside the cell
        x0 = c * cw + 2.0 + max(0.0, -vx * life) if vx < 0 else c * cw + 2.0
        y0 = r * ch + 2.0 + max(0.0, -vy * life) if vy < 0 else r * ch + 2.0
        x0 += float(rng.uniform(0, max(0.0, slack_x - abs(vx) * life)))
        y0 += float(rng.uniform(0, max(0.0, slack_y - abs(vy) * life)))
        objects.append(ObjectSpec(k + 1, spawn, despawn, (x0, y0, w, h), (vx, vy), int(rng.integers(1 << 30)), changes))
        length = int(rng.integers(occlusion_range[0], occlusion_range[1] + 1))
        if life + 1 > length + 2:
            start = int(rng.integers(spawn + 1, despawn - length + 1))
            occlusions[k + 1] = [(start, start + length - 1)]
    detector = DetectorModel(drop_prob=drop_prob, occlusions=occlusions, jitter=jitter, fp_rate=fp_rate)
    return ScenarioSpec(n_frames, width, height, objects, detector, seed=seed, fps=fps)
