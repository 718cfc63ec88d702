"""End-to-end tracking: threshold/NMS -> SOT per batch -> NMS -> tracklets ->
long-term association -> interpolation -> smoothing."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

from .appearance import AppearanceBackend, EmbeddingBackend, FeatureCache, FrameStore, NCCBackend, OracleBackend
from .association import batch_size, build_tracklets, long_term_associate
from .config import ConfigError, PipelineConfig
from .core import Detection, Trajectory, group_by_frame, nms_by_frame
from .motio import Kind, read_detections, read_trajectories, write_trajectories
from .postprocess import interpolate, smooth
from .sot import run_sot

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    trajectories: list[Trajectory]
    summary: dict[str, float | int] = field(default_factory=dict)
    mot_input: list[Detection] = field(default_factory=list)
    sot_added: list[Detection] = field(default_factory=list)


def make_backend(name: str, cfg: PipelineConfig) -> AppearanceBackend:
    if name == "ncc":
        return NCCBackend()
    if name == "embedding":
        return EmbeddingBackend.from_file(cfg.embeddings)
    if name == "oracle":
        return OracleBackend(read_trajectories(cfg.oracle_gt, Kind.GROUND_TRUTH), seed=cfg.oracle_seed)
    raise ConfigError(f"unknown appearance backend {name!r}")


def track(
    detections: Sequence[Detection],
    cfg: PipelineConfig,
    frames: FrameStore | None,
    mot_backend: AppearanceBackend,
    sot_backend: AppearanceBackend | None = None,
) -> PipelineResult:
    t0 = time.perf_counter()
    summary: dict[str, float | int] = {"detections_in": len(detections)}
    kept = [d for d in detections if d.score > cfg.score_threshold]
    summary["after_threshold"] = len(kept)
    kept = nms_by_frame(kept, cfg.nms_mode, cfg.nms_threshold)
    summary["after_nms"] = len(kept)

    added: list[Detection] = []
    enlarged = list(kept)
    if cfg.sot:
        backend = sot_backend or mot_backend
        cache = FeatureCache(backend, frames)
        size = batch_size(cfg.fps, cfg.mot_params)
        by_frame = group_by_frame(kept)
        last = max(by_frame, default=0)
        if frames is not None:
            last = max(last, len(frames))
        enlarged = []
        for start in range(1, last + 1, size):
            end = min(start + size - 1, last)
            batch = [d for f in range(start, end + 1) for d in by_frame.get(f, ())]
            if not batch:
                continue
            res = run_sot(batch, backend, frames, cfg.sot_params, frame_range=(start, end), features=cache)
            enlarged.extend(res.detections)
            added.extend(res.added)
            summary["sot_next_calls"] = summary.get("sot_next_calls", 0) + res.n_next_calls
            summary["sot_merges"] = summary.get("sot_merges", 0) + res.n_merges
    summary["sot_added"] = len(added)
    summary["after_sot"] = len(enlarged)

    mot_in = nms_by_frame(enlarged, cfg.mot_params.nms_mode, cfg.mot_params.nms_threshold) if cfg.sot else list(enlarged)
    summary["post_sot_suppressed"] = len(enlarged) - len(mot_in)
    summary["mot_input"] = len(mot_in)

    feats = FeatureCache(mot_backend, frames)
    feats.prime(mot_in)
    tracklets = build_tracklets(mot_in, feats, cfg.mot_params, cfg.fps)
    summary["tracklets"] = len(tracklets)
    trajectories = long_term_associate(tracklets, feats, cfg.mot_params)
    summary["trajectories"] = len(trajectories)
    if cfg.interpolate:
        trajectories = [interpolate(t) for t in trajectories]
    if cfg.smooth:
        trajectories = [smooth(t, cfg.smooth_params) for t in trajectories]
    trajectories.sort(key=lambda t: (t.first_frame, t.id))
    trajectories = [Trajectory(k + 1, t.detections) for k, t in enumerate(trajectories)]
    summary["output_boxes"] = sum(len(t) for t in trajectories)
    summary["seconds"] = time.perf_counter() - t0
    log.info("tracking summary: %s", summary)
    return PipelineResult(trajectories, summary, mot_in, added)


def load_frames(cfg: PipelineConfig) -> FrameStore | None:
    if cfg.frames is None:
        return None
    return FrameStore(cfg.frames)


def run(cfg: PipelineConfig) -> PipelineResult:
    """Load inputs named by ``cfg``, track, and write the result file if configured."""
    dets = read_detections(cfg.detections)
    frames = load_frames(cfg)
    mot_backend = make_backend(cfg.appearance, cfg)
    sot_backend = mot_backend
    if cfg.sot and cfg.sot_backend != cfg.appearance:
        sot_backend = make_backend(cfg.sot_backend, cfg)
    result = track(dets, cfg, frames, mot_backend, sot_backend)
    if cfg.output is not None:
        write_trajectories(cfg.output, result.trajectories)
    return result
