"""Flat ``key = value`` pipeline configuration.

Defaults reproduce the published parameter choices; relative paths are
resolved against the directory of the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

from .association import MotParams
from .postprocess import SmoothParams
from .sot import SotParams


class ConfigError(ValueError):
    pass


BACKENDS = ("ncc", "embedding", "oracle")
PATH_KEYS = ("detections", "frames", "output", "embeddings", "oracle_gt")


@dataclass(frozen=True)
class PipelineConfig:
    detections: Path | None = None
    frames: Path | None = None
    output: Path | None = None
    sequence: str = ""
    fps: float = 30.0
    score_threshold: float = 0.3
    nms_mode: str = "iom"
    nms_threshold: float = 0.6
    appearance: str = "ncc"
    sot_appearance: str = ""
    embeddings: Path | None = None
    oracle_gt: Path | None = None
    oracle_seed: int = 0
    sot: bool = True
    interpolate: bool = True
    smooth: bool = True
    bbox_regression: str = "none"
    seed: int = 0
    sot_params: SotParams = field(default_factory=SotParams)
    mot_params: MotParams = field(default_factory=MotParams)
    smooth_params: SmoothParams = field(default_factory=SmoothParams)

    @property
    def sot_backend(self) -> str:
        return self.sot_appearance or self.appearance


# config key -> (section, attribute, type)
_NESTED = {
    "sot_tau": ("sot_params", "tau", float),
    "sot_tau_iou": ("sot_params", "tau_iou", float),
    "sot_tau_app": ("sot_params", "tau_app", float),
    "sot_decay": ("sot_params", "decay", float),
    "sot_max_len": ("sot_params", "max_len", int),
    "sot_candidates": ("sot_params", "n_candidates", int),
    "sot_sigma_pos": ("sot_params", "sigma_pos_frac", float),
    "sot_sigma_scale": ("sot_params", "sigma_scale", float),
    "batch_seconds": ("mot_params", "batch_seconds", float),
    "tail_size": ("mot_params", "tail_size", int),
    "l_min": ("mot_params", "l_min", int),
    "l_max": ("mot_params", "l_max", int),
    "tau_overlap": ("mot_params", "tau_overlap", float),
    "tau_match": ("mot_params", "tau_match", float),
    "tau_merge": ("mot_params", "tau_merge", float),
    "max_open_gap": ("mot_params", "max_open_gap", int),
    "post_sot_nms_mode": ("mot_params", "nms_mode", str),
    "post_sot_nms_threshold": ("mot_params", "nms_threshold", float),
    "smooth_window": ("smooth_params", "window", int),
}

_TOP = {f.name: f.type for f in fields(PipelineConfig) if f.name not in ("sot_params", "mot_params", "smooth_params")}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _convert(key: str, value: str, kind):
    kind = str(kind)
    if "bool" in kind:
        return _parse_bool(value)
    if kind in ("int", "<class 'int'>"):
        return int(value)
    if kind in ("float", "<class 'float'>"):
        return float(value)
    return value


def parse_pairs(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def build_config(pairs: dict[str, str], base_dir: Path | None = None) -> PipelineConfig:
    top: dict[str, object] = {}
    nested: dict[str, dict[str, object]] = {"sot_params": {}, "mot_params": {}, "smooth_params": {}}
    for key, value in pairs.items():
        try:
            if key in _NESTED:
                section, attr, kind = _NESTED[key]
                nested[section][attr] = kind(value)
            elif key in _TOP:
                if key in PATH_KEYS:
                    p = Path(value)
                    top[key] = p if p.is_absolute() or base_dir is None else base_dir / p
                else:
                    top[key] = _convert(key, value, _TOP[key])
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    if "seed" in top:
        nested["sot_params"].setdefault("rng_seed", top["seed"])
    try:
        cfg = PipelineConfig(
            **top,
            sot_params=SotParams(**nested["sot_params"]),
            mot_params=MotParams(**nested["mot_params"]),
            smooth_params=SmoothParams(**nested["smooth_params"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def load_config(path, overrides: Iterable[str] = ()) -> PipelineConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        pairs = parse_pairs(fh, str(path))
    pairs.update(parse_pairs(overrides, "<override>"))
    return build_config(pairs, path.parent)


def validate(cfg: PipelineConfig) -> None:
    if cfg.fps <= 0:
        raise ConfigError("fps must be positive")
    if not 0.0 <= cfg.nms_threshold <= 1.0:
        raise ConfigError("nms_threshold must lie in [0, 1]")
    if cfg.nms_mode not in ("iou", "iom"):
        raise ConfigError(f"nms_mode must be iou or iom, got {cfg.nms_mode!r}")
    if cfg.bbox_regression != "none":
        raise ConfigError("bbox_regression supports only 'none' (no trained regressor is bundled)")
    for name in ("appearance", "sot_backend"):
        b = getattr(cfg, name)
        if b not in BACKENDS:
            raise ConfigError(f"{name} must be one of {BACKENDS}, got {b!r}")
    if cfg.sot and cfg.sot_backend == "embedding":
        raise ConfigError("the embedding backend cannot score SOT candidate boxes; set sot = false or sot_appearance = ncc|oracle")
    used = {cfg.appearance, cfg.sot_backend if cfg.sot else cfg.appearance}
    if "ncc" in used and cfg.frames is None:
        raise ConfigError("the ncc backend needs frames = <dir>")
    if "embedding" in used and cfg.embeddings is None:
        raise ConfigError("the embedding backend needs embeddings = <file>")
    if "oracle" in used and cfg.oracle_gt is None:
        raise ConfigError("the oracle backend needs oracle_gt = <gt file>")
    if cfg.detections is None:
        raise ConfigError("detections = <file> is required")


def with_overrides(cfg: PipelineConfig, **changes) -> PipelineConfig:
    cfg = replace(cfg, **changes)
    validate(cfg)
    return cfg
