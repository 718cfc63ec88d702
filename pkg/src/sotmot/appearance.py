"""Appearance features and affinity.

Every backend maps boxes in a frame to unit-norm feature vectors; affinity
between two features is ``1 - |a - b|^2 / 4``, i.e. ``(1 + cos) / 2``, which
lies in ``[0, 1]`` and equals 1 only for identical features.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .core import BoundingBox, Detection, Trajectory, boxes_array
from .kernels import crop_resize, iou_matrix

TEMPLATE_SHAPE = (64, 32)
LUMA = np.array([0.299, 0.587, 0.114])


class AppearanceError(Exception):
    pass


class BoxOutOfFrame(AppearanceError):
    pass


class MissingEmbedding(AppearanceError):
    pass


class EmptyTrajectory(AppearanceError):
    pass


def normalize(v: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; a zero vector becomes the constant unit vector."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        return np.full(v.shape, 1.0 / np.sqrt(v.size))
    return v / n


def affinity(a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(min(1.0, max(0.0, 1.0 - float(d @ d) / 4.0)))


def affinity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    diff = a[:, None, :] - b[None, :, :]
    return np.clip(1.0 - np.einsum("ijk,ijk->ij", diff, diff) / 4.0, 0.0, 1.0)


def mean_feature(vectors: Iterable[np.ndarray]) -> np.ndarray:
    stack = np.array(list(vectors), dtype=np.float64)
    if stack.size == 0:
        raise EmptyTrajectory("cannot average an empty set of features")
    if len(stack) == 1:
        return stack[0]
    return normalize(stack.mean(axis=0))


def trajectory_feature(t: Trajectory, features: Mapping[Detection, np.ndarray]) -> np.ndarray:
    """Renormalised average of the detection features of ``t``."""
    if len(t) == 0:
        raise EmptyTrajectory(f"trajectory {t.id} has no detections")
    return mean_feature(features[d] for d in t.detections)


# --------------------------------------------------------------------------
# frames


def to_gray(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 3:
        pixels = pixels[..., :3] @ LUMA
    return pixels


class FrameStore:
    """Read-only 1-indexed access to grayscale frames in ``[0, 1]``.

    Backed either by a directory of ``%06d.ppm`` / ``%06d.pgm`` files or by an
    in-memory list of arrays. Decoded frames sit in a small LRU cache.
    """

    def __init__(self, directory=None, arrays: Sequence[np.ndarray] | None = None, cache_size: int = 64):
        if (directory is None) == (arrays is None):
            raise ValueError("give exactly one of directory or arrays")
        self._lock = threading.Lock()
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cache_size = cache_size
        self.directory = None
        self._arrays = None
        if arrays is not None:
            self._arrays = [np.ascontiguousarray(to_gray(a)) for a in arrays]
            for a in self._arrays:
                a.setflags(write=False)
            self.n_frames = len(self._arrays)
            shapes = {a.shape for a in self._arrays}
        else:
            self.directory = Path(directory)
            if not self.directory.is_dir():
                raise FileNotFoundError(f"frame directory not found: {self.directory}")
            self._paths = {}
            for p in sorted(self.directory.iterdir()):
                if p.suffix.lower() in (".ppm", ".pgm") and p.stem.isdigit():
                    self._paths[int(p.stem)] = p
            self.n_frames = len(self._paths)
            if self._paths and sorted(self._paths) != list(range(1, self.n_frames + 1)):
                raise ValueError(f"{self.directory}: frames must be numbered 1..N without holes")
            shapes = {Image.open(p).size[::-1] for p in self._paths.values()} if self._paths else set()
        if len(shapes) > 1:
            raise ValueError("all frames must have the same dimensions")
        self.shape = shapes.pop() if shapes else (0, 0)

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    def __len__(self) -> int:
        return self.n_frames

    def __getitem__(self, frame: int) -> np.ndarray:
        if not 1 <= frame <= self.n_frames:
            raise IndexError(f"frame {frame} outside 1..{self.n_frames}")
        if self._arrays is not None:
            return self._arrays[frame - 1]
        with self._lock:
            cached = self._cache.get(frame)
            if cached is not None:
                self._cache.move_to_end(frame)
                return cached
        gray = read_frame(self._paths[frame])
        gray.setflags(write=False)
        with self._lock:
            self._cache[frame] = gray
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return gray


def read_frame(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "I;16", "I;16B", "I"):
            im = im.convert("RGB")
        arr = np.asarray(im)
        maxval = 65535.0 if arr.dtype == np.uint16 or im.mode.startswith("I") else 255.0
    return np.ascontiguousarray(to_gray(arr) / maxval)


def write_frame(path, pixels: np.ndarray) -> None:
    """Write ``uint8`` gray (PGM) or RGB (PPM) pixels; format follows the array."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        pixels = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")


# --------------------------------------------------------------------------
# backends


class AppearanceBackend:
    """Maps boxes within one frame to unit-norm features."""

    name = "base"
    can_score_arbitrary_boxes = True

    def features(self, frames: FrameStore | None, frame: int, boxes: Sequence[BoundingBox]) -> np.ndarray:
        raise NotImplementedError


def extract_feature(backend: AppearanceBackend, frames: FrameStore | None, d: Detection) -> np.ndarray:
    return backend.features(frames, d.frame, [d.box])[0]


def ncc_vector(patch: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-norm flattening of a patch (constant patches -> 1/sqrt(n))."""
    v = np.asarray(patch, dtype=np.float64).ravel()
    v = v - v.mean()
    n = np.linalg.norm(v)
    if n <= 1e-12 * max(1.0, np.abs(patch).max()):
        return np.full(v.size, 1.0 / np.sqrt(v.size))
    return v / n


def ncc_score(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalised cross-correlation of two equally sized patches."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"patch shapes differ: {a.shape} vs {b.shape}")
    return float(np.clip(ncc_vector(a) @ ncc_vector(b), -1.0, 1.0))


class NCCBackend(AppearanceBackend):
    """Template matching: features are flip-averaged zero-mean patches."""

    name = "ncc"
    can_score_arbitrary_boxes = True

    def __init__(self, template_shape: tuple[int, int] = TEMPLATE_SHAPE):
        self.template_shape = tuple(template_shape)

    def patches(self, frames: FrameStore, frame: int, boxes: Sequence[BoundingBox]) -> np.ndarray:
        clipped = []
        for b in boxes:
            c = b.clip(frames.width, frames.height)
            if c is None:
                raise BoxOutOfFrame(f"box {b.as_tuple()} lies outside frame {frame}")
            clipped.append(c)
        return crop_resize(frames[frame], boxes_array(clipped), *self.template_shape)

    def features(self, frames, frame, boxes):
        if frames is None:
            raise ValueError("the NCC backend needs frames")
        if len(boxes) == 0:
            return np.zeros((0, self.template_shape[0] * self.template_shape[1]))
        patches = self.patches(frames, frame, boxes)
        n = patches.shape[0]
        dim = patches.shape[1] * patches.shape[2]
        flat = patches.reshape(n, dim)
        centred = flat - flat.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(centred, axis=1)
        scale = np.maximum(1.0, np.abs(flat).max(axis=1))
        flat_ok = norms > 1e-12 * scale
        const = 1.0 / np.sqrt(dim)
        fhat = np.full((n, dim), const)
        fhat[flat_ok] = centred[flat_ok] / norms[flat_ok, None]
        mirrored = fhat.reshape(patches.shape)[:, :, ::-1].reshape(n, dim)
        avg = 0.5 * (fhat + mirrored)
        norms = np.linalg.norm(avg, axis=1)
        out = np.full((n, dim), const)
        ok = norms > 1e-12
        out[ok] = avg[ok] / norms[ok, None]
        return out


def embedding_key(frame: int, box: BoundingBox) -> tuple:
    return (int(frame),) + tuple(f"{v:.2f}" for v in box.as_tuple())


class EmbeddingBackend(AppearanceBackend):
    """Lookup of precomputed per-detection embeddings; cannot score new boxes."""

    name = "embedding"
    can_score_arbitrary_boxes = False

    def __init__(self, table: Mapping[tuple, np.ndarray]):
        self.table = {k: normalize(v) for k, v in table.items()}
        dims = {v.size for v in self.table.values()}
        if len(dims) > 1:
            raise ValueError(f"embeddings have inconsistent dimensions {sorted(dims)}")
        self.dim = dims.pop() if dims else 0

    @classmethod
    def from_file(cls, path) -> "EmbeddingBackend":
        from .motio import read_embeddings

        return cls(read_embeddings(path))

    def features(self, frames, frame, boxes):
        out = np.empty((len(boxes), self.dim))
        for i, b in enumerate(boxes):
            key = embedding_key(frame, b)
            try:
                out[i] = self.table[key]
            except KeyError:
                raise MissingEmbedding(f"no embedding for frame {frame} box {key[1:]}") from None
        return out


class OracleBackend(AppearanceBackend):
    """Ground-truth driven features for synthetic sequences.

    Each identity owns a vertex of a regular simplex (background owns one
    too). A box is described by the identity it overlaps most: the vertex is
    blended with a per-frame background vector according to that IOU, then
    perturbed by seeded noise in the orthogonal subspace. Cross-identity
    affinity therefore sits slightly below 0.5, while localisation quality
    drives same-identity affinity.
    """

    name = "oracle"
    can_score_arbitrary_boxes = True

    def __init__(self, gt: Sequence[Trajectory], seed: int = 0, noise: float = 0.3, background_spread: float = 1.5, dim: int | None = None):
        self.seed = int(seed)
        self.noise = float(noise)
        self.background_spread = float(background_spread)
        self.ids = sorted({t.id for t in gt})
        self.index = {tid: i + 1 for i, tid in enumerate(self.ids)}
        k = len(self.ids) + 1
        self.dim = dim or max(64, k + 32)
        if self.dim < k + 2:
            raise ValueError("embedding dimension too small for the simplex and noise subspace")
        eye = np.eye(k)
        simplex = eye - eye.mean(axis=0) if k > 1 else eye
        simplex /= np.linalg.norm(simplex, axis=1, keepdims=True)
        self.vertices = np.zeros((k, self.dim))
        self.vertices[:, :k] = simplex
        self._k = k
        self.boxes_by_frame: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for t in gt:
            for d in t.detections:
                self.boxes_by_frame.setdefault(d.frame, ([], []))
                self.boxes_by_frame[d.frame][0].append(d.box.as_tuple())
                self.boxes_by_frame[d.frame][1].append(self.index[t.id])
        self.boxes_by_frame = {f: (np.array(b, dtype=np.float64), np.array(i)) for f, (b, i) in self.boxes_by_frame.items()}
        self._noise_cache: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def _orthogonal_unit(self, frame: int, slot: int) -> np.ndarray:
        key = (frame, slot)
        v = self._noise_cache.get(key)
        if v is None:
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(frame, slot)))
            v = np.zeros(self.dim)
            v[self._k :] = rng.standard_normal(self.dim - self._k)
            v /= np.linalg.norm(v)
            with self._lock:
                self._noise_cache[key] = v
        return v

    def background(self, frame: int) -> np.ndarray:
        return normalize(self.vertices[0] + self.background_spread * self._orthogonal_unit(frame, 0))

    def identity_of(self, frame: int, box: BoundingBox) -> tuple[int, float]:
        """Ground-truth identity with the largest IOU against ``box`` (None, 0.0 if none)."""
        entry = self.boxes_by_frame.get(frame)
        if entry is None:
            return None, 0.0
        ious = iou_matrix(boxes_array([box]), entry[0])[0]
        j = int(np.argmax(ious))
        if ious[j] <= 0.0:
            return None, 0.0
        return self.ids[entry[1][j] - 1], float(ious[j])

    def features(self, frames, frame, boxes):
        out = np.empty((len(boxes), self.dim))
        if not boxes:
            return out
        entry = self.boxes_by_frame.get(frame)
        bg = self.background(frame)
        if entry is not None:
            ious = iou_matrix(boxes_array(boxes), entry[0])
        for i in range(len(boxes)):
            q, slot = 0.0, 0
            if entry is not None:
                j = int(np.argmax(ious[i]))
                q = float(ious[i, j])
                slot = int(entry[1][j]) if q > 0.0 else 0
            base = q * self.vertices[slot] + (1.0 - q) * bg
            out[i] = normalize(base + self.noise * self._orthogonal_unit(frame, slot + 1))
        return out


class FeatureCache:
    """Memoised per-detection features for one backend and frame store."""

    def __init__(self, backend: AppearanceBackend, frames: FrameStore | None):
        self.backend = backend
        self.frames = frames
        self._store: dict[Detection, np.ndarray] = {}

    def __getitem__(self, d: Detection) -> np.ndarray:
        v = self._store.get(d)
        if v is None:
            v = extract_feature(self.backend, self.frames, d)
            self._store[d] = v
        return v

    def __contains__(self, d: Detection) -> bool:
        return d in self._store

    def prime(self, detections: Iterable[Detection]) -> None:
        """Extract features for many detections with one backend call per frame."""
        by_frame: dict[int, list[Detection]] = {}
        for d in detections:
            if d not in self._store:
                by_frame.setdefault(d.frame, []).append(d)
        for frame, dets in sorted(by_frame.items()):
            feats = self.backend.features(self.frames, frame, [d.box for d in dets])
            for d, f in zip(dets, feats):
                self._store[d] = f
