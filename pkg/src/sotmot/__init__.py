"""SOT-augmented tracking-by-detection for multiple object tracking."""

from .core import BoundingBox, Detection, Source, Trajectory, iom, iou, nms
from .kernels import KERNEL_BACKEND

__all__ = [
    "BoundingBox",
    "Detection",
    "Source",
    "Trajectory",
    "iou",
    "iom",
    "nms",
    "KERNEL_BACKEND",
]

__version__ = "0.1.0"
