"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``SOTMOT_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("SOTMOT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        KERNEL_BACKEND = "python"


def crop_resize(image, boxes, out_h: int, out_w: int) -> np.ndarray:
    image = np.ascontiguousarray(image, dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    return _impl.crop_resize(image, boxes, int(out_h), int(out_w))


def iou_matrix(a, b) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    return _impl.iou_matrix(a, b)
