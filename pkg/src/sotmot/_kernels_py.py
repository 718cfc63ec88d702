"""Pure numpy versions of the compiled kernels; identical arithmetic."""

import numpy as np


def crop_resize(image: np.ndarray, boxes: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinearly resample each ``(x, y, w, h)`` box of ``image`` to ``out_h x out_w``.

    Output pixel ``(i, j)`` samples the source at index coordinates
    ``x + (j + 0.5) * w / out_w - 0.5`` (likewise for rows), clamped to the
    image; this makes the sampling grid exactly mirror-symmetric.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    height, width = image.shape
    cols = np.arange(out_w) + 0.5
    rows = np.arange(out_h) + 0.5
    sx = boxes[:, 0:1] + cols[None, :] * (boxes[:, 2:3] / out_w) - 0.5
    sy = boxes[:, 1:2] + rows[None, :] * (boxes[:, 3:4] / out_h) - 0.5
    sx = np.clip(sx, 0.0, width - 1.0)
    sy = np.clip(sy, 0.0, height - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.minimum(x0, max(width - 2, 0))
    y0 = np.minimum(y0, max(height - 2, 0))
    x1 = x0 + 1 if width > 1 else x0
    y1 = y0 + 1 if height > 1 else y0
    fx = (sx - x0)[:, None, :]
    fy = (sy - y0)[:, :, None]
    r0 = y0[:, :, None]
    r1 = y1[:, :, None]
    c0 = x0[:, None, :]
    c1 = x1[:, None, :]
    a = image[r0, c0]
    top = a + fx * (image[r0, c1] - a)
    b = image[r1, c0]
    bottom = b + fx * (image[r1, c1] - b)
    return top + fy * (bottom - top)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = ((a[:, 0] + a[:, 2]) - a[:, 0]) * ((a[:, 1] + a[:, 3]) - a[:, 1])
    area_b = ((b[:, 0] + b[:, 2]) - b[:, 0]) * ((b[:, 1] + b[:, 3]) - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=inter > 0)
    return np.minimum(out, 1.0)
