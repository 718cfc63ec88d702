# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched bilinear patch resampling and pairwise IOU."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def crop_resize(const double[:, ::1] image, const double[:, ::1] boxes, int out_h, int out_w):
    cdef Py_ssize_t n = boxes.shape[0]
    cdef Py_ssize_t height = image.shape[0]
    cdef Py_ssize_t width = image.shape[1]
    out = np.empty((n, out_h, out_w), dtype=np.float64)
    cdef double[:, :, ::1] res = out
    cdef Py_ssize_t k, i, j, x0, y0, x1, y1
    cdef double bx, by, sx_step, sy_step, sx, sy, fx, fy, top, bottom
    cdef double xmax = <double>(width - 1)
    cdef double ymax = <double>(height - 1)
    for k in range(n):
        bx = boxes[k, 0]
        by = boxes[k, 1]
        sx_step = boxes[k, 2] / out_w
        sy_step = boxes[k, 3] / out_h
        for i in range(out_h):
            sy = by + (i + 0.5) * sy_step - 0.5
            if sy < 0.0:
                sy = 0.0
            elif sy > ymax:
                sy = ymax
            y0 = <Py_ssize_t>floor(sy)
            if y0 >= height - 1:
                y0 = height - 2 if height > 1 else 0
            y1 = y0 + 1 if height > 1 else 0
            fy = sy - y0
            for j in range(out_w):
                sx = bx + (j + 0.5) * sx_step - 0.5
                if sx < 0.0:
                    sx = 0.0
                elif sx > xmax:
                    sx = xmax
                x0 = <Py_ssize_t>floor(sx)
                if x0 >= width - 1:
                    x0 = width - 2 if width > 1 else 0
                x1 = x0 + 1 if width > 1 else 0
                fx = sx - x0
                top = image[y0, x0] + fx * (image[y0, x1] - image[y0, x0])
                bottom = image[y1, x0] + fx * (image[y1, x1] - image[y1, x0])
                res[k, i, j] = top + fy * (bottom - top)
    return out


def iou_matrix(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter, area_a, area_b, v
    for i in range(n):
        area_a = ((a[i, 0] + a[i, 2]) - a[i, 0]) * ((a[i, 1] + a[i, 3]) - a[i, 1])
        for j in range(m):
            iw = min(a[i, 0] + a[i, 2], b[j, 0] + b[j, 2]) - max(a[i, 0], b[j, 0])
            if iw <= 0.0:
                continue
            ih = min(a[i, 1] + a[i, 3], b[j, 1] + b[j, 3]) - max(a[i, 1], b[j, 1])
            if ih <= 0.0:
                continue
            inter = iw * ih
            area_b = ((b[j, 0] + b[j, 2]) - b[j, 0]) * ((b[j, 1] + b[j, 3]) - b[j, 1])
            v = inter / (area_a + area_b - inter)
            res[i, j] = v if v < 1.0 else 1.0
    return out
