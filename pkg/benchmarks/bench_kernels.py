"""Compare the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from sotmot import _kernels_py

try:
    from sotmot import _kernels as compiled
except ImportError:
    compiled = None


def workloads():
    rng = np.random.default_rng(0)
    frame = rng.random((480, 640))
    n = 257  # one candidate search: prior box plus 256 samples
    boxes = np.column_stack([rng.uniform(100, 400, n), rng.uniform(50, 250, n), rng.uniform(40, 60, n), rng.uniform(100, 140, n)])
    a = boxes[:60].copy()
    b = np.ascontiguousarray(boxes[::-1][:80])
    return {
        "crop_resize 257 boxes -> 64x32": lambda impl: impl.crop_resize(frame, boxes, 64, 32),
        "iou_matrix 60x80": lambda impl: impl.iou_matrix(a, b),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    impls = [("python", _kernels_py)] + ([("cython", compiled)] if compiled is not None else [])
    print(f"{'kernel':34} " + " ".join(f"{name:>12}" for name, _ in impls) + ("     speedup" if compiled else ""))
    for label, fn in workloads().items():
        times = []
        for _, impl in impls:
            fn(impl)
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        row = f"{label:34} " + " ".join(f"{1e3 * t:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:9.1f}x"
        print(row)
    if compiled is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
