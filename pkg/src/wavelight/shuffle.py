"""Space-to-depth and depth-to-space pixel shufflers.

Pure index rearrangements, exactly invertible and parameter-free. The
channel convention is normative for checkpoint compatibility:

    out[n, i, j, c*r*r + dy*r + dx] = in[n, i*r + dy, j*r + dx, c]

i.e. the original channel varies slowest, then dy, then dx.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _accumulate

__all__ = ["space_to_depth", "depth_to_space"]


def _s2d(d: np.ndarray, r: int) -> np.ndarray:
    n, h, w, c = d.shape
    out = d.reshape(n, h // r, r, w // r, r, c).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out).reshape(n, h // r, w // r, c * r * r)


def _d2s(d: np.ndarray, r: int) -> np.ndarray:
    n, h, w, c = d.shape
    co = c // (r * r)
    out = d.reshape(n, h, w, co, r, r).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out).reshape(n, h * r, w * r, co)


def space_to_depth(x: Tensor, r: int) -> Tensor:
    """(N, H, W, C) -> (N, H/r, W/r, C*r*r); H and W divisible by r."""
    if r < 1:
        raise ValueError(f"space_to_depth: r must be >= 1, got {r}")
    n, h, w, c = x.data.shape
    if h % r or w % r:
        raise ValueError(f"space_to_depth: extents {h}x{w} not divisible by r={r}")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, _d2s(g, r))

    return Tensor._from_op(_s2d(x.data, r), (x,), backward_fn, "space_to_depth")


def depth_to_space(x: Tensor, r: int) -> Tensor:
    """(N, h, w, C) -> (N, h*r, w*r, C/r^2); C divisible by r^2."""
    if r < 1:
        raise ValueError(f"depth_to_space: r must be >= 1, got {r}")
    n, h, w, c = x.data.shape
    if c % (r * r):
        raise ValueError(f"depth_to_space: channel count {c} not divisible by r^2={r * r}")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, _s2d(g, r))

    return Tensor._from_op(_d2s(x.data, r), (x,), backward_fn, "depth_to_space")
