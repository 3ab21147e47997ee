"""Single-level orthonormal 2-D Haar analysis and synthesis layers.

Per 2x2 block [[a, b], [c, d]] (a top-left, b top-right, c bottom-left,
d bottom-right) the analysis produces, per channel,

    LL = (a + b + c + d) / 2      LH = (a + b - c - d) / 2
    HL = (a - b + c - d) / 2      HH = (a - b - c + d) / 2

which halves both spatial extents and quadruples the channel count. The
output channel axis is ordered as four consecutive groups [LL, LH, HL, HH],
each as wide as the input. With this orthonormal scaling the transform is
its own adjoint-inverse: synthesis inverts analysis exactly, energy is
preserved, and the autodiff backward of each transform is the other one
applied to the incoming gradient. Neither transform has trainable
parameters.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _accumulate

__all__ = ["dwt2_haar", "idwt2_haar"]


def _analyze(d: np.ndarray) -> np.ndarray:
    a = d[:, 0::2, 0::2, :]
    b = d[:, 0::2, 1::2, :]
    c = d[:, 1::2, 0::2, :]
    e = d[:, 1::2, 1::2, :]
    ll = (a + b + c + e) * 0.5
    lh = (a + b - c - e) * 0.5
    hl = (a - b + c - e) * 0.5
    hh = (a - b - c + e) * 0.5
    return np.concatenate([ll, lh, hl, hh], axis=3)


def _synthesize(d: np.ndarray) -> np.ndarray:
    n, h, w, c4 = d.shape
    c = c4 // 4
    ll, lh, hl, hh = np.split(d, 4, axis=3)
    out = np.empty((n, 2 * h, 2 * w, c), dtype=d.dtype)
    out[:, 0::2, 0::2, :] = (ll + lh + hl + hh) * 0.5
    out[:, 0::2, 1::2, :] = (ll + lh - hl - hh) * 0.5
    out[:, 1::2, 0::2, :] = (ll - lh + hl - hh) * 0.5
    out[:, 1::2, 1::2, :] = (ll - lh - hl + hh) * 0.5
    return out


def dwt2_haar(x: Tensor) -> Tensor:
    """Analysis: (N, H, W, C) -> (N, H/2, W/2, 4C) with H, W even."""
    n, h, w, c = x.data.shape
    if h % 2 or w % 2:
        raise ValueError(f"dwt2_haar: spatial extents must be even, got {h}x{w}")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, _synthesize(g))

    return Tensor._from_op(_analyze(x.data), (x,), backward_fn, "dwt2_haar")


def idwt2_haar(x: Tensor) -> Tensor:
    """Synthesis: (N, h, w, 4C) -> (N, 2h, 2w, C); channels divisible by 4."""
    n, h, w, c4 = x.data.shape
    if c4 % 4:
        raise ValueError(f"idwt2_haar: channel count must be divisible by 4, got {c4}")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, _analyze(g))

    return Tensor._from_op(_synthesize(x.data), (x,), backward_fn, "idwt2_haar")
