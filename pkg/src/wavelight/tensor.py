"""Dense 4-D tensors with a minimal reverse-mode autodiff engine.

The layout is fixed to (batch, height, width, channels) with channels
innermost; weights reuse the same 4-D container as (kh, kw, cin, cout).
Graphs are built define-by-run: each operation records its parent tensors
and a backward closure on its output, and :func:`backward` on a scalar
loss replays the closures in reverse construction order. Elementwise
operations require exact shape equality; there is no broadcasting.

Training code runs in float32. Gradient checks run the identical code
paths at float64 by constructing float64 tensors.
"""

from __future__ import annotations

import itertools
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "Shape",
    "Tensor",
    "zeros",
    "ones",
    "full",
    "add",
    "sub",
    "mul",
    "div",
    "scalar_mul",
    "scalar_add",
    "reduce_mean",
    "relu",
    "abs",
    "conv2d",
    "conv2d_transpose",
    "reflect_pad",
    "backward",
    "finite_diff_grad",
]

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
_node_ids = itertools.count()


class Shape(NamedTuple):
    """Extents of a 4-D tensor; compares equal to a plain 4-tuple."""

    batch: int
    height: int
    width: int
    channels: int

    @property
    def count(self) -> int:
        return self.batch * self.height * self.width * self.channels


class Tensor:
    """A 4-D float array plus the bookkeeping for reverse-mode autodiff.

    ``grad`` is populated by :func:`backward` and accumulates additively
    across fan-out paths (and across repeated backward calls; training
    code clears it between steps). Non-leaf tensors keep references to
    their parents so the graph lives exactly as long as its outputs.
    """

    __slots__ = ("data", "requires_grad", "grad", "node_id", "op", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is None:
            # keep an ndarray's float precision; everything else becomes f32
            dtype = arr.dtype if isinstance(data, np.ndarray) and arr.dtype in _FLOAT_DTYPES else np.float32
        arr = np.ascontiguousarray(arr, dtype=dtype)
        if arr.ndim != 4:
            raise ValueError(
                f"tensor data must be 4-D (batch, height, width, channels), got shape {arr.shape}"
            )
        if min(arr.shape) < 1:
            raise ValueError(f"all tensor extents must be >= 1, got {arr.shape}")
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node_id = next(_node_ids)
        self.op: str | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None

    @classmethod
    def _from_op(
        cls,
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        backward_fn: Callable[[np.ndarray], None],
        op: str,
    ) -> "Tensor":
        out = cls(data, requires_grad=any(p.requires_grad for p in parents))
        out.op = op
        if out.requires_grad:
            out._parents = parents
            out._backward_fn = backward_fn
        return out

    @property
    def shape(self) -> Shape:
        return Shape(*self.data.shape)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def mean(self) -> "Tensor":
        return reduce_mean(self)

    def abs(self) -> "Tensor":
        return _abs_op(self)

    def relu(self) -> "Tensor":
        return relu(self)

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return scalar_add(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return scalar_add(self, -float(other))

    def __rsub__(self, other):
        return scalar_add(scalar_mul(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scalar_mul(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return scalar_mul(self, 1.0 / float(other))

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={tuple(self.data.shape)}, dtype={self.data.dtype}, "
            f"requires_grad={self.requires_grad}, op={self.op!r})"
        )


def zeros(shape, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def full(shape, value: float, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    return Tensor(np.full(shape, value, dtype=dtype), requires_grad=requires_grad)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(
            f"{op}: shape mismatch {tuple(a.data.shape)} vs {tuple(b.data.shape)}"
        )
    if a.data.dtype != b.data.dtype:
        raise ValueError(f"{op}: dtype mismatch {a.data.dtype} vs {b.data.dtype}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "add")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor._from_op(a.data + b.data, (a, b), backward_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "sub")

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, -g)

    return Tensor._from_op(a.data - b.data, (a, b), backward_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "mul")
    ad, bd = a.data, b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g * bd)
        _accumulate(b, g * ad)

    return Tensor._from_op(ad * bd, (a, b), backward_fn, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_binary(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g / bd)
        _accumulate(b, -g * ad / (bd * bd))

    return Tensor._from_op(out, (a, b), backward_fn, "div")


def scalar_mul(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g * s)

    return Tensor._from_op(a.data * s, (a,), backward_fn, "scalar_mul")


def scalar_add(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, g)

    return Tensor._from_op(a.data + s, (a,), backward_fn, "scalar_add")


def _abs_op(a: Tensor) -> Tensor:
    ad = a.data

    def backward_fn(g: np.ndarray) -> None:
        # subgradient at 0 fixed to 0 (np.sign(0) == 0)
        _accumulate(a, g * np.sign(ad))

    return Tensor._from_op(np.abs(ad), (a,), backward_fn, "abs")


abs = _abs_op  # module-level name mirrors the other elementwise ops


def relu(a: Tensor) -> Tensor:
    ad = a.data

    def backward_fn(g: np.ndarray) -> None:
        # gradient at exactly 0 defined as 0
        _accumulate(a, g * (ad > 0))

    return Tensor._from_op(np.maximum(ad, 0), (a,), backward_fn, "relu")


def reduce_mean(a: Tensor) -> Tensor:
    """Mean over every element, returned as a (1,1,1,1) scalar tensor."""
    count = a.data.size
    out = np.mean(a.data, dtype=np.float64).astype(a.data.dtype).reshape(1, 1, 1, 1)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, np.full_like(a.data, g.reshape(())) / count)

    return Tensor._from_op(out, (a,), backward_fn, "reduce_mean")


def _same_pads(extent: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-extent // stride)
    total = max((out - 1) * stride + k - extent, 0)
    return out, total // 2, total - total // 2


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    padding: str = "same",
) -> Tensor:
    """2-D convolution of NHWC input with (kh, kw, cin, cout) weights.

    ``same`` zero-pads so that stride 1 preserves the spatial extent
    (stride s yields ceil(extent / s)); ``valid`` uses no padding and
    yields floor((extent - k) / s) + 1. Differentiable with respect to
    input, weights and bias.
    """
    n, h, wdt, cin = x.data.shape
    kh, kw, wcin, cout = w.data.shape
    if wcin != cin:
        raise ValueError(
            f"conv2d: input shape {tuple(x.data.shape)} has {cin} channels but "
            f"weights {tuple(w.data.shape)} expect {wcin}"
        )
    if x.data.dtype != w.data.dtype:
        raise ValueError(f"conv2d: dtype mismatch {x.data.dtype} vs {w.data.dtype}")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be >= 1, got {stride}")
    if b is not None:
        if tuple(b.data.shape) != (1, 1, 1, cout):
            raise ValueError(
                f"conv2d: bias shape {tuple(b.data.shape)} must be (1, 1, 1, {cout})"
            )
        if b.data.dtype != x.data.dtype:
            raise ValueError(f"conv2d: bias dtype {b.data.dtype} vs input {x.data.dtype}")

    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(
                f"conv2d: `same` padding requires odd kernel extents, got {kh}x{kw}"
            )
        ho, pt, pb = _same_pads(h, kh, stride)
        wo, pl, pr = _same_pads(wdt, kw, stride)
    elif padding == "valid":
        if h < kh or wdt < kw:
            raise ValueError(
                f"conv2d: input {h}x{wdt} smaller than kernel {kh}x{kw} for `valid` padding"
            )
        ho = (h - kh) // stride + 1
        wo = (wdt - kw) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ValueError(f"conv2d: unknown padding mode {padding!r}")

    padded = pt or pb or pl or pr
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if padded else x.data
    wd = w.data
    yspan = (ho - 1) * stride + 1
    xspan = (wo - 1) * stride + 1
    out = np.zeros((n, ho, wo, cout), dtype=x.data.dtype)
    for dy in range(kh):
        for dx in range(kw):
            patch = xp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :]
            out += patch @ wd[dy, dx]
    if b is not None:
        out += b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(g: np.ndarray) -> None:
        if w.requires_grad:
            gw = np.empty_like(wd)
            for dy in range(kh):
                for dx in range(kw):
                    patch = xp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :]
                    gw[dy, dx] = np.tensordot(patch, g, axes=([0, 1, 2], [0, 1, 2]))
            _accumulate(w, gw)
        if b is not None and b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 1, 2)).reshape(1, 1, 1, cout))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for dy in range(kh):
                for dx in range(kw):
                    gxp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :] += (
                        g @ wd[dy, dx].T
                    )
            _accumulate(x, gxp[:, pt : pt + h, pl : pl + wdt, :] if padded else gxp)

    return Tensor._from_op(out, parents, backward_fn, "conv2d")


def conv2d_transpose(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 2,
    padding: str = "same",
) -> Tensor:
    """Transposed convolution: the adjoint of `same` strided conv2d.

    Weights are (kh, kw, cout, cin); the output spatial extent is exactly
    ``input * stride``.
    """
    n, h, wdt, cin = x.data.shape
    kh, kw, cout, wcin = w.data.shape
    if wcin != cin:
        raise ValueError(
            f"conv2d_transpose: input shape {tuple(x.data.shape)} has {cin} channels "
            f"but weights {tuple(w.data.shape)} expect {wcin}"
        )
    if x.data.dtype != w.data.dtype:
        raise ValueError(f"conv2d_transpose: dtype mismatch {x.data.dtype} vs {w.data.dtype}")
    if padding != "same":
        raise ValueError("conv2d_transpose: only `same` padding is supported")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(
            f"conv2d_transpose: `same` padding requires odd kernel extents, got {kh}x{kw}"
        )
    if stride < 1:
        raise ValueError(f"conv2d_transpose: stride must be >= 1, got {stride}")
    if b is not None and tuple(b.data.shape) != (1, 1, 1, cout):
        raise ValueError(
            f"conv2d_transpose: bias shape {tuple(b.data.shape)} must be (1, 1, 1, {cout})"
        )

    ho, wo = h * stride, wdt * stride
    # pads of the forward conv this op is the adjoint of (ho -> h)
    _, pt, pb = _same_pads(ho, kh, stride)
    _, pl, pr = _same_pads(wo, kw, stride)
    yspan = (h - 1) * stride + 1
    xspan = (wdt - 1) * stride + 1
    wd = w.data
    outp = np.zeros((n, ho + pt + pb, wo + pl + pr, cout), dtype=x.data.dtype)
    for dy in range(kh):
        for dx in range(kw):
            outp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :] += (
                x.data @ wd[dy, dx].T
            )
    out = outp[:, pt : pt + ho, pl : pl + wo, :].copy()
    if b is not None:
        out += b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(g: np.ndarray) -> None:
        gp = np.pad(g, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            for dy in range(kh):
                for dx in range(kw):
                    gx += gp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :] @ wd[dy, dx]
            _accumulate(x, gx)
        if w.requires_grad:
            gw = np.empty_like(wd)
            for dy in range(kh):
                for dx in range(kw):
                    gslice = gp[:, dy : dy + yspan : stride, dx : dx + xspan : stride, :]
                    gw[dy, dx] = np.tensordot(gslice, x.data, axes=([0, 1, 2], [0, 1, 2]))
            _accumulate(w, gw)
        if b is not None and b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 1, 2)).reshape(1, 1, 1, cout))

    return Tensor._from_op(out, parents, backward_fn, "conv2d_transpose")


def _reflect_indices(n: int, p: int) -> np.ndarray:
    idx = np.arange(-p, n + p)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx < n, idx, period - idx)


def reflect_pad(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Mirror-pads height and width without repeating the edge row/column."""
    if pad_h < 0 or pad_w < 0:
        raise ValueError(f"reflect_pad: pads must be >= 0, got ({pad_h}, {pad_w})")
    n, h, wdt, c = x.data.shape
    iy = _reflect_indices(h, pad_h)
    ix = _reflect_indices(wdt, pad_w)
    out = np.pad(x.data, ((0, 0), (pad_h, pad_h), (pad_w, pad_w), (0, 0)), mode="reflect")

    def backward_fn(g: np.ndarray) -> None:
        if not x.requires_grad:
            return
        # adjoint of the gather: fold padded-row/column gradients back on
        # their source pixels, one axis at a time
        m = np.moveaxis(g, 1, 0)  # (Hp, N, Wp, C)
        buf = np.zeros((h,) + m.shape[1:], dtype=g.dtype)
        np.add.at(buf, iy, m)  # (H, N, Wp, C)
        m = np.moveaxis(buf, 2, 0)  # (Wp, H, N, C)
        buf = np.zeros((wdt,) + m.shape[1:], dtype=g.dtype)
        np.add.at(buf, ix, m)  # (W, H, N, C)
        _accumulate(x, np.ascontiguousarray(buf.transpose(2, 1, 0, 3)))

    return Tensor._from_op(out, (x,), backward_fn, "reflect_pad")


def backward(loss: Tensor) -> None:
    """Populates ``grad`` on every requires_grad tensor reachable from ``loss``.

    The loss must be a (1,1,1,1) scalar. Nodes are visited exactly once,
    in reverse construction order, so every gradient is complete before
    it is propagated further.
    """
    if tuple(loss.data.shape) != (1, 1, 1, 1):
        raise ValueError(f"backward requires a scalar (1,1,1,1) loss, got shape {tuple(loss.data.shape)}")
    nodes: list[Tensor] = []
    seen = {id(loss)}
    stack = [loss]
    while stack:
        node = stack.pop()
        nodes.append(node)
        for parent in node._parents:
            if id(parent) not in seen:
                seen.add(id(parent))
                stack.append(parent)
    nodes.sort(key=lambda t: t.node_id, reverse=True)
    loss.grad = np.ones_like(loss.data)
    for node in nodes:
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


def finite_diff_grad(f: Callable[[Tensor], Tensor], at: Tensor, eps: float = 1e-6) -> Tensor:
    """Central-difference gradient of a tensor-to-scalar map.

    The difference quotient is computed in float64; ``f`` itself runs at
    the dtype of ``at``. This is the independent oracle that the autodiff
    backward passes are checked against.
    """
    if eps <= 0:
        raise ValueError(f"finite_diff_grad: eps must be > 0, got {eps}")
    base = at.data
    work = base.copy()
    flat = work.reshape(-1)
    ref = base.reshape(-1)
    out = np.zeros(base.size, dtype=np.float64)
    for i in range(base.size):
        flat[i] = ref[i] + eps
        fp = f(Tensor(work, dtype=work.dtype)).item()
        flat[i] = ref[i] - eps
        fm = f(Tensor(work, dtype=work.dtype)).item()
        flat[i] = ref[i]
        out[i] = (fp - fm) / (2.0 * eps)
    return Tensor(out.reshape(base.shape), dtype=np.float64)
