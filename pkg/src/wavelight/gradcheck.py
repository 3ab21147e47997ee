"""Finite-difference verification of every backward pass.

Each check runs an operation at float64 on seeded random inputs placed
away from relu/abs kinks, weights the output with a fixed random mask so
permutation mistakes cannot cancel, and compares the autodiff gradient
against central differences. The relative error is the max elementwise
difference normalized by the larger gradient magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses, model, shuffle, wavelet
from . import tensor as T
from .losses import LossConfig
from .tensor import Tensor, finite_diff_grad

__all__ = ["CheckResult", "run_suite", "DEFAULT_THRESHOLD"]

DEFAULT_THRESHOLD = 1e-5


@dataclass
class CheckResult:
    op: str
    max_rel_err: float
    passed: bool


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    denom = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(analytic - fd)) / denom)


def _off_kink(rng: np.random.Generator, shape, margin: float = 0.1) -> np.ndarray:
    x = rng.uniform(-1.0, 1.0, size=shape)
    return x + margin * np.where(x >= 0, 1.0, -1.0)


def _weighted_mean(out: Tensor, gmask: np.ndarray) -> Tensor:
    return T.reduce_mean(T.mul(out, Tensor(gmask)))


def _check_inputs(
    fn: Callable[..., Tensor],
    inputs: list[np.ndarray],
    rng: np.random.Generator,
    eps: float = 1e-6,
) -> float:
    """Checks d(weighted mean of fn(*inputs)) w.r.t. every input."""
    tensors = [Tensor(a, requires_grad=True) for a in inputs]
    out = fn(*tensors)
    gmask = rng.uniform(-1.0, 1.0, size=out.data.shape)
    loss = _weighted_mean(out, gmask)
    T.backward(loss)
    worst = 0.0
    for i, t in enumerate(tensors):
        def f(probe: Tensor, i=i) -> Tensor:
            args = [Tensor(a) for a in inputs]
            args[i] = probe
            return _weighted_mean(fn(*args), gmask)

        fd = finite_diff_grad(f, Tensor(inputs[i]), eps=eps)
        worst = max(worst, _rel_err(t.grad, fd.data))
    return worst


def _model_e2e(rng: np.random.Generator, samples_per_tensor: int = 4, eps: float = 1e-7) -> float:
    cfg = model.ModelConfig.default(levels=3, width_scale=0.125)
    params = model.build(cfg, seed=7, dtype=np.float64)
    # move the head conv off its zero-initialized identity state so
    # gradients reach every block, and every bias off zero: a zero bias
    # over a dead input patch puts the pre-activation exactly on the
    # relu kink, where central differences do not match the subgradient
    head = params["head.conv12.weight"]
    head.data[...] = rng.uniform(-0.1, 0.1, size=head.data.shape)
    for name, p in params.items():
        if name.endswith(".bias"):
            p.data[...] = 0.2 * _off_kink(rng, p.data.shape, margin=0.25)
    x = Tensor(rng.uniform(0.0, 1.0, size=(1, 32, 32, 3)))
    gmask = rng.uniform(-1.0, 1.0, size=x.data.shape)

    def run() -> Tensor:
        return _weighted_mean(model.forward(params, x), gmask)

    params.zero_grads()
    T.backward(run())
    analytic, fd = [], []
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for j in rng.choice(flat.size, size=min(samples_per_tensor, flat.size), replace=False):
            orig = flat[j]
            flat[j] = orig + eps
            fp = run().item()
            flat[j] = orig - eps
            fm = run().item()
            flat[j] = orig
            fd.append((fp - fm) / (2.0 * eps))
            analytic.append(float(p.grad.reshape(-1)[j]))
    return _rel_err(np.asarray(analytic), np.asarray(fd))


def run_suite(threshold: float = DEFAULT_THRESHOLD, corrupt: str | None = None) -> list[CheckResult]:
    """Runs every check; ``corrupt`` perturbs one op's analytic gradient
    (a negative control proving the suite can fail)."""
    rng = np.random.default_rng(2024)
    loss_cfg = LossConfig(blur_sigma=2.0, blur_kernel=9)

    conv_w = rng.uniform(-0.5, 0.5, size=(3, 3, 2, 3))
    conv_b = rng.uniform(-0.5, 0.5, size=(1, 1, 1, 3))
    tconv_w = rng.uniform(-0.5, 0.5, size=(3, 3, 2, 4))
    a = rng.uniform(-1.0, 1.0, size=(2, 4, 4, 3))
    b = rng.uniform(-1.0, 1.0, size=(2, 4, 4, 3))
    bpos = rng.uniform(0.5, 1.5, size=(2, 4, 4, 3))
    pair_p = _off_kink(rng, (1, 12, 12, 3))
    # a one-signed gap keeps both the raw and the blurred-gray difference
    # safely away from the abs kink
    pair_t = pair_p - rng.uniform(0.1, 0.9, size=(1, 12, 12, 3))

    checks: list[tuple[str, Callable[[], float]]] = [
        (
            "conv2d",
            lambda: max(
                _check_inputs(
                    lambda x, w, bb: T.conv2d(x, w, bb, stride=1, padding="same"),
                    [rng.uniform(-1, 1, (1, 5, 5, 2)), conv_w, conv_b],
                    rng,
                ),
                _check_inputs(
                    lambda x, w: T.conv2d(x, w, stride=2, padding="valid"),
                    [rng.uniform(-1, 1, (1, 6, 6, 2)), conv_w],
                    rng,
                ),
            ),
        ),
        (
            "conv2d_transpose",
            lambda: _check_inputs(
                lambda x, w: T.conv2d_transpose(x, w, stride=2),
                [rng.uniform(-1, 1, (1, 4, 4, 4)), tconv_w],
                rng,
            ),
        ),
        ("relu", lambda: _check_inputs(T.relu, [_off_kink(rng, (2, 4, 4, 3))], rng)),
        ("add", lambda: _check_inputs(T.add, [a, b], rng)),
        ("sub", lambda: _check_inputs(T.sub, [a, b], rng)),
        ("mul", lambda: _check_inputs(T.mul, [a, b], rng)),
        ("div", lambda: _check_inputs(T.div, [a, bpos], rng)),
        ("abs", lambda: _check_inputs(T.abs, [_off_kink(rng, (2, 4, 4, 3))], rng)),
        ("reduce_mean", lambda: _check_inputs(T.reduce_mean, [a], rng)),
        ("reflect_pad", lambda: _check_inputs(lambda x: T.reflect_pad(x, 3, 2), [a], rng)),
        ("dwt2_haar", lambda: _check_inputs(wavelet.dwt2_haar, [rng.uniform(-1, 1, (1, 8, 8, 3))], rng)),
        (
            "idwt2_haar",
            lambda: _check_inputs(wavelet.idwt2_haar, [rng.uniform(-1, 1, (1, 4, 4, 12))], rng),
        ),
        (
            "space_to_depth",
            lambda: _check_inputs(lambda x: shuffle.space_to_depth(x, 2), [a], rng),
        ),
        (
            "depth_to_space",
            lambda: _check_inputs(
                lambda x: shuffle.depth_to_space(x, 2), [rng.uniform(-1, 1, (1, 2, 2, 8))], rng
            ),
        ),
        (
            "mae_loss",
            lambda: _check_inputs(lambda p: losses.mae_loss(p, Tensor(pair_t)), [pair_p], rng),
        ),
        (
            "ssim_loss",
            lambda: _check_inputs(
                lambda p: losses.ssim_loss(p, Tensor(pair_t), loss_cfg), [pair_p], rng
            ),
        ),
        (
            "gray_loss",
            lambda: _check_inputs(
                lambda p: losses.gray_loss(p, Tensor(pair_t), loss_cfg), [pair_p], rng
            ),
        ),
        ("model_e2e", lambda: _model_e2e(rng)),
    ]

    results = []
    for op, check in checks:
        err = check()
        if corrupt == op:
            err += 1.0
        results.append(CheckResult(op=op, max_rel_err=err, passed=err < threshold))
    return results
