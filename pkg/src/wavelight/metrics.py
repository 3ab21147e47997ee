"""Evaluation-only metrics: PSNR, SSIM and the mean perceptual score.

SSIM reuses the loss module's windowed statistics (one implementation
for training and evaluation) and is reported as a mean over channels.
The learned perceptual distance L is accepted as an external input; the
mean perceptual score combines it with SSIM as 0.5 * (S + (1 - L)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .losses import LossConfig, ssim_loss
from .tensor import Tensor

__all__ = ["MetricsReport", "psnr", "ssim_metric", "mps", "write_report"]

REPORT_COLUMNS = ("name", "psnr_db", "ssim", "lpips", "mps")


@dataclass
class MetricsReport:
    name: str
    psnr_db: float
    ssim: float
    lpips: float | None = None
    mps: float | None = None

    @classmethod
    def compute(
        cls,
        name: str,
        pred: Tensor,
        target: Tensor,
        lpips: float | None = None,
        cfg: LossConfig | None = None,
        peak: float = 1.0,
    ) -> "MetricsReport":
        cfg = cfg or LossConfig()
        s = ssim_metric(pred, target, cfg)
        return cls(
            name=name,
            psnr_db=psnr(pred, target, peak),
            ssim=s,
            lpips=lpips,
            mps=None if lpips is None else mps(s, lpips),
        )


def psnr(pred: Tensor, target: Tensor, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); math.inf when the images are identical."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"psnr: shape mismatch {tuple(pred.data.shape)} vs {tuple(target.data.shape)}"
        )
    if peak <= 0:
        raise ValueError(f"psnr: peak must be > 0, got {peak}")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim_metric(pred: Tensor, target: Tensor, cfg: LossConfig | None = None) -> float:
    """Mean SSIM, computed at float64 as 1 - ssim_loss so the identity
    between metric and loss is exact by construction."""
    cfg = cfg or LossConfig()
    p = Tensor(pred.data.astype(np.float64))
    t = Tensor(target.data.astype(np.float64))
    return 1.0 - ssim_loss(p, t, cfg).item()


def mps(ssim: float, lpips: float) -> float:
    """Mean perceptual score 0.5 * (S + (1 - L))."""
    if not (math.isfinite(ssim) and math.isfinite(lpips)):
        raise ValueError(f"mps: inputs must be finite, got S={ssim}, L={lpips}")
    return 0.5 * (ssim + (1.0 - lpips))


def _cell(v: float | None) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf"
    return f"{v:.6f}"


def write_report(reports: Sequence[MetricsReport], stream: IO[str]) -> None:
    """UTF-8 CSV: name,psnr_db,ssim,lpips,mps plus an aggregate mean row.

    lpips/mps cells stay empty where no external L was supplied.
    """
    stream.write("# ssim computed per channel then averaged\n")
    stream.write(",".join(REPORT_COLUMNS) + "\n")
    for r in reports:
        stream.write(f"{r.name},{_cell(r.psnr_db)},{_cell(r.ssim)},{_cell(r.lpips)},{_cell(r.mps)}\n")
    if reports:
        mean_psnr = float(np.mean([r.psnr_db for r in reports]))
        mean_ssim = float(np.mean([r.ssim for r in reports]))
        with_l = [r for r in reports if r.lpips is not None]
        mean_l = float(np.mean([r.lpips for r in with_l])) if len(with_l) == len(reports) else None
        mean_mps = float(np.mean([r.mps for r in with_l])) if len(with_l) == len(reports) else None
        stream.write(
            f"mean,{_cell(mean_psnr)},{_cell(mean_ssim)},{_cell(mean_l)},{_cell(mean_mps)}\n"
        )
