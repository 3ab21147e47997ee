"""Evaluation metrics: PSNR, SSIM, and the mean perceptual score.

The learned perceptual distance L is never computed here; it is an
external input, and MPS = 0.5 * (S + (1 - L)) combines it with SSIM.
"""

import io
import sys

import numpy as np

from wavelight import data, metrics
from wavelight.losses import LossConfig
from wavelight.tensor import Tensor

rng = np.random.default_rng(1)
cfg = LossConfig(blur_sigma=2.0, blur_kernel=9)

target = data.synth_relight_pair(2, 64, data.DEFAULT_FROM, data.DEFAULT_TO).target_image
for noise in (0.0, 0.02, 0.1):
    pred = Tensor(np.clip(target.data + rng.normal(0, noise or 1e-12, target.data.shape), 0, 1).astype(np.float32)) if noise else target
    p = metrics.psnr(pred, target)
    s = metrics.ssim_metric(pred, target, cfg)
    print(f"noise sigma {noise:4.2f}: psnr {p if p != float('inf') else 'inf':>7} dB  ssim {s:.4f}"
          if noise else f"noise sigma {noise:4.2f}: psnr     inf dB  ssim {s:.4f}")

# combining an externally supplied L with SSIM
for s, l in [(0.6310, 0.3405), (0.6642, 0.2771), (1.0, 0.0)]:
    print(f"S={s:.4f}, L={l:.4f} -> MPS {metrics.mps(s, l):.5f}")

# the CSV report format used by the eval command
rows = [
    metrics.MetricsReport.compute("clean", target, target, lpips=0.0, cfg=cfg),
    metrics.MetricsReport.compute(
        "noisy",
        Tensor(np.clip(target.data + rng.normal(0, 0.05, target.data.shape), 0, 1).astype(np.float32)),
        target,
        lpips=0.21,
        cfg=cfg,
    ),
]
buf = io.StringIO()
metrics.write_report(rows, buf)
sys.stdout.write(buf.getvalue())
