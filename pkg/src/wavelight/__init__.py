"""Wavelet-domain encoder-decoder network for image relighting.

A self-contained numpy implementation: a small reverse-mode autodiff
tensor core, differentiable Haar analysis/synthesis and pixel-shuffle
layers, the multi-level encoder-decoder model with its strided ablation
variant, the MAE + SSIM + gray training losses, evaluation metrics, a
deterministic Adam training loop with binary checkpoints, and dataset
plumbing including a synthetic relighting-pair generator.
"""

from . import data, gradcheck, losses, metrics, model, shuffle, tensor, trainer, wavelet
from .data import IlluminationSetting, ImagePair, synth_relight_pair
from .losses import LossConfig, gray_loss, mae_loss, ssim_loss, total_loss
from .metrics import mps, psnr, ssim_metric
from .model import ModelConfig, ParameterSet, build, forward, parameter_count
from .shuffle import depth_to_space, space_to_depth
from .tensor import Shape, Tensor, backward, conv2d, finite_diff_grad
from .trainer import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train
from .wavelet import dwt2_haar, idwt2_haar

__version__ = "0.1.0"
