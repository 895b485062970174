"""Wavelet sliding-window transformer for image denoising, on a small numpy autodiff core."""

from .attention import (
    AttentionConfig,
    build_shift_mask,
    flops_msa,
    flops_wsa,
    swsa,
    window_partition,
    window_reverse,
    wsa,
)
from .checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from .data import ImagePair, sample_patches, synthesize_awgn
from .metrics import psnr, ssim
from .network import DnSwin, ModelConfig
from .tensor import Tensor, no_grad
from .training import Adam, TrainConfig, charbonnier_loss, cosine_rate, train
from .wavelet import SubbandSet, haar_dwt, haar_idwt

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AttentionConfig",
    "build_shift_mask",
    "charbonnier_loss",
    "cosine_rate",
    "DnSwin",
    "flops_msa",
    "flops_wsa",
    "haar_dwt",
    "haar_idwt",
    "ImagePair",
    "load_checkpoint",
    "load_model",
    "ModelConfig",
    "no_grad",
    "psnr",
    "sample_patches",
    "save_checkpoint",
    "save_model",
    "ssim",
    "SubbandSet",
    "swsa",
    "synthesize_awgn",
    "Tensor",
    "train",
    "TrainConfig",
    "window_partition",
    "window_reverse",
    "wsa",
]
