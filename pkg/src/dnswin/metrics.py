"""PSNR and SSIM."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def mse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak=1.0):
    """10 log10(peak^2 / MSE) in dB; ``inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def gaussian_window(size=11, sigma=1.5):
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def luminance(img):
    img = np.asarray(img, dtype=np.float64)
    return img.mean(axis=0) if img.ndim == 3 else img


def ssim(a, b, data_range=1.0, win_size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Mean SSIM over all fully-contained 11x11 Gaussian windows of the luminance images.

    Colour inputs (``3 x H x W``) are reduced to the channel mean first.
    """
    x, y = luminance(a), luminance(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < win_size:
        raise ValueError(f"image {x.shape} smaller than the {win_size}x{win_size} window")
    win = gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def filt(img):
        return np.einsum("ijkl,kl->ij", sliding_window_view(img, win.shape), win)

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
