"""Noisy/clean image pairs: synthetic AWGN, paired folders, patch sampling, image I/O.

Images are float arrays of shape ``3 x H x W``; loaded files are scaled to
[0, 1].  Noise levels are given on the 0-255 scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".pgm")


@dataclass
class ImagePair:
    noisy: np.ndarray
    clean: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        if self.noisy.shape != self.clean.shape:
            raise ValueError(f"noisy {self.noisy.shape} and clean {self.clean.shape} differ in shape")

    @property
    def shape(self):
        return self.clean.shape


def synthesize_awgn(clean, sigma, rng):
    """y = x + n / 255 with n ~ N(0, sigma^2) per pixel and channel; no clipping."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    clean = np.asarray(clean, dtype=np.float32)
    if sigma == 0:
        noisy = clean.copy()
    else:
        noisy = (clean + rng.normal(0.0, sigma, size=clean.shape) / 255.0).astype(np.float32)
    return ImagePair(noisy, clean, provenance=f"synthetic sigma={sigma:g}")


def sample_patches(pair, patch, count, rng):
    """``count`` aligned random crops of size ``patch`` x ``patch``."""
    _, h, w = pair.shape
    if patch > min(h, w):
        raise ValueError(f"patch {patch} larger than image {h}x{w}")
    out = []
    for _ in range(count):
        i = int(rng.integers(0, h - patch + 1))
        j = int(rng.integers(0, w - patch + 1))
        sl = (slice(None), slice(i, i + patch), slice(j, j + patch))
        out.append(ImagePair(pair.noisy[sl], pair.clean[sl], pair.provenance))
    return out


def synthetic_image(size, rng):
    """Piecewise-smooth RGB test image: a colour gradient with random discs and boxes."""
    h, w = (size, size) if np.isscalar(size) else size
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    c0, c1, c2 = rng.uniform(0.1, 0.9, size=(3, 3, 1, 1))
    img = c0 + (c1 - c0) * xx + (c2 - c0) * yy * 0.5
    for _ in range(int(rng.integers(3, 7))):
        colour = rng.uniform(0.0, 1.0, size=(3, 1, 1))
        cy, cx = rng.uniform(0, 1, size=2)
        if rng.random() < 0.5:
            r = rng.uniform(0.08, 0.3)
            region = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        else:
            hh, ww = rng.uniform(0.1, 0.4, size=2)
            region = (np.abs(yy - cy) < hh / 2) & (np.abs(xx - cx) < ww / 2)
        img = np.where(region, colour, img)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def load_image(path):
    """PNG / PGM -> float32 ``3 x H x W`` in [0, 1]; greyscale is replicated to 3 channels."""
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[None], 3, axis=0)
    else:
        arr = arr.transpose(2, 0, 1)
    return np.ascontiguousarray(arr)


def to_uint8(img):
    return (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(path, img):
    """Clamp to [0, 1] and write an 8-bit RGB PNG (or PGM for a .pgm suffix)."""
    arr = to_uint8(np.asarray(img))
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        Image.fromarray(arr.mean(axis=0).round().astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


def load_paired_folder(root):
    """Pairs ``<root>/noisy/<stem>.*`` with ``<root>/clean/<stem>.*``."""
    root = Path(root)

    def stems(sub):
        d = root / sub
        if not d.is_dir():
            raise FileNotFoundError(f"missing directory {d}")
        return {p.stem: p for p in sorted(d.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}

    noisy, clean = stems("noisy"), stems("clean")
    orphans = sorted(set(noisy) ^ set(clean))
    if orphans:
        raise ValueError(f"unmatched images in {root}: {', '.join(orphans)}")
    pairs = []
    for stem in sorted(noisy):
        pairs.append(ImagePair(load_image(noisy[stem]), load_image(clean[stem]), provenance=str(noisy[stem])))
    return pairs


def write_paired_folder(root, pairs, names=None):
    root = Path(root)
    (root / "noisy").mkdir(parents=True, exist_ok=True)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    for i, pair in enumerate(pairs):
        name = names[i] if names else f"{i:04d}"
        save_image(root / "noisy" / f"{name}.png", pair.noisy)
        save_image(root / "clean" / f"{name}.png", pair.clean)
