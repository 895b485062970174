"""Whole-image denoising by overlapping fixed-size tiles with linear feather blending."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, no_grad


def tile_starts(n, tile, overlap):
    """Tile origins covering ``[0, n)`` with stride ``tile - overlap``; the last tile is flush with the end."""
    if n <= tile:
        return [0]
    stride = tile - overlap
    starts = list(range(0, n - tile, stride))
    starts.append(n - tile)
    return starts


def _ramp(tile, starts, idx):
    """1-D blend weights for tile ``idx``: 1 inside, linear ramps where it overlaps a neighbour."""
    w = np.ones(tile, dtype=np.float64)
    s = starts[idx]
    if idx > 0:
        ov = starts[idx - 1] + tile - s
        if ov > 0:
            w[:ov] = np.minimum(w[:ov], np.arange(1, ov + 1) / (ov + 1))
    if idx + 1 < len(starts):
        ov = s + tile - starts[idx + 1]
        if ov > 0:
            w[tile - ov :] = np.minimum(w[tile - ov :], np.arange(ov, 0, -1) / (ov + 1))
    return w


def denoise_tiled(model, image, tile=None, overlap=16, batch_size=8):
    """Denoise a ``3 x H x W`` array of any size >= 1 pixel; returns an unclamped float32 array."""
    tile = tile or model.cfg.train_patch
    if tile != model.cfg.train_patch:
        raise ValueError(
            f"tile {tile} must equal the model's training patch {model.cfg.train_patch} "
            "(positional embeddings are sized to it)"
        )
    if not 0 <= overlap < tile:
        raise ValueError(f"overlap must lie in [0, {tile}), got {overlap}")
    image = np.asarray(image, dtype=np.float32)
    c, h, w = image.shape
    ph, pw = max(0, tile - h), max(0, tile - w)
    if ph or pw:
        image = np.pad(image, ((0, 0), (0, ph), (0, pw)), mode="reflect" if min(h, w) > max(ph, pw) else "edge")
    H, W = image.shape[1:]
    rows, cols = tile_starts(H, tile, overlap), tile_starts(W, tile, overlap)
    coords = [(i, j) for i in range(len(rows)) for j in range(len(cols))]
    acc = np.zeros((c, H, W), dtype=np.float32)
    norm = np.zeros((H, W), dtype=np.float32)
    with no_grad():
        for b in range(0, len(coords), batch_size):
            chunk = coords[b : b + batch_size]
            x = np.stack([image[:, rows[i] : rows[i] + tile, cols[j] : cols[j] + tile] for i, j in chunk])
            pred = model(Tensor(x)).data
            for (i, j), p in zip(chunk, pred):
                wgt = np.outer(_ramp(tile, rows, i), _ramp(tile, cols, j)).astype(np.float32)
                r, q = rows[i], cols[j]
                acc[:, r : r + tile, q : q + tile] += p * wgt
                norm[r : r + tile, q : q + tile] += wgt
    return (acc / norm)[:, :h, :w]
