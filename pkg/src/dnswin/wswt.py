"""Wavelet sliding-window transformer stage.

One stage: add a learnable positional embedding, split into Haar subbands,
refine each subband with a residual block, run the low band through LF-WSA
blocks and the three high bands (stacked along channels) through HF-SWSA
blocks, then merge with the inverse transform.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .attention import AttentionConfig, WindowAttention, attention_unit
from .nn import MLP, LayerNorm, Module, parameter
from .residual import ResidualBlock
from .wavelet import SubbandSet, haar_dwt, haar_idwt


class WSWTBlock(Module):
    """Two pre-norm attention + MLP sub-blocks.

    ``shifted=True`` gives the HF-SWSA block (second unit slides by M // 2);
    ``shifted=False`` the LF-WSA block.
    """

    def __init__(self, dim, heads, window, mlp_ratio, rng, shifted):
        shift = window // 2 if shifted else 0
        self.norm1 = LayerNorm(dim)
        self.attn1 = WindowAttention(AttentionConfig(window, heads, dim, 0), rng)
        self.norm2 = LayerNorm(dim)
        self.mlp1 = MLP(dim, mlp_ratio, rng)
        self.norm3 = LayerNorm(dim)
        self.attn2 = WindowAttention(AttentionConfig(window, heads, dim, shift), rng)
        self.norm4 = LayerNorm(dim)
        self.mlp2 = MLP(dim, mlp_ratio, rng)

    @property
    def shift(self):
        return self.attn2.cfg.shift

    def forward(self, x, shift=None):
        """Channel-last ``(B, H, W, C)`` in and out; ``shift`` overrides the second unit's."""
        s = self.shift if shift is None else shift
        x = F.add(attention_unit(self.norm1(x), self.attn1, shift=0), x)
        x = F.add(self.mlp1(self.norm2(x)), x)
        x = F.add(attention_unit(self.norm3(x), self.attn2, shift=s), x)
        return F.add(self.mlp2(self.norm4(x)), x)


def _run_chw(x, fn):
    batched = x.ndim == 4
    if not batched:
        x = F.reshape(x, (1,) + x.shape)
    y = F.transpose(fn(F.transpose(x, (0, 2, 3, 1))), (0, 3, 1, 2))
    return y if batched else F.reshape(y, y.shape[1:])


def hf_swsa_block(x, weights):
    """HF-SWSA block on a ``[B,] C x H x W`` map (shift as configured in ``weights``)."""
    return _run_chw(x, weights)


def lf_wsa_block(x, weights):
    """LF-WSA block: both attention units unshifted."""
    return _run_chw(x, lambda t: weights(t, shift=0))


class WSWTStage(Module):
    """Deep-feature extractor applied to one encoder stage's ``C x H x W`` map."""

    def __init__(self, channels, height, width, window, heads, rng, lf_depth=2, hf_depth=2,
                 mlp_ratio=4.0, slope=0.2, sliding=True):
        if height % 2 or width % 2:
            raise ValueError(f"stage resolution {height}x{width} must be even")
        sub_h, sub_w = height // 2, width // 2
        if sub_h % window or sub_w % window:
            raise ValueError(
                f"subband extent {sub_h}x{sub_w} is not a multiple of window size {window}"
            )
        self.channels = channels
        self.resolution = (height, width)
        self.window = window
        self.pos = parameter(rng.normal(0.0, 0.02, size=(channels, height, width)))
        self.rb_ll = ResidualBlock(channels, channels, rng, slope)
        self.rb_lh = ResidualBlock(channels, channels, rng, slope)
        self.rb_hl = ResidualBlock(channels, channels, rng, slope)
        self.rb_hh = ResidualBlock(channels, channels, rng, slope)
        # a window covering the whole subband has nothing to slide across
        hf_shift = sliding and window < min(sub_h, sub_w)
        self.lf_blocks = [WSWTBlock(channels, heads, window, mlp_ratio, rng, shifted=False) for _ in range(lf_depth)]
        self.hf_blocks = [
            WSWTBlock(3 * channels, heads, window, mlp_ratio, rng, shifted=hf_shift) for _ in range(hf_depth)
        ]

    def decompose(self, x):
        """Positional embedding + Haar split."""
        if x.shape[-3:] != self.pos.shape:
            raise ValueError(
                f"stage expects {self.pos.shape} features, got {x.shape[-3:]} "
                "(positional embedding fixes the resolution; tile larger inputs)"
            )
        return haar_dwt(F.add_bias(x, self.pos))

    def process_subbands(self, s):
        """Per-subband RBs, then LF / HF attention stacks; returns the pre-merge subbands."""
        ll = self.rb_ll(s.ll)
        highs = [self.rb_lh(s.lh), self.rb_hl(s.hl), self.rb_hh(s.hh)]
        ll = _run_chw(ll, self._lf)
        hf = _run_chw(F.concat(highs, axis=-3), self._hf)
        lh, hl, hh = F.split(hf, 3, axis=-3)
        return SubbandSet(ll, lh, hl, hh)

    def _lf(self, t):
        for blk in self.lf_blocks:
            t = blk(t, shift=0)
        return t

    def _hf(self, t):
        for blk in self.hf_blocks:
            t = blk(t)
        return t

    def forward(self, x):
        return haar_idwt(self.process_subbands(self.decompose(x)))


def wswt_stage(x, stage):
    return stage(x)


def zero_stage_weights(stage):
    """Zero every attention / MLP weight and every RB convolution (tests and demos)."""
    for name, p in stage.named_parameters():
        if name == "pos" or ".norm" in name:
            continue
        p.data = np.zeros_like(p.data)
