"""Encoder, per-stage WSWT, decoder, and the assembled denoiser."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import functional as F
from .nn import Conv2d, ConvTranspose2d, Module
from .residual import ResidualBlock
from .wswt import WSWTStage


@dataclass
class ModelConfig:
    base_channels: int = 32
    stages: int = 3
    window_size: int = 8
    lf_depth: int = 2
    hf_depth: int = 2
    mlp_ratio: float = 4.0
    leaky_slope: float = 0.2
    train_patch: int = 128
    sliding: bool = True
    in_channels: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("base_channels", "stages", "window_size", "train_patch", "in_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lf_depth < 0 or self.hf_depth < 0:
            raise ValueError("block depths must be non-negative")
        if self.mlp_ratio <= 0:
            raise ValueError("mlp_ratio must be positive")
        coarsest = 2 ** (self.stages + 1)
        if self.train_patch % coarsest:
            raise ValueError(
                f"train_patch {self.train_patch} must be divisible by 2^(stages+1) = {coarsest}"
            )
        for i in range(1, self.stages + 1):
            sub = self.subband_extent(i)
            m = self.stage_window(i)
            if sub % m:
                raise ValueError(
                    f"stage {i}: subband extent {sub} is not a multiple of window size {m}"
                )
            if self.stage_channels(i) % self.stage_heads(i):
                raise ValueError(f"stage {i}: channels not divisible by {self.stage_heads(i)} heads")

    def stage_channels(self, i):
        return self.base_channels * 2**i

    def stage_extent(self, i):
        return self.train_patch // 2**i

    def subband_extent(self, i):
        return self.train_patch // 2 ** (i + 1)

    def stage_window(self, i):
        """Window size used at stage i; clipped to the subband extent at coarse stages."""
        return min(self.window_size, self.subband_extent(i))

    def stage_heads(self, i):
        # head dim stays at base_channels on every stage
        return 2**i

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class Encoder(Module):
    """3x3 head conv, then per stage: residual block + 4x4 stride-2 conv doubling channels."""

    def __init__(self, cfg, rng):
        c = cfg.base_channels
        self.head = Conv2d(cfg.in_channels, c, 3, rng)
        self.rbs = []
        self.downs = []
        for i in range(cfg.stages):
            ci = c * 2**i
            self.rbs.append(ResidualBlock(ci, ci, rng, cfg.leaky_slope))
            self.downs.append(Conv2d(ci, 2 * ci, 4, rng, stride=2, pad=1))

    def forward(self, x):
        feats = [self.head(x)]
        for rb, down in zip(self.rbs, self.downs):
            feats.append(down(rb(feats[-1])))
        return feats


class Decoder(Module):
    """Residual blocks with transposed-conv upsampling and skip concatenation."""

    def __init__(self, cfg, rng):
        c, s = cfg.base_channels, cfg.stages
        slope = cfg.leaky_slope
        self.top = ResidualBlock(c * 2**s, c * 2**s, rng, slope)
        self.ups = []
        self.rbs = []
        for i in range(s, 0, -1):
            ci = c * 2**i
            self.ups.append(ConvTranspose2d(ci, ci // 2, 2, rng))
            self.rbs.append(ResidualBlock(ci, ci // 2, rng, slope))
        self.tail = Conv2d(c, cfg.in_channels, 3, rng)

    def forward(self, deep, x0):
        """``deep`` holds the WSWT outputs for stages 1..S; ``x0`` the head features."""
        skips = [x0] + list(deep[:-1])
        y = self.top(deep[-1])
        for up, rb, skip in zip(self.ups, self.rbs, reversed(skips)):
            y = rb(F.concat([up(y), skip], axis=-3))
        return self.tail(y)


class DnSwin(Module):
    def __init__(self, cfg, rng=None, seed=0):
        if rng is None:
            rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng)
        self.wswt = []
        for i in range(1, cfg.stages + 1):
            ext = cfg.stage_extent(i)
            self.wswt.append(
                WSWTStage(
                    cfg.stage_channels(i), ext, ext, cfg.stage_window(i), cfg.stage_heads(i), rng,
                    lf_depth=cfg.lf_depth, hf_depth=cfg.hf_depth, mlp_ratio=cfg.mlp_ratio,
                    slope=cfg.leaky_slope, sliding=cfg.sliding,
                )
            )
        self.decoder = Decoder(cfg, rng)

    def check_input(self, x):
        p = self.cfg.train_patch
        if x.ndim not in (3, 4) or x.shape[-3] != self.cfg.in_channels or x.shape[-2:] != (p, p):
            raise ValueError(
                f"expected [B,] {self.cfg.in_channels} x {p} x {p} input, got {x.shape}; "
                f"the patch must equal train_patch ({p}), use tiled inference for other sizes"
            )

    def forward(self, noisy):
        self.check_input(noisy)
        feats = self.encoder(noisy)
        deep = [stage(f) for stage, f in zip(self.wswt, feats[1:])]
        return self.decoder(deep, feats[0])


def encode(noisy, weights):
    return weights(noisy)


def decode(deep_features, x0, weights):
    return weights(deep_features, x0)


def dnswin_forward(noisy, model):
    return model(noisy)
