from __future__ import annotations

from . import functional as F
from .nn import Conv2d, Module


class ResidualBlock(Module):
    """Three 3x3 convolutions with leaky ReLUs between them, plus a skip path.

    When ``c_in != c_out`` the first convolution changes the channel count
    and the skip goes through a 1x1 projection.
    """

    def __init__(self, c_in, c_out, rng, slope=0.2):
        self.conv1 = Conv2d(c_in, c_out, 3, rng)
        self.conv2 = Conv2d(c_out, c_out, 3, rng)
        self.conv3 = Conv2d(c_out, c_out, 3, rng)
        self.skip = Conv2d(c_in, c_out, 1, rng) if c_in != c_out else None
        self.slope = slope
        self.c_in = c_in

    def forward(self, x):
        ch = x.shape[-3]
        if ch != self.c_in:
            raise ValueError(f"residual block expects {self.c_in} channels, got {ch}")
        y = F.leaky_relu(self.conv1(x), self.slope)
        y = F.leaky_relu(self.conv2(y), self.slope)
        y = self.conv3(y)
        return F.add(self.skip(x) if self.skip is not None else x, y)


def residual_block(x, weights):
    return weights(x)
