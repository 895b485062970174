"""
Cost of window attention
========================

"""

import numpy as np

from dnswin import flops_msa, flops_wsa
from dnswin.attention import AttentionConfig, WindowAttention, wsa
from dnswin.tensor import Tensor, mac_counter, no_grad

# Global attention grows with the square of the pixel count, windows grow linearly.
print(f"{'H':>5} {'C':>4} {'M':>3} {'global':>16} {'window':>14} {'ratio':>8}")
for h, c, m in [(16, 32, 8), (32, 32, 8), (64, 32, 8), (128, 64, 8), (256, 64, 8)]:
    g, w = flops_msa(h, h, c), flops_wsa(h, h, c, m)
    print(f"{h:5d} {c:4d} {m:3d} {g:16,d} {w:14,d} {g / w:8.1f}")

# The counts are not just a formula: the matmuls report what they actually do.
cfg = AttentionConfig(window_size=8, heads=4, channels=32)
weights = WindowAttention(cfg, np.random.default_rng(0))
with no_grad(), mac_counter() as macs:
    wsa(Tensor(np.zeros((32, 64, 64), dtype=np.float32)), cfg, weights)
print("instrumented:", f"{macs.total:,d}", "projections", f"{macs['proj']:,d}", "attention", f"{macs['attn']:,d}")
print("formula:     ", f"{flops_wsa(64, 64, 32, 8):,d}")
