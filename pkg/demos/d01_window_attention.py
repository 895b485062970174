"""
Windows, shifts and the attention mask
======================================

"""

import numpy as np

from dnswin import (
    AttentionConfig,
    build_shift_mask,
    swsa,
    window_partition,
    window_reverse,
    wsa,
)
from dnswin.attention import WindowAttention
from dnswin.tensor import Tensor, no_grad

rng = np.random.default_rng(0)

# An 8x8 map cut into 4x4 windows gives four windows of sixteen tokens.
x = Tensor(rng.normal(size=(16, 8, 8)))
windows = window_partition(x, 4)
print("windows:", windows.shape)
print("reverse is exact:", np.array_equal(window_reverse(windows, 4, 8, 8).data, x.data))

# Rolling by half a window glues together pixels that were never neighbours.
# The mask keeps tokens from attending across those seams.
mask = build_shift_mask(8, 8, 4, 2)
for n, m in enumerate(mask):
    regions = len({tuple(row) for row in (m == 0)})
    print(f"window {n}: {regions} region(s), {(m != 0).sum()} blocked pairs")

cfg = AttentionConfig(window_size=4, heads=2, channels=16)
shifted = AttentionConfig(window_size=4, heads=2, channels=16, shift=2)
weights = WindowAttention(cfg, rng)
with no_grad():
    a = wsa(x, cfg, weights).data
    b = swsa(x, shifted, weights).data
print("plain vs sliding differ by", float(np.abs(a - b).max()))

# A single window covering the whole map is ordinary global attention.
with no_grad():
    one = wsa(Tensor(rng.normal(size=(16, 4, 4))), cfg, weights)
print("single window output:", one.shape)
