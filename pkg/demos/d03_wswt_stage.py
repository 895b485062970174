"""
One wavelet transformer stage
=============================

"""

import numpy as np

from dnswin.tensor import Tensor, no_grad
from dnswin.wswt import WSWTStage, zero_stage_weights

rng = np.random.default_rng(0)

# A stage at 32x32 with 16 channels: the subbands are 16x16, windows 8x8.
stage = WSWTStage(16, 32, 32, window=8, heads=2, rng=rng)
print("parameters:", stage.num_parameters())
print("HF block shifts:", [b.shift for b in stage.hf_blocks])

x = Tensor(rng.normal(size=(16, 32, 32)).astype(np.float32))
with no_grad():
    y = stage(x)
print("in", x.shape, "out", y.shape)

# With every weight zeroed the residual paths pass the input straight through,
# plus the learned positional embedding.
zero_stage_weights(stage)
with no_grad():
    y = stage(x)
print("zeroed stage = x + pos:", float(np.abs(y.data - (x.data + stage.pos.data)).max()) < 1e-5)

# When the window already spans a whole subband there is nothing to slide over.
coarse = WSWTStage(16, 16, 16, window=8, heads=2, rng=rng)
print("coarse HF block shifts:", [b.shift for b in coarse.hf_blocks])
