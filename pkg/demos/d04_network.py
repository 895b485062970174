"""
Shapes through the full denoiser
================================

"""

import numpy as np

from dnswin import DnSwin, ModelConfig
from dnswin.tensor import Tensor, no_grad

cfg = ModelConfig()
for i in range(1, cfg.stages + 1):
    print(f"stage {i}: {cfg.stage_channels(i):3d} ch, {cfg.stage_extent(i):3d} px, "
          f"window {cfg.stage_window(i)}, {cfg.stage_heads(i)} heads")
print("default parameters:", f"{DnSwin(cfg).num_parameters():,d}")

# A small configuration is enough to watch the data flow.
toy = DnSwin(ModelConfig(base_channels=8, window_size=4, lf_depth=1, hf_depth=1, train_patch=32), seed=0)
x = Tensor(np.random.default_rng(0).uniform(size=(2, 3, 32, 32)).astype(np.float32))
with no_grad():
    feats = toy.encoder(x)
    for i, f in enumerate(feats):
        print(f"encoder X{i}:", f.shape)
    out = toy(x)
print("output:", out.shape, "parameters", f"{toy.num_parameters():,d}")
