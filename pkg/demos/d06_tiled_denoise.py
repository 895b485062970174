"""
Denoising images of any size
============================

"""

import numpy as np

from dnswin import DnSwin, ModelConfig, psnr, ssim, synthesize_awgn
from dnswin.data import synthetic_image
from dnswin.inference import denoise_tiled, tile_starts
from dnswin.tensor import Tensor, no_grad

rng = np.random.default_rng(0)
model = DnSwin(ModelConfig(base_channels=8, window_size=4, lf_depth=1, hf_depth=1, train_patch=32), seed=0)

# The network only accepts its training patch size. Larger images are covered by
# overlapping tiles whose outputs are feathered together.
print("tile rows for 70 px:", tile_starts(70, 32, 16))

# One tile is just a forward pass.
img = synthetic_image(32, rng)
with no_grad():
    direct = model(Tensor(img)).data
print("single tile == forward:", denoise_tiled(model, img).tobytes() == direct.tobytes())

clean = synthetic_image((45, 70), rng)
pair = synthesize_awgn(clean, 25.0, rng)
out = denoise_tiled(model, pair.noisy)
print("output shape:", out.shape)

# An untrained model, so the numbers only show that the metrics run.
print(f"noisy   PSNR {psnr(pair.noisy, clean):6.2f}  SSIM {ssim(np.clip(pair.noisy, 0, 1), clean):.3f}")
print(f"output  PSNR {psnr(out, clean):6.2f}  SSIM {ssim(np.clip(out, 0, 1), clean):.3f}")
