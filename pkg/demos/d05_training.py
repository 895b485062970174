"""
Training a small denoiser on synthetic images
=============================================

Eight hundred steps on one CPU core. Expect five to ten minutes.
"""

import numpy as np

from dnswin import DnSwin, ModelConfig, TrainConfig, psnr, train
from dnswin.cli import build_synthetic
from dnswin.config import DataConfig

train_pairs, val_pairs = build_synthetic(DataConfig(n_train=20, n_val=3, image_size=64), 0, 32)
print("noisy input PSNR:", round(float(np.mean([psnr(p.noisy, p.clean) for p in val_pairs])), 2))

model = DnSwin(ModelConfig(base_channels=8, window_size=4, lf_depth=1, hf_depth=1, train_patch=32), seed=0)

# Clean images go in; fresh Gaussian noise is drawn for every batch.
cfg = TrainConfig(steps=800, batch_size=8, noise_sigma=25.0, val_every=200, seed=0)
result = train(train_pairs, model, cfg, val=val_pairs)

for done, score in result.val_psnr.items():
    print(f"step {done:4d}  loss {np.mean(result.losses[done - 200:done]):.4f}  val PSNR {score:.2f}")
print("learning rate", f"{result.rates[0]:.1e}", "->", f"{result.rates[-1]:.1e}")
