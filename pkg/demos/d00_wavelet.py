"""
Haar subbands of a noisy image
==============================

"""

import numpy as np

from dnswin import haar_dwt, haar_idwt, synthesize_awgn
from dnswin.data import synthetic_image
from dnswin.tensor import Tensor

rng = np.random.default_rng(0)

# A 2x2 block splits into one average and three differences.
s = haar_dwt(Tensor([[[1.0, 2.0], [3.0, 4.0]]]))
print("ll lh hl hh:", s.ll.data.item(), s.lh.data.item(), s.hl.data.item(), s.hh.data.item())

# The forward transform is unnormalized, so the inverse divides by four.
# Integer images come back bit for bit.
x = rng.integers(0, 256, size=(3, 64, 64)).astype(np.float32)
print("exact round trip:", np.array_equal(haar_idwt(haar_dwt(Tensor(x))).data, x))

# Where does the energy of a noisy image go?
clean = synthetic_image(64, rng)
pair = synthesize_awgn(clean, 25.0, rng)
for name, img in (("clean", clean), ("noise", pair.noisy - clean)):
    bands = haar_dwt(Tensor(img))
    energy = {k: float((getattr(bands, k).data ** 2).sum()) for k in ("ll", "lh", "hl", "hh")}
    energy["ll"] = float(((bands.ll.data - bands.ll.data.mean()) ** 2).sum())
    total = sum(energy.values())
    print(name.ljust(6), " ".join(f"{k} {v / total:5.1%}" for k, v in energy.items()))

# Smooth content lives in ll while white noise spreads evenly over all four bands,
# so three quarters of it lands in the high-frequency subbands.
