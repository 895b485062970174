"""
Saving and restoring a model
============================

"""

import tempfile
from pathlib import Path

from dnswin import DnSwin, ModelConfig, load_checkpoint, load_model, save_model
from dnswin.checkpoint import CheckpointError

model = DnSwin(ModelConfig(base_channels=8, window_size=4, lf_depth=1, hf_depth=1, train_patch=32), seed=0)

with tempfile.TemporaryDirectory() as tmp:
    first, second = Path(tmp) / "a.ckpt", Path(tmp) / "b.ckpt"
    save_model(first, model)
    print("file size:", first.stat().st_size, "bytes")

    entries = load_checkpoint(first)
    print("entries:", len(entries), "e.g.", sorted(entries)[:3])

    # The configuration travels with the weights, so a reload needs nothing else.
    restored, _ = load_model(first)
    save_model(second, restored)
    print("save -> load -> save identical:", first.read_bytes() == second.read_bytes())

    # Any damage is caught by the trailing checksum.
    blob = bytearray(first.read_bytes())
    blob[len(blob) // 2] ^= 1
    first.write_bytes(bytes(blob))
    try:
        load_checkpoint(first)
    except CheckpointError as err:
        print("corrupted file rejected:", err)
