"""Named-tensor archive.

Layout (all integers little-endian)::

    b"DNSW1"
    u32 entry count
    per entry: u32 name length, UTF-8 name, u32 rank, rank x u32 extents
    float32 payloads, in manifest order
    u64 checksum of the payload bytes (BLAKE2b, 8-byte digest)
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import fields
from pathlib import Path

import numpy as np

from .network import DnSwin, ModelConfig

MAGIC = b"DNSW1"


class CheckpointError(Exception):
    """Raised for unreadable, truncated or corrupted checkpoint files."""


def payload_checksum(payload):
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def encode(tensors):
    header = [MAGIC, struct.pack("<I", len(tensors))]
    chunks = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        header.append(struct.pack("<I", len(raw)))
        header.append(raw)
        header.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    payload = b"".join(chunks)
    return b"".join(header) + payload + struct.pack("<Q", payload_checksum(payload))


def decode(blob):
    """Parse archive bytes into an insertion-ordered ``{name: float32 array}``."""
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError("checkpoint truncated")
        out = blob[pos : pos + n]
        pos += n
        return out

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic; not a DNSW1 checkpoint")
    (count,) = struct.unpack("<I", take(4))
    manifest = []
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("corrupt entry name") from exc
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        manifest.append((name, shape))
    start = pos
    arrays = {}
    for name, shape in manifest:
        n = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(take(4 * n), dtype="<f4").astype(np.float32).reshape(shape)
    payload = blob[start:pos]
    (stored,) = struct.unpack("<Q", take(8))
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after checksum")
    if stored != payload_checksum(payload):
        raise CheckpointError("payload checksum mismatch")
    return arrays


def save_checkpoint(path, tensors):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(tensors))
    os.replace(tmp, path)


def load_checkpoint(path):
    return decode(Path(path).read_bytes())


def manifest(tensors):
    return [(name, tuple(arr.shape)) for name, arr in tensors.items()]


# ---------------------------------------------------------------------------
# model archives
# ---------------------------------------------------------------------------


def model_entries(model, extra=None):
    entries = {}
    for key, value in model.cfg.to_dict().items():
        entries[f"config.{key}"] = np.float32(value)
    for name, arr in model.state_dict().items():
        entries[f"model.{name}"] = arr
    if extra:
        entries.update(extra)
    return entries


def save_model(path, model, extra=None):
    save_checkpoint(path, model_entries(model, extra))


def config_from_entries(entries):
    kwargs = {}
    for f in fields(ModelConfig):
        key = f"config.{f.name}"
        if key not in entries:
            raise CheckpointError(f"checkpoint lacks {key}")
        # str() of a float32 is its shortest repr, so 0.2 comes back as 0.2
        v = float(str(np.float32(entries[key])))
        kwargs[f.name] = {"int": int, "bool": bool}.get(f.type, float)(v)
    return ModelConfig(**kwargs)


def load_model(path):
    """Rebuild a :class:`DnSwin` from an archive; returns ``(model, entries)``."""
    entries = load_checkpoint(path)
    cfg = config_from_entries(entries)
    model = DnSwin(cfg, seed=0)
    state = {k[len("model.") :]: v for k, v in entries.items() if k.startswith("model.")}
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(str(exc)) from exc
    return model, entries
