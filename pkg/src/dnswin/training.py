"""Loss, optimiser, schedule, augmentation and the training loop."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import functional as F
from .checkpoint import load_checkpoint, save_model
from .data import synthesize_awgn
from .inference import denoise_tiled
from .metrics import psnr
from .tensor import Tensor


class NonFiniteLossError(FloatingPointError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step
        self.value = value


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def charbonnier_loss(pred, gt, eps=1e-3, reduction="mean"):
    """Charbonnier penalty.

    ``reduction="mean"``: mean over elements of sqrt(d^2 + eps^2).
    ``reduction="global"``: sqrt(||d||^2 + eps^2) over the whole residual.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and target {gt.shape} differ in shape")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    d = F.sub(pred, gt)
    sq = F.mul(d, d)
    if reduction == "mean":
        return F.mean(F.sqrt(F.add(sq, eps * eps)))
    if reduction == "global":
        return F.sqrt(F.add(F.sum(sq), eps * eps))
    raise ValueError(f"unknown reduction {reduction!r}")


def l1_loss(pred, gt):
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and target {gt.shape} differ in shape")
    return F.mean(F.abs(F.sub(pred, gt)))


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, rate):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError(f"parameter {i} {p.shape} has no gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data = p.data - float(rate) * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_entries(self, names):
        out = {"optim.step": np.float32(self.t)}
        for name, m, v in zip(names, self.m, self.v):
            out[f"optim.m.{name}"] = m
            out[f"optim.v.{name}"] = v
        return out

    def load_state_entries(self, entries, names):
        self.t = int(entries["optim.step"])
        for i, name in enumerate(names):
            self.m[i] = entries[f"optim.m.{name}"].astype(self.params[i].dtype, copy=True)
            self.v[i] = entries[f"optim.v.{name}"].astype(self.params[i].dtype, copy=True)


def adam_step(params, grads, state, rate):
    """Functional wrapper: copy ``grads`` onto ``params`` and step ``state`` (an :class:`Adam`)."""
    for p, g in zip(params, grads):
        if g is None:
            raise ValueError("missing gradient")
        p.grad = np.asarray(g, dtype=p.dtype)
    state.step(rate)


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = math.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params if p.grad is not None))
    if max_norm and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total


@dataclass
class Schedule:
    total: int
    initial: float = 2e-4
    floor: float = 1e-6


def cosine_rate(step, sched):
    """Cosine decay from ``sched.initial`` at step 0 to ``sched.floor`` at ``sched.total``."""
    if sched.total <= 0:
        return sched.initial
    if step >= sched.total:
        return sched.floor
    return sched.floor + (sched.initial - sched.floor) * (1.0 + math.cos(math.pi * step / sched.total)) / 2.0


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------


def dihedral(img, k):
    """Transform ``k`` in 0..7 of the square's symmetry group: k % 4 quarter turns, flipped if k >= 4."""
    out = np.rot90(img, k % 4, axes=(-2, -1))
    if k >= 4:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def augment(pair, rng):
    """Apply one uniformly drawn dihedral transform to both members of ``(noisy, clean)``."""
    noisy, clean = pair
    if noisy.shape[-1] != noisy.shape[-2]:
        raise ValueError(f"rotation augmentation needs square patches, got {noisy.shape}")
    k = int(rng.integers(0, 8))
    return dihedral(noisy, k), dihedral(clean, k)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 16
    lr: float = 2e-4
    lr_min: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    loss: str = "charbonnier"
    loss_global: bool = False
    charbonnier_eps: float = 1e-3
    augment: bool = True
    noise_sigma: float = 0.0
    val_every: int = 0
    checkpoint_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if self.loss not in ("charbonnier", "l1"):
            raise ValueError(f"loss must be 'charbonnier' or 'l1', got {self.loss!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    val_psnr: dict = field(default_factory=dict)
    checkpoint: Path | None = None


def compute_loss(pred, gt, cfg):
    if cfg.loss == "l1":
        return l1_loss(pred, gt)
    return charbonnier_loss(pred, gt, cfg.charbonnier_eps, "global" if cfg.loss_global else "mean")


def make_batch(dataset, patch, cfg, step):
    """Batch for ``step``: a pure function of (seed, step)."""
    rng = np.random.default_rng([cfg.seed, step])
    noisy, clean = [], []
    for _ in range(cfg.batch_size):
        pair = dataset[int(rng.integers(len(dataset)))]
        _, h, w = pair.shape
        i = int(rng.integers(0, h - patch + 1))
        j = int(rng.integers(0, w - patch + 1))
        sl = (slice(None), slice(i, i + patch), slice(j, j + patch))
        c = pair.clean[sl]
        n = synthesize_awgn(c, cfg.noise_sigma, rng).noisy if cfg.noise_sigma > 0 else pair.noisy[sl]
        if cfg.augment:
            n, c = augment((n, c), rng)
        noisy.append(n)
        clean.append(c)
    return np.stack(noisy).astype(np.float32), np.stack(clean).astype(np.float32)


def evaluate(model, pairs, overlap=16):
    """Mean PSNR of the model's output against the clean images."""
    scores = [psnr(denoise_tiled(model, p.noisy, overlap=overlap), p.clean) for p in pairs]
    return float(np.mean(scores))


def train(dataset, model, cfg, val=None, out_dir=None, resume=None, log=None):
    """Run ``cfg.steps`` optimisation steps; returns a :class:`TrainResult`.

    ``resume`` is a checkpoint written by a previous call with the same
    config; training continues from its stored step.  ``log`` receives one
    tab-separated line per step.
    """
    patch = model.cfg.train_patch
    for p in dataset:
        if min(p.shape[1:]) < patch:
            raise ValueError(f"training image {p.shape} smaller than patch {patch}")
    names = [n for n, _ in model.named_parameters()]
    params = model.parameters()
    opt = Adam(params, cfg.beta1, cfg.beta2, cfg.adam_eps)
    start = 0
    if resume is not None:
        entries = load_checkpoint(resume)
        model.load_state_dict({k[6:]: v for k, v in entries.items() if k.startswith("model.")})
        opt.load_state_entries(entries, names)
        start = opt.t
    sched = Schedule(cfg.steps, cfg.lr, cfg.lr_min)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    result = TrainResult()

    def checkpoint(path):
        save_model(path, model, opt.state_entries(names))
        return path

    for step in range(start, cfg.steps):
        rate = cosine_rate(step, sched)
        noisy, clean = make_batch(dataset, patch, cfg, step)
        model.zero_grad()
        loss = compute_loss(model(Tensor(noisy)), Tensor(clean), cfg)
        value = loss.item()
        if not math.isfinite(value):
            raise NonFiniteLossError(step, value)
        loss.backward()
        clip_grad_norm(params, cfg.clip_norm)
        opt.step(rate)
        result.losses.append(value)
        result.rates.append(rate)
        line = f"{step}\t{rate:.6e}\t{value:.6f}"
        done = step + 1
        if val and cfg.val_every and (done % cfg.val_every == 0 or done == cfg.steps):
            score = evaluate(model, val)
            result.val_psnr[done] = score
            line += f"\t{score:.4f}"
        if log is not None:
            log(line)
        if out_dir is not None and cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
            checkpoint(out_dir / f"step_{done:06d}.ckpt")
    if out_dir is not None:
        result.checkpoint = checkpoint(out_dir / "model.ckpt")
    return result
