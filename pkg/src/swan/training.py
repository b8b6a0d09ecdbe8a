"""Training loop: Adam with cosine-annealed learning rate, global-norm
gradient clipping, per-epoch validation metrics, JSONL logging, and a
versioned binary checkpoint format with atomic writes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import asdict

import numpy as np

from . import tensor as T
from .data import Sample, preprocess
from .layers import Module
from .metrics import report
from .network import ModelConfig, Swan, TrainConfig, build_swan, deep_supervision_loss
from .tensor import Tensor


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def cosine_lr(epoch: int, epochs: int, lr0: float, lr_min: float) -> float:
    """lr0 at epoch 0, lr_min exactly at the final epoch."""
    if epochs <= 1:
        return lr0
    frac = epoch / (epochs - 1)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * frac))


def clip_grad_norm(params, max_norm: float) -> float:
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


# -- checkpoints ------------------------------------------------------------

MAGIC = b"SWAN"
FORMAT_VERSION = 1


def config_digest(cfg: ModelConfig) -> bytes:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).digest()


def _named_state(model: Module):
    """Parameters plus persistent buffers (BN running stats), sorted by name."""
    entries = dict(model.named_parameters())
    entries.update(model.state_arrays())
    return sorted(entries.items())


def save_checkpoint(model: Swan, path):
    items = _named_state(model)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(config_digest(model.cfg))
        fh.write(struct.pack("<I", len(items)))
        for name, t in items:
            arr = (t.data if isinstance(t, Tensor) else t).astype("<f4")
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)) + nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
    os.replace(tmp, path)


def load_checkpoint(model: Swan, path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", buf[4:8])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    digest = buf[8:40]
    if digest != config_digest(model.cfg):
        raise ValueError("checkpoint was written for a different model config")
    (count,) = struct.unpack("<I", buf[40:44])
    pos = 44
    loaded = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", buf[pos:pos + 2]); pos += 2
        name = buf[pos:pos + nlen].decode(); pos += nlen
        (rank,) = struct.unpack("<B", buf[pos:pos + 1]); pos += 1
        shape = struct.unpack(f"<{rank}I", buf[pos:pos + 4 * rank]); pos += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(buf[pos:pos + 4 * n], dtype="<f4").reshape(shape)
        pos += 4 * n
        loaded[name] = arr
    for name, t in _named_state(model):
        if name not in loaded:
            raise ValueError(f"checkpoint missing tensor {name!r}")
        if isinstance(t, Tensor):
            t.data[...] = loaded[name].astype(t.data.dtype)
        else:
            t[...] = loaded[name].astype(t.dtype)
    return model


# -- training ---------------------------------------------------------------


def _to_batch(samples, dtype=np.float32):
    x = np.stack([s.image for s in samples])[:, None].astype(dtype)
    y = np.stack([s.mask for s in samples])[:, None].astype(dtype)
    return Tensor(x), Tensor(y)


def evaluate(model: Swan, samples, threshold: float = 0.5,
             batch: int = 16) -> dict:
    model.eval()
    prepped = [preprocess(s, train_mode=False) for s in samples]
    # batch same-sized images together; eval-mode outputs are per-sample
    # independent, so grouping only changes speed, not results
    groups: dict[tuple, list] = {}
    for ev in prepped:
        groups.setdefault(ev.image.shape, []).append(ev)
    pairs = []
    with T.no_grad():
        for evs in groups.values():
            for lo in range(0, len(evs), batch):
                chunk = evs[lo:lo + batch]
                x, _ = _to_batch(chunk)
                probs = model(x).fused.data[:, 0]
                pairs.extend(zip(probs, (ev.mask for ev in chunk)))
    r = report(pairs, threshold=threshold)
    return {"miou": r.miou, "niou": r.niou, "pd": r.pd, "fa": r.fa, "f1": r.f1}


def train_step(model: Swan, batch, opt: Adam, grad_clip: float) -> float:
    x, y = batch
    model.train()
    opt.zero_grad()
    loss = deep_supervision_loss(model(x), y)
    val = loss.item()
    if not math.isfinite(val):
        raise FloatingPointError(f"non-finite loss {val} at step {opt.t + 1}")
    T.backprop(loss)
    clip_grad_norm(opt.params, grad_clip)
    opt.step()
    return val


def train(model: Swan, train_set, val_set, tcfg: TrainConfig,
          out_dir=None, log_path=None, stop_miou=None, stop_pd=None):
    """Train; returns the per-epoch log as a list of dicts.

    Stops early once both stop_miou and stop_pd (when given) are met on
    the validation split. Writes checkpoint.bin and train_log.jsonl under
    out_dir when provided.
    """
    tcfg.validate()
    if not train_set:
        raise ValueError("empty training set")
    params = [p for _, p in model.named_parameters()]
    opt = Adam(params, lr=tcfg.lr0, weight_decay=tcfg.weight_decay)
    rng = np.random.default_rng(tcfg.seed)
    log = []
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_path = log_path or os.path.join(out_dir, "train_log.jsonl")
    log_fh = open(log_path, "w") if log_path else None
    try:
        for epoch in range(tcfg.epochs):
            opt.lr = cosine_lr(epoch, tcfg.epochs, tcfg.lr0, tcfg.lr_min)
            order = rng.permutation(len(train_set))
            losses = []
            for lo in range(0, len(order), tcfg.batch):
                idx = order[lo:lo + tcfg.batch]
                batch = [preprocess(train_set[i], train_mode=True,
                                    crop=tcfg.crop, rng=rng) for i in idx]
                losses.append(train_step(model, _to_batch(batch), opt, tcfg.grad_clip))
            entry = {"epoch": epoch, "loss": float(np.mean(losses)), "lr": opt.lr}
            if val_set:
                entry.update(evaluate(model, val_set, threshold=tcfg.threshold))
            log.append(entry)
            if log_fh:
                log_fh.write(json.dumps(entry) + "\n")
                log_fh.flush()
            hit_miou = stop_miou is None or (entry.get("miou") or 0.0) >= stop_miou
            hit_pd = stop_pd is None or (entry.get("pd") or 0.0) >= stop_pd
            if (stop_miou is not None or stop_pd is not None) and hit_miou and hit_pd:
                break
    finally:
        if log_fh:
            log_fh.close()
    if out_dir:
        save_checkpoint(model, os.path.join(out_dir, "checkpoint.bin"))
    return log
