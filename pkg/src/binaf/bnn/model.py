"""TinyBinNet: a desk-scale binary network with pluggable complementary functions.

Layout (full-precision first and last layer, binary blocks between)::

    stem (dense or 3x3 conv, full precision) -> batchnorm
    block x n_blocks: [AF -> clip -> sign] -> binary dense/conv -> batchnorm (+ shortcut)
    [global average pool] -> dense classifier (full precision)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import BatchNorm, BinaryLayer, Conv2d, Dense, Flatten, GlobalAvgPool
from .optim import Adam


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, ...]
    n_classes: int
    arch: str = "dense"
    width: int = 64
    n_blocks: int = 2
    shortcut: bool = True
    t_clip: float = 1.0
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        if self.arch not in ("dense", "conv"):
            raise ValueError(f"arch must be 'dense' or 'conv', got {self.arch!r}")
        if self.arch == "conv" and len(self.input_shape) != 3:
            raise ValueError(f"conv arch needs (C, H, W) inputs, got {self.input_shape}")
        if self.n_classes < 2 or self.width < 1 or self.n_blocks < 1:
            raise ValueError("need n_classes >= 2, width >= 1, n_blocks >= 1")
        if self.t_clip <= 0:
            raise ValueError("t_clip must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


@dataclass
class _Block:
    binary: BinaryLayer
    bn: BatchNorm
    shortcut: bool


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1
    return float(loss), grad / n


class TinyBinNet:
    def __init__(self, spec: ModelSpec, af=None, rng=None):
        """``af`` is a prototype complementary function (or None for plain sign);
        each block gets its own fresh copy sized to the block's channel count."""
        self.spec = spec
        rng = np.random.default_rng(rng)
        w = spec.width
        if spec.arch == "dense":
            n_in = int(np.prod(spec.input_shape))
            self.stem = [Flatten(), Dense(n_in, w, rng, bias=False), BatchNorm(w, spec.bn_momentum, spec.bn_eps)]
            kind = "dense"
        else:
            c_in = spec.input_shape[0]
            self.stem = [Conv2d(c_in, w, 3, rng, padding=1), BatchNorm(w, spec.bn_momentum, spec.bn_eps)]
            kind = "conv2d"
        self.blocks = []
        for _ in range(spec.n_blocks):
            block_af = None if af is None else af.with_channels(w)
            layer = BinaryLayer(kind, w, w, rng, af=block_af, t_clip=spec.t_clip)
            self.blocks.append(_Block(layer, BatchNorm(w, spec.bn_momentum, spec.bn_eps), spec.shortcut))
        self.pool = GlobalAvgPool() if spec.arch == "conv" else None
        self.head = Dense(w, spec.n_classes, rng)

    # -- parameters

    def named_parameters(self):
        """(name, array, grad) triples, including complementary-function parameters."""
        out = []
        for i, layer in enumerate(self.stem):
            for k, v in layer.params.items():
                out.append((f"stem{i}.{k}", v, layer.grads[k]))
        for i, b in enumerate(self.blocks):
            for k, v in b.binary.params.items():
                out.append((f"block{i}.bin.{k}", v, b.binary.grads[k]))
            for k, v in b.binary.af_params.items():
                out.append((f"block{i}.af.{k}", v, b.binary.af_grads[k]))
            for k, v in b.bn.params.items():
                out.append((f"block{i}.bn.{k}", v, b.bn.grads[k]))
        for k, v in self.head.params.items():
            out.append((f"head.{k}", v, self.head.grads[k]))
        return out

    def parameters(self) -> dict:
        return {n: v for n, v, _ in self.named_parameters()}

    def gradients(self) -> dict:
        return {n: g for n, _, g in self.named_parameters()}

    def buffers(self) -> dict:
        out = {}
        for name, bn in self._batchnorms():
            out[f"{name}.running_mean"] = bn.running_mean
            out[f"{name}.running_var"] = bn.running_var
        return out

    def _batchnorms(self):
        for i, layer in enumerate(self.stem):
            if isinstance(layer, BatchNorm):
                yield f"stem{i}", layer
        for i, b in enumerate(self.blocks):
            yield f"block{i}.bn", b.bn

    def zero_grad(self):
        for layer in self._layers():
            layer.zero_grad()

    def _layers(self):
        yield from self.stem
        for b in self.blocks:
            yield b.binary
            yield b.bn
        if self.pool is not None:
            yield self.pool
        yield self.head

    def set_relaxed(self, relaxed: bool):
        for b in self.blocks:
            b.binary.relaxed = relaxed

    def astype(self, dtype):
        for layer in self._layers():
            for k in list(layer.params):
                layer.params[k] = layer.params[k].astype(dtype)
        self.zero_grad()
        return self

    # -- passes

    def forward(self, x, train=True):
        h = x
        for layer in self.stem:
            h = layer.forward(h, train)
        for b in self.blocks:
            out = b.bn.forward(b.binary.forward(h, train), train)
            h = out + h if b.shortcut else out
        if self.pool is not None:
            h = self.pool.forward(h, train)
        return self.head.forward(h, train)

    def backward(self, g):
        g = self.head.backward(g)
        if self.pool is not None:
            g = self.pool.backward(g)
        for b in reversed(self.blocks):
            g_out = g
            g = b.binary.backward(b.bn.backward(g_out))
            if b.shortcut:
                g = g + g_out
        for layer in reversed(self.stem):
            g = layer.backward(g)
        return g

    def loss_and_grad(self, x, y, train=True):
        self.zero_grad()
        logits = self.forward(x, train)
        loss, g = softmax_cross_entropy(logits, y)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss}")
        self.backward(g.astype(logits.dtype))
        return loss, logits

    def predict_logits(self, x, batch_size=512):
        outs = [self.forward(x[i:i + batch_size], train=False) for i in range(0, len(x), batch_size)]
        return np.concatenate(outs) if outs else np.zeros((0, self.spec.n_classes), np.float32)

    def predict(self, x):
        return self.predict_logits(x).argmax(axis=1)

    def accuracy(self, x, y) -> float:
        if len(x) == 0:
            return 0.0
        return float((self.predict(x) == y).mean())


@dataclass
class EpochStats:
    loss: float
    train_accuracy: float
    batches: int = 0
    extra: dict = field(default_factory=dict)


def train_epoch(model: TinyBinNet, x, y, optimizer: Adam, batch_size: int, rng) -> EpochStats:
    """One shuffled pass; a trailing batch smaller than 2 is dropped (batchnorm needs 2)."""
    n = len(x)
    order = rng.permutation(n)
    total_loss, correct, seen, batches = 0.0, 0, 0, 0
    params = model.parameters()
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) < 2:
            continue
        loss, logits = model.loss_and_grad(x[idx], y[idx], train=True)
        grads = model.gradients()
        for g in grads.values():
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged("non-finite gradient")
        optimizer.step(params, grads)
        total_loss += loss * len(idx)
        correct += int((logits.argmax(axis=1) == y[idx]).sum())
        seen += len(idx)
        batches += 1
    if seen == 0:
        raise ValueError("no batch of size >= 2 in the training set")
    return EpochStats(total_loss / seen, correct / seen, batches)
