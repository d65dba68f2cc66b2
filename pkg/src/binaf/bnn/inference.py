"""Inference with fused thresholds and xnor/popcount binary layers."""

from __future__ import annotations

import numpy as np

from .bitpack import pack_bits, packed_matmul
from .binarize import sign_forward
from .fusion import fuse_sign_threshold
from .model import TinyBinNet


class UnfusableError(ValueError):
    pass


def _bn_eval(bn, h):
    shp = [1] * h.ndim
    shp[1] = h.shape[1]
    inv = 1.0 / np.sqrt(bn.running_var.astype(np.float64) + bn.eps)
    return (bn.params["gamma"].reshape(shp) * (h - bn.running_mean.reshape(shp)) * inv.reshape(shp)
            + bn.params["beta"].reshape(shp))


class PackedBinaryNet:
    """Bit-level twin of a trained dense :class:`TinyBinNet`.

    Each binary block's ``AF -> clip -> sign`` becomes one threshold set per
    channel and its dense product becomes xnor/popcount on packed words.
    """

    def __init__(self, model: TinyBinNet, piecewise_fallback: bool = False):
        if model.spec.arch != "dense":
            raise ValueError("packed inference supports the dense architecture only")
        self.model = model
        self.blocks = []
        for i, b in enumerate(model.blocks):
            layer = b.binary
            af = layer.af
            sets = []
            for c in range(model.spec.width):
                ts = fuse_sign_threshold(af, c, piecewise_fallback=piecewise_fallback)
                if not ts.fusable:
                    raise UnfusableError(f"block {i} channel {c}: {ts.reason}")
                sets.append(ts)
            w_packed = pack_bits(sign_forward(layer.params["W"]))
            self.blocks.append((sets, w_packed, b))

    def binarize(self, sets, h):
        return np.stack([ts.apply(h[:, c]) for c, ts in enumerate(sets)], axis=1)

    def predict_logits(self, x):
        m = self.model
        h = np.asarray(x, dtype=np.float32)
        for layer in m.stem:
            h = layer.forward(h, train=False)
        n = m.spec.width
        for sets, w_packed, b in self.blocks:
            s = self.binarize(sets, h)
            acc = packed_matmul(pack_bits(s), w_packed, n).astype(np.float32)
            out = _bn_eval(b.bn, acc).astype(np.float32)
            h = out + h if b.shortcut else out
        return m.head.forward(h, train=False)

    def predict(self, x):
        return self.predict_logits(x).argmax(axis=1)
