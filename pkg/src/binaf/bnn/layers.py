"""Layers with hand-written forward/backward passes (channel axis 1)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .binarize import clip, sign_forward, ste_backward


class DegenerateBatchError(ValueError):
    pass


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)


def _kaiming_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Dense(Layer):
    """Full-precision affine layer, weights (out, in)."""

    def __init__(self, n_in, n_out, rng, bias=True):
        super().__init__()
        self.params["W"] = _kaiming_uniform(rng, (n_out, n_in), n_in)
        if bias:
            self.params["b"] = np.zeros(n_out, dtype=np.float32)
        self.zero_grad()

    def forward(self, x, train=True):
        self._x = x
        out = x @ self.params["W"].T
        if "b" in self.params:
            out = out + self.params["b"]
        return out

    def backward(self, g):
        self.grads["W"] += g.T @ self._x
        if "b" in self.params:
            self.grads["b"] += g.sum(axis=0)
        return g @ self.params["W"]


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x, w, stride=1, padding=0):
    """Cross-correlation of NCHW ``x`` with OIHW ``w``."""
    n, c, h, wd = x.shape
    o, c2, kh, kw = w.shape
    if c != c2:
        raise ValueError(f"input has {c} channels, kernel expects {c2}")
    xp = _pad(x, padding)
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ValueError(f"kernel {kh}x{kw} does not fit padded input {xp.shape[2:]}")
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.einsum("nchwij,ocij->nohw", win, w, optimize=True)


def conv2d_backward(x_shape, x, w, g, stride=1, padding=0):
    """Gradients of :func:`conv2d` w.r.t. input and weights."""
    _, _, h, wd = x_shape
    o, c, kh, kw = w.shape
    xp = _pad(x, padding)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    gw = np.einsum("nchwij,nohw->ocij", win, g, optimize=True)
    gxp = np.zeros(xp.shape, dtype=g.dtype)
    oh, ow = g.shape[2], g.shape[3]
    for i in range(kh):
        for j in range(kw):
            contrib = np.einsum("nohw,oc->nchw", g, w[:, :, i, j], optimize=True)
            gxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += contrib
    gx = gxp[:, :, padding:padding + h, padding:padding + wd] if padding else gxp
    return gx, gw


class Conv2d(Layer):
    """Full-precision convolution (no bias; a batchnorm follows)."""

    def __init__(self, c_in, c_out, k, rng, stride=1, padding=0):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.params["W"] = _kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k)
        self.zero_grad()

    def forward(self, x, train=True):
        self._x = x
        return conv2d(x, self.params["W"], self.stride, self.padding)

    def backward(self, g):
        gx, gw = conv2d_backward(self._x.shape, self._x, self.params["W"], g, self.stride, self.padding)
        self.grads["W"] += gw
        return gx


class BinaryLayer(Layer):
    """Binary dense or conv layer.

    The forward path is ``AF -> clip -> sign`` on the input and ``sign`` on the
    latent weights, followed by the dense product or convolution. Latent
    weights stay real; gradients reach them through the straight-through
    estimator. With ``relaxed=True`` both signs are replaced by ``clip`` so the
    network becomes differentiable (used by gradient checks).
    """

    def __init__(self, kind, c_in, c_out, rng, af=None, t_clip=1.0, k=3, stride=1, padding=1):
        super().__init__()
        if t_clip <= 0:
            raise ValueError(f"t_clip must be positive, got {t_clip}")
        if kind not in ("dense", "conv2d"):
            raise ValueError(f"unknown binary layer kind {kind!r}")
        self.kind = kind
        self.t_clip = float(t_clip)
        self.af = af
        self.relaxed = False
        self.stride, self.padding = stride, padding
        if kind == "dense":
            self.params["W"] = _kaiming_uniform(rng, (c_out, c_in), c_in)
        else:
            self.params["W"] = _kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k)
        self.zero_grad()

    def binarize_input(self, x):
        z, tape = (x, None) if self.af is None else self.af.forward(x, channel_axis=1)
        z = np.asarray(z, dtype=x.dtype)
        s = clip(z, self.t_clip) if self.relaxed else sign_forward(clip(z, self.t_clip))
        return z, tape, s

    def binary_weights(self):
        w = self.params["W"]
        return clip(w, self.t_clip) if self.relaxed else sign_forward(w)

    def forward(self, x, train=True):
        z, tape, s = self.binarize_input(x)
        wb = self.binary_weights()
        self._cache = (x, z, tape, s, wb)
        if self.kind == "dense":
            if s.ndim != 2 or s.shape[1] != wb.shape[1]:
                raise ValueError(f"input {s.shape} does not match weights {wb.shape}")
            return s @ wb.T
        return conv2d(s, wb, self.stride, self.padding)

    def backward(self, g):
        x, z, tape, s, wb = self._cache
        w = self.params["W"]
        if self.kind == "dense":
            gs = g @ wb
            gwb = g.T @ s
        else:
            gs, gwb = conv2d_backward(s.shape, s, wb, g, self.stride, self.padding)
        self.grads["W"] += ste_backward(w, gwb.astype(w.dtype), self.t_clip)
        gz = ste_backward(z, gs.astype(x.dtype), self.t_clip)
        if self.af is None:
            return gz
        gx, gp = self.af.backward(tape, gz)
        for k, v in gp.items():
            self.af_grads[k] += v
        return gx

    @property
    def af_params(self):
        return {} if self.af is None else self.af.params

    def zero_grad(self):
        super().zero_grad()
        self.af_grads = {k: np.zeros_like(v) for k, v in self.af_params.items()}


def binary_dense_forward(x, layer: BinaryLayer):
    return layer.forward(np.asarray(x, dtype=np.float32), train=False)


def binary_conv2d_forward(x, layer: BinaryLayer):
    return layer.forward(np.asarray(x, dtype=np.float32), train=False)


class BatchNorm(Layer):
    """Per-channel batch normalization over every axis but axis 1."""

    def __init__(self, channels, momentum=0.9, eps=1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=np.float32)
        self.params["beta"] = np.zeros(channels, dtype=np.float32)
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)
        self.zero_grad()

    def _shape(self, x):
        s = [1] * x.ndim
        s[1] = x.shape[1]
        return s

    def forward(self, x, train=True):
        axes = tuple(i for i in range(x.ndim) if i != 1)
        shp = self._shape(x)
        if train:
            if x.shape[0] < 2:
                raise DegenerateBatchError(f"batchnorm needs a batch of at least 2 in train mode, got {x.shape[0]}")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1 - m) * mean).astype(np.float32)
            self.running_var = (m * self.running_var + (1 - m) * var).astype(np.float32)
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shp)) * inv.reshape(shp)
        self._cache = (xhat, inv, axes, shp, train)
        return self.params["gamma"].reshape(shp) * xhat + self.params["beta"].reshape(shp)

    def backward(self, g):
        xhat, inv, axes, shp, train = self._cache
        self.grads["gamma"] += (g * xhat).sum(axis=axes)
        self.grads["beta"] += g.sum(axis=axes)
        gx_hat = g * self.params["gamma"].reshape(shp)
        if not train:
            return gx_hat * inv.reshape(shp)
        mean_g = gx_hat.mean(axis=axes).reshape(shp)
        mean_gx = (gx_hat * xhat).mean(axis=axes).reshape(shp)
        return (gx_hat - mean_g - xhat * mean_gx) * inv.reshape(shp)


class GlobalAvgPool(Layer):
    def forward(self, x, train=True):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, g):
        n, c, h, w = self._shape
        return np.broadcast_to(g[:, :, None, None] / (h * w), self._shape).copy()


class Flatten(Layer):
    def forward(self, x, train=True):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)
