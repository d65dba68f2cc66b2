"""Sign binarization and its straight-through gradient."""

import numpy as np


def sign_forward(x):
    """+1 where ``x >= 0``, -1 elsewhere (so sign(0) = +1). NaN maps to -1."""
    x = np.asarray(x)
    dtype = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float32
    return np.where(x >= 0, 1, -1).astype(dtype)


def clip(x, t_clip=1.0):
    return np.clip(x, -t_clip, t_clip)


def ste_backward(x, grad_out, t_clip=1.0):
    """Pass ``grad_out`` through where ``|x| < t_clip``; zero elsewhere (strict)."""
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    if x.shape != grad_out.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs grad {grad_out.shape}")
    return np.where(np.abs(x) < t_clip, grad_out, 0).astype(grad_out.dtype, copy=False)
