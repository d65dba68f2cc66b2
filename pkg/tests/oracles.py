"""Independent reference computations shared by the test modules.

Nothing here imports the evaluation paths it is used to check, apart from the
function under test passed in as a callable.
"""

import math

import numpy as np

FD_STEP = 1e-5


def central_difference(f, x, h=FD_STEP):
    """Elementwise derivative of an elementwise float64 function."""
    x = np.asarray(x, dtype=np.float64)
    return (f(x + h) - f(x - h)) / (2 * h)


def grad_close(analytic, numeric, rel=1e-4, abs_small=1e-6, small=1e-2):
    """Relative check, switching to an absolute one for tiny gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    ok = np.where(scale < small, err < abs_small, err < rel * scale)
    return bool(ok.all()), float(np.max(np.where(scale < small, err, err / np.maximum(scale, 1e-300))))


def numeric_gradient(loss, arr, h=1e-5):
    """Central-difference gradient of scalar ``loss()`` w.r.t. every entry of ``arr`` (in place)."""
    grad = np.zeros(arr.shape, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        up = loss()
        arr[idx] = old - h
        down = loss()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


_erf = np.vectorize(math.erf)

# Catalog formulas written out directly; ``a``/``b`` are the per-channel parameters.
CATALOG_FORMULAS = {
    "AF1": lambda x, a, b: np.sin(x) - np.cos(x),
    "AF2": lambda x, a, b: np.sin(x) + np.cos(x),
    "AF3": lambda x, a, b: np.maximum(x, 0) + np.sin(x),
    "AF4": lambda x, a, b: b * np.cos(x) + (1 - b) * x,
    "AF5": lambda x, a, b: np.minimum(x, 0) + np.sin(x),
    "AF6": lambda x, a, b: b * _erf(x) + (1 - b) * np.maximum(x, 0),
    "AF7": lambda x, a, b: np.exp(-x ** 2) - np.sin(x),
    "AF8": lambda x, a, b: np.cos(x) + np.arctan(x),
    "AF9": lambda x, a, b: b * np.cos(x) + (1 - b) * np.arctan(x),
    "AF10": lambda x, a, b: np.cos(x) - np.arctan(x),
    "AF11": lambda x, a, b: np.cos(np.arctan(x) / 2) + x,
    "AF12": lambda x, a, b: b * np.cos(x + a) + (1 - b) * x,
    "AF13": lambda x, a, b: np.cos(np.arctan(x)) + x,
    "AF14": lambda x, a, b: np.cos(_erf(x)) - x,
    "AF15": lambda x, a, b: np.cos(-x) + x,
}


def bisect_root(f, lo, hi, tol=1e-13):
    """Plain bisection on a bracketing interval."""
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def naive_conv2d(x, w, stride=1, padding=0):
    """Direct six-loop cross-correlation, NCHW input, OIHW weights."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wd] = x
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for b in range(n):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ic in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += xp[b, ic, i * stride + di, j * stride + dj] * w[oc, ic, di, dj]
                    out[b, oc, i, j] = acc
    return out
