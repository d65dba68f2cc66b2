"""Elementwise unary and binary operators with analytic derivatives.

Operator indices follow the listing order of the candidate tables: 22 unary
operators (0..21) and 11 binary operators (0..10). Every operator is total:
singular points of ``log|x|``, ``x/y`` and ``x/(x+y)`` are guarded so that
evaluation never raises. ``tan`` is left unguarded on purpose; its blow-ups
surface as non-finite values and are handled by the fitness layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

EPS_LOG = 1e-12
EPS_DEN = 1e-8
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class OpInfo:
    index: int
    name: str
    arity: int
    n_params: int
    template: str  # rendering template, ``{x}``/``{y}``/``{p}`` placeholders


UNARY_OPS: tuple[OpInfo, ...] = tuple(
    OpInfo(i, name, 1, n, tpl)
    for i, (name, n, tpl) in enumerate(
        [
            ("identity", 0, "{x}"),
            ("abs", 0, "|{x}|"),
            ("neg", 0, "-{x}"),
            ("zero", 0, "0"),
            ("square", 0, "{x}^2"),
            ("cube", 0, "{x}^3"),
            ("sign_sqrt", 0, "sign({x})*sqrt(|{x}|)"),
            ("log_abs", 0, "log(|{x}|)"),
            ("sigmoid", 0, "sigmoid({x})"),
            ("exp_neg_abs", 0, "exp(-|{x}|)"),
            ("exp_neg_square", 0, "exp(-{x}^2)"),
            ("sin", 0, "sin({x})"),
            ("cos", 0, "cos({x})"),
            ("tan", 0, "tan({x})"),
            ("atan", 0, "atan({x})"),
            ("erf", 0, "erf({x})"),
            ("erfc", 0, "erfc({x})"),
            ("relu", 0, "max({x}, 0)"),
            ("neg_relu", 0, "min({x}, 0)"),
            ("const", 1, "a"),
            ("scale", 1, "a*{x}"),
            ("shift", 1, "a + {x}"),
        ]
    )
)

BINARY_OPS: tuple[OpInfo, ...] = tuple(
    OpInfo(i, name, 2, n, tpl)
    for i, (name, n, tpl) in enumerate(
        [
            ("add", 0, "{x} + {y}"),
            ("sub", 0, "{x} - {y}"),
            ("mul", 0, "{x}*{y}"),
            ("div", 0, "{x}/{y}"),
            ("ratio", 0, "{x}/({x} + {y})"),
            ("max", 0, "max({x}, {y})"),
            ("min", 0, "min({x}, {y})"),
            ("sig_gate", 0, "{x}/(1 + exp(-{y}))"),
            ("exp_neg_absdiff", 0, "exp(-|{x} - {y}|)"),
            ("exp_neg_sqdiff", 0, "exp(-({x} - {y})^2)"),
            ("lerp", 1, "b*{x} + (1 - b)*{y}"),
        ]
    )
)

N_UNARY = len(UNARY_OPS)
N_BINARY = len(BINARY_OPS)

# default initial value of the learnable parameter, per operator
UNARY_PARAM_INIT = {19: 0.0, 20: 1.0, 21: 0.0}
BINARY_PARAM_INIT = {10: 0.5}

ZERO_OP = 3
COMMUTATIVE_BINARY = frozenset({0, 2, 5, 6, 8, 9})


def _sign_pos(x):
    # sign with sign(0) = +1
    return np.where(x >= 0, 1.0, -1.0).astype(x.dtype, copy=False)


def _clamp_den(d):
    """Clamp |d| to at least EPS_DEN, keeping the sign (0 maps to +EPS_DEN)."""
    eps = np.asarray(EPS_DEN, dtype=d.dtype)
    return np.where(np.abs(d) < eps, _sign_pos(d) * eps, d)


def _check_unary_params(op, p):
    needs = UNARY_OPS[op].n_params > 0
    if needs and p is None:
        raise ValueError(f"unary op {op} ({UNARY_OPS[op].name}) needs a parameter")
    if not needs and p is not None:
        raise ValueError(f"unary op {op} ({UNARY_OPS[op].name}) takes no parameter")


def _check_binary_params(op, p):
    needs = BINARY_OPS[op].n_params > 0
    if needs and p is None:
        raise ValueError(f"binary op {op} ({BINARY_OPS[op].name}) needs a parameter")
    if not needs and p is not None:
        raise ValueError(f"binary op {op} ({BINARY_OPS[op].name}) takes no parameter")


def unary_forward(op: int, x: np.ndarray, p=None) -> np.ndarray:
    """Apply unary operator ``op`` elementwise.

    ``p`` is the (already broadcast) parameter for ops 19-21 and must be
    ``None`` otherwise.
    """
    if not 0 <= op < N_UNARY:
        raise ValueError(f"unary op index {op} out of range [0, {N_UNARY - 1}]")
    _check_unary_params(op, p)
    x = np.asarray(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if op == 0:
            return x.copy()
        if op == 1:
            return np.abs(x)
        if op == 2:
            return -x
        if op == 3:
            return np.zeros_like(x)
        if op == 4:
            return x * x
        if op == 5:
            return x * x * x
        if op == 6:
            return np.sign(x) * np.sqrt(np.abs(x))
        if op == 7:
            return np.log(np.maximum(np.abs(x), np.asarray(EPS_LOG, x.dtype)))
        if op == 8:
            return special.expit(x)
        if op == 9:
            return np.exp(-np.abs(x))
        if op == 10:
            return np.exp(-x * x)
        if op == 11:
            return np.sin(x)
        if op == 12:
            return np.cos(x)
        if op == 13:
            return np.tan(x)
        if op == 14:
            return np.arctan(x)
        if op == 15:
            return special.erf(x)
        if op == 16:
            return special.erfc(x)
        if op == 17:
            return np.maximum(x, 0)
        if op == 18:
            return np.minimum(x, 0)
        if op == 19:
            return np.broadcast_to(p, x.shape).astype(x.dtype)
        if op == 20:
            return (p * x).astype(x.dtype, copy=False)
        return (p + x).astype(x.dtype, copy=False)


def unary_backward(op: int, x: np.ndarray, g: np.ndarray, p=None):
    """Return ``(grad_x, grad_p)`` for unary op ``op`` given upstream ``g``.

    ``grad_p`` is elementwise (not yet reduced to channels) and ``None`` for
    parameter-free operators.
    """
    _check_unary_params(op, p)
    x = np.asarray(x)
    gp = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if op == 0:
            gx = g
        elif op == 1:
            gx = g * np.sign(x)
        elif op == 2:
            gx = -g
        elif op == 3:
            gx = np.zeros_like(g)
        elif op == 4:
            gx = g * 2 * x
        elif op == 5:
            gx = g * 3 * x * x
        elif op == 6:
            ax = np.maximum(np.abs(x), np.asarray(EPS_LOG, x.dtype))
            gx = g * 0.5 / np.sqrt(ax)
        elif op == 7:
            ax = np.abs(x)
            safe = np.where(ax >= EPS_LOG, x, 1)
            gx = np.where(ax >= EPS_LOG, g / safe, 0)
        elif op == 8:
            s = special.expit(x)
            gx = g * s * (1 - s)
        elif op == 9:
            gx = -g * np.sign(x) * np.exp(-np.abs(x))
        elif op == 10:
            gx = -2 * g * x * np.exp(-x * x)
        elif op == 11:
            gx = g * np.cos(x)
        elif op == 12:
            gx = -g * np.sin(x)
        elif op == 13:
            c = np.cos(x)
            gx = g / (c * c)
        elif op == 14:
            gx = g / (1 + x * x)
        elif op == 15:
            gx = g * _TWO_OVER_SQRT_PI * np.exp(-x * x)
        elif op == 16:
            gx = -g * _TWO_OVER_SQRT_PI * np.exp(-x * x)
        elif op == 17:
            gx = g * (x > 0)
        elif op == 18:
            gx = g * (x < 0)
        elif op == 19:
            gx = np.zeros_like(g)
            gp = g
        elif op == 20:
            gx = g * p
            gp = g * x
        else:
            gx = g
            gp = g
    return np.asarray(gx, dtype=x.dtype), gp


def binary_forward(op: int, x: np.ndarray, y: np.ndarray, p=None) -> np.ndarray:
    """Apply binary operator ``op`` elementwise; ``x`` and ``y`` must share a shape."""
    if not 0 <= op < N_BINARY:
        raise ValueError(f"binary op index {op} out of range [0, {N_BINARY - 1}]")
    _check_binary_params(op, p)
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"operand shapes differ: {x.shape} vs {y.shape}")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if op == 0:
            return x + y
        if op == 1:
            return x - y
        if op == 2:
            return x * y
        if op == 3:
            return x / _clamp_den(y)
        if op == 4:
            return x / _clamp_den(x + y)
        if op == 5:
            return np.maximum(x, y)
        if op == 6:
            return np.minimum(x, y)
        if op == 7:
            return x * special.expit(y)
        if op == 8:
            return np.exp(-np.abs(x - y))
        if op == 9:
            d = x - y
            return np.exp(-d * d)
        return (p * x + (1 - p) * y).astype(x.dtype, copy=False)


def binary_backward(op: int, x, y, g, p=None):
    """Return ``(grad_x, grad_y, grad_p)`` for binary op ``op``."""
    _check_binary_params(op, p)
    x = np.asarray(x)
    y = np.asarray(y)
    gp = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if op == 0:
            gx, gy = g, g
        elif op == 1:
            gx, gy = g, -g
        elif op == 2:
            gx, gy = g * y, g * x
        elif op == 3:
            d = _clamp_den(y)
            clamped = np.abs(y) < EPS_DEN
            gx = g / d
            gy = np.where(clamped, 0, -g * x / (d * d))
        elif op == 4:
            s = x + y
            d = _clamp_den(s)
            clamped = np.abs(s) < EPS_DEN
            gx = np.where(clamped, g / d, g * y / (d * d))
            gy = np.where(clamped, 0, -g * x / (d * d))
        elif op == 5:
            mask = x >= y
            gx, gy = g * mask, g * ~mask
        elif op == 6:
            mask = x <= y
            gx, gy = g * mask, g * ~mask
        elif op == 7:
            s = special.expit(y)
            gx = g * s
            gy = g * x * s * (1 - s)
        elif op == 8:
            d = x - y
            e = np.exp(-np.abs(d))
            gx = -g * np.sign(d) * e
            gy = -gx
        elif op == 9:
            d = x - y
            e = np.exp(-d * d)
            gx = -2 * g * d * e
            gy = -gx
        else:
            gx = g * p
            gy = g * (1 - p)
            gp = g * (x - y)
    return np.asarray(gx, dtype=x.dtype), np.asarray(gy, dtype=y.dtype), gp
