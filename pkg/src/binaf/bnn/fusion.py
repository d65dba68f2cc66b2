"""Fold ``sign(AF(x))`` into threshold comparisons on ``x``.

A :class:`ThresholdSet` stores sorted thresholds ``t_1 < ... < t_k`` and the
sign on the far left; the output flips every time ``x`` reaches a threshold.
A monotone increasing function gives ``(tau,)`` with left sign -1, i.e.
``+1 iff x >= tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUND = 64.0
N_DERIV_SAMPLES = 10_001
DERIV_TOL = 1e-12
PERIODIC_GRID = 1 << 17


@dataclass(frozen=True)
class ThresholdSet:
    status: str  # increasing | decreasing | piecewise | constant | unfusable
    thresholds: tuple = ()
    left_sign: int = 1
    residual: float = 0.0
    reason: str = ""
    bound: float = BOUND
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def fusable(self) -> bool:
        return self.status != "unfusable"

    def apply(self, x) -> np.ndarray:
        """+1/-1 per element; mirrors ``sign(AF(x))`` with sign(0) = +1."""
        if not self.fusable:
            raise ValueError(f"function is not fusable: {self.reason}")
        x = np.asarray(x, dtype=np.float64)
        flips = np.searchsorted(np.asarray(self.thresholds, dtype=np.float64), x, side="right")
        return np.where(flips % 2 == 0, self.left_sign, -self.left_sign).astype(np.float32)

    @property
    def tau(self) -> float:
        """The single threshold of a monotone result (+-inf when the sign is constant)."""
        if self.status in ("increasing", "decreasing"):
            return self.thresholds[0]
        if self.status == "constant":
            return -np.inf if self.left_sign > 0 else np.inf
        raise ValueError(f"{self.status} result has no single threshold")

    def describe(self) -> str:
        if self.status == "increasing":
            return f"+1 iff x >= {self.thresholds[0]:.12g}"
        if self.status == "decreasing":
            return f"+1 iff x < {self.thresholds[0]:.12g}"
        if self.status == "constant":
            return f"constant {self.left_sign:+d} on [-{self.bound:g}, {self.bound:g}]"
        if self.status == "piecewise":
            return f"{len(self.thresholds)} thresholds, left sign {self.left_sign:+d}"
        return f"unfusable: {self.reason}"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "thresholds": [float(t) for t in self.thresholds],
            "left_sign": int(self.left_sign),
            "residual": float(self.residual),
            "reason": self.reason,
        }


def _pos(v):
    return v >= 0


def refine_crossing(f, lo, hi):
    """Bisect a sign change down to adjacent floats; returns the point on ``hi``'s side."""
    lo, hi = float(lo), float(hi)
    s_lo = _pos(f(np.array([lo]))[0])
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _pos(f(np.array([mid]))[0]) == s_lo:
            lo = mid
        else:
            hi = mid
    return hi


def _crossings(f, grid):
    vals = _pos(f(grid))
    change = np.flatnonzero(vals[1:] != vals[:-1])
    return [refine_crossing(f, grid[i], grid[i + 1]) for i in change], (1 if vals[0] else -1)


def _result(status, f, thresholds, left_sign, bound, reason=""):
    res = max((abs(float(f(np.array([t]))[0])) for t in thresholds), default=0.0)
    return ThresholdSet(status, tuple(float(t) for t in thresholds), int(left_sign), res, reason, bound)


def fuse_sign_threshold(af, channel: int = 0, bound: float = BOUND, piecewise_fallback: bool = False) -> ThresholdSet:
    """Thresholds reproducing ``sign(af(x))`` for one channel on ``[-bound, bound]``.

    ``af`` may be None (plain sign). Periodic expressions (all input paths
    through sin/cos) get piecewise thresholds; others must be monotone by the
    derivative sampler or are reported unfusable, unless ``piecewise_fallback``
    asks for grid-located crossings instead.
    """
    if af is None:
        return ThresholdSet("increasing", (0.0,), -1, 0.0, "", bound)
    f = af.scalar(channel)
    if af.is_periodic():
        grid = np.linspace(-bound, bound, PERIODIC_GRID)
        ts, left = _crossings(f, grid)
        status = "piecewise" if ts else "constant"
        return _result(status, f, ts, left, bound)

    xs = np.linspace(-bound, bound, N_DERIV_SAMPLES)
    with np.errstate(all="ignore"):
        d = af.scalar_derivative(channel)(xs)
    if not np.all(np.isfinite(d)):
        return ThresholdSet("unfusable", (), 1, 0.0, "derivative not finite on the sample grid", bound)
    if np.all(d >= -DERIV_TOL):
        direction = "increasing"
    elif np.all(d <= DERIV_TOL):
        direction = "decreasing"
    elif piecewise_fallback:
        return _piecewise_checked(af, f, bound)
    else:
        return ThresholdSet("unfusable", (), 1, 0.0, "not monotone on the sample grid", bound)

    ends = f(np.array([-bound, bound]))
    lo_pos, hi_pos = _pos(ends[0]), _pos(ends[1])
    if lo_pos == hi_pos:
        return _result("constant", f, (), 1 if lo_pos else -1, bound)
    tau = refine_crossing(f, -bound, bound)
    result = _result(direction, f, (tau,), 1 if lo_pos else -1, bound)
    # the sampler can miss narrow bumps; confirm on the grid before trusting it
    with np.errstate(all="ignore"):
        agree = result.apply(xs) == np.where(_pos(f(xs)), 1, -1)
    if not agree.all():
        return ThresholdSet("unfusable", (), 1, 0.0, "threshold disagrees with the function on the grid", bound)
    return result


def _piecewise_checked(af, f, bound):
    grid = np.linspace(-bound, bound, PERIODIC_GRID)
    with np.errstate(all="ignore"):
        ts, left = _crossings(f, grid)
    result = _result("piecewise" if ts else "constant", f, ts, left, bound)
    if not np.isfinite(result.residual) or result.residual > 1e-6:
        # a sign change without a root: a pole or a jump, not a threshold
        return ThresholdSet("unfusable", (), 1, 0.0, "sign change at a discontinuity", bound)
    return result


def compose_batchnorm(ts: ThresholdSet, gamma, beta, mean, var, eps=1e-5) -> ThresholdSet:
    """Move thresholds on a batchnorm output back onto the batchnorm input."""
    if not ts.fusable:
        return ts
    scale = float(gamma) / float(np.sqrt(var + eps))
    if scale == 0.0:
        s = ts.apply(np.array([float(beta)]))[0]
        return ThresholdSet("constant", (), int(s), 0.0, "zero batchnorm scale", ts.bound)
    mapped = [(t - float(beta)) / scale + float(mean) for t in ts.thresholds]
    left = ts.left_sign
    if scale < 0:
        mapped = mapped[::-1]
        left = ts.left_sign * (-1) ** len(ts.thresholds)
    return ThresholdSet(ts.status, tuple(mapped), int(left), ts.residual, ts.reason, ts.bound)


def verify_fusion(af, ts: ThresholdSet, channel=0, n=100_000, tol=1e-9, seed=0, bound=None):
    """Compare thresholds with ``sign(af(x))`` at ``n`` uniform samples.

    Returns ``(ok, n_disagree_far)``: disagreements within ``tol`` of a
    threshold are tolerated.
    """
    bound = ts.bound if bound is None else bound
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-bound, bound, n)
    if af is None:
        ref = np.where(xs >= 0, 1, -1)
    else:
        with np.errstate(all="ignore"):
            ref = np.where(af.scalar(channel)(xs) >= 0, 1, -1)
    got = ts.apply(xs)
    bad = got != ref
    if ts.thresholds:
        t = np.asarray(ts.thresholds)
        near = np.min(np.abs(xs[:, None] - t[None, :]), axis=1) <= tol if bad.any() else bad
        far = bad & ~near
    else:
        far = bad
    return (not far.any()), int(far.sum())
