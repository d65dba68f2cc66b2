"""Genome encoding and decoded activation-function expressions.

A genome is a fixed-length tuple of operator indices, unary genes first:

* Type-I  ``[U1, U2, B1]``:          ``Y = B1(U1(X), U2(X))``
* Type-II ``[U1, U2, U3, U4, B1, B2]``: ``Y = B2(U4(B1(U1(X), U2(X))), U3(X))``

Decoding a genome gives an :class:`ActivationExpr`, which evaluates the
expression on arrays, keeps an evaluation tape and back-propagates through it,
including the per-channel learnable parameters ``a`` (unary ops 19-21) and
``b`` (binary op 10).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import ops
from .ops import (
    BINARY_OPS,
    BINARY_PARAM_INIT,
    COMMUTATIVE_BINARY,
    N_BINARY,
    N_UNARY,
    UNARY_OPS,
    UNARY_PARAM_INIT,
    ZERO_OP,
)


class GenomeError(ValueError):
    """Raised for malformed genomes or genome text."""


class EncodingType(str, enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"

    @property
    def tag(self) -> str:
        return "t1" if self is EncodingType.TYPE1 else "t2"

    @property
    def n_unary(self) -> int:
        return 2 if self is EncodingType.TYPE1 else 4

    @property
    def n_binary(self) -> int:
        return 1 if self is EncodingType.TYPE1 else 2

    @property
    def length(self) -> int:
        return self.n_unary + self.n_binary

    @classmethod
    def parse(cls, value) -> "EncodingType":
        if isinstance(value, EncodingType):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"type1": cls.TYPE1, "t1": cls.TYPE1, "typei": cls.TYPE1, "1": cls.TYPE1,
                   "type2": cls.TYPE2, "t2": cls.TYPE2, "typeii": cls.TYPE2, "2": cls.TYPE2}
        try:
            return aliases[key]
        except KeyError:
            raise GenomeError(f"unknown encoding type {value!r}; expected type1 or type2") from None


GENOME_GRAMMAR = "t1:U<0-21>-U<0-21>-B<0-10>  or  t2:U<0-21>-U<0-21>-U<0-21>-U<0-21>-B<0-10>-B<0-10>"


@dataclass(frozen=True)
class Genome:
    encoding: EncodingType
    genes: tuple[int, ...]

    def __post_init__(self):
        enc = EncodingType.parse(self.encoding)
        object.__setattr__(self, "encoding", enc)
        genes = tuple(int(g) for g in self.genes)
        object.__setattr__(self, "genes", genes)
        if len(genes) != enc.length:
            raise GenomeError(
                f"{enc.value} genome needs {enc.length} genes, got {len(genes)}: {list(genes)}"
            )
        for i, g in enumerate(genes):
            hi = N_UNARY if i < enc.n_unary else N_BINARY
            if not 0 <= g < hi:
                kind = "unary" if i < enc.n_unary else "binary"
                raise GenomeError(f"gene {i} = {g} is not a valid {kind} index [0, {hi - 1}]")

    @classmethod
    def from_genes(cls, genes) -> "Genome":
        genes = tuple(int(g) for g in genes)
        if len(genes) == 3:
            return cls(EncodingType.TYPE1, genes)
        if len(genes) == 6:
            return cls(EncodingType.TYPE2, genes)
        raise GenomeError(f"genome length must be 3 (type1) or 6 (type2), got {len(genes)}")

    @property
    def unary(self) -> tuple[int, ...]:
        return self.genes[: self.encoding.n_unary]

    @property
    def binary(self) -> tuple[int, ...]:
        return self.genes[self.encoding.n_unary:]

    def is_unary_slot(self, position: int) -> bool:
        return position < self.encoding.n_unary

    def __len__(self) -> int:
        return len(self.genes)

    def __str__(self) -> str:
        return format_genome(self)

    @classmethod
    def parse(cls, text: str) -> "Genome":
        return parse_genome(text)


_TOKEN = re.compile(r"^([UB])(\d+)$")


def format_genome(genome: Genome) -> str:
    n_u = genome.encoding.n_unary
    parts = [("U" if i < n_u else "B") + str(g) for i, g in enumerate(genome.genes)]
    return f"{genome.encoding.tag}:" + "-".join(parts)


def parse_genome(text: str) -> Genome:
    """Parse ``t1:U11-U12-B1`` style text; inverse of :func:`format_genome`."""
    raw = text.strip()
    tag, sep, body = raw.partition(":")
    if not sep:
        raise GenomeError(f"missing template tag in {text!r}; expected {GENOME_GRAMMAR}")
    try:
        enc = EncodingType.parse(tag)
    except GenomeError:
        raise GenomeError(f"bad template tag {tag!r} in {text!r}; expected {GENOME_GRAMMAR}") from None
    tokens = body.split("-")
    if len(tokens) != enc.length:
        raise GenomeError(
            f"{tag} genome needs {enc.length} tokens, got {len(tokens)} in {text!r}; "
            f"expected {GENOME_GRAMMAR}"
        )
    genes = []
    for i, tok in enumerate(tokens):
        m = _TOKEN.match(tok)
        want = "U" if i < enc.n_unary else "B"
        hi = N_UNARY if want == "U" else N_BINARY
        if m is None or m.group(1) != want or not 0 <= int(m.group(2)) < hi:
            raise GenomeError(
                f"bad token {tok!r} at position {i} in {text!r}: expected {want}<0-{hi - 1}>; "
                f"grammar: {GENOME_GRAMMAR}"
            )
        genes.append(int(m.group(2)))
    return Genome(enc, tuple(genes))


def search_space_size(encoding, n_unary: int = N_UNARY, n_binary: int = N_BINARY) -> int:
    """Number of distinct genomes of the given encoding type."""
    enc = EncodingType.parse(encoding)
    return n_unary ** enc.n_unary * n_binary ** enc.n_binary


# --------------------------------------------------------------------------
# decoded expressions


def _broadcast_param(p: np.ndarray, x: np.ndarray, channel_axis: int):
    p = p.astype(x.dtype, copy=False)
    if x.ndim <= channel_axis:
        if p.shape[0] != 1:
            raise ValueError(
                f"input of shape {x.shape} has no channel axis {channel_axis} "
                f"but the expression has {p.shape[0]} channels"
            )
        return p[0]
    shape = [1] * x.ndim
    shape[channel_axis] = p.shape[0]
    return p.reshape(shape)


def _reduce_to_channels(g: np.ndarray, x_ndim: int, channel_axis: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if x_ndim <= channel_axis:
        return np.array([g.sum()])
    axes = tuple(i for i in range(x_ndim) if i != channel_axis)
    return g.sum(axis=axes)


@dataclass
class Tape:
    """Intermediates recorded by a forward pass."""

    owner: int
    x: np.ndarray
    channel_axis: int
    values: dict


class ActivationExpr:
    """An evaluable activation function decoded from a :class:`Genome`.

    ``params`` maps a slot name (``"U1"`` ... ``"B2"``) to a float64 array of
    length ``channels``; only parameter-bearing slots have entries.
    """

    def __init__(self, genome: Genome, channels: int = 1, params: Mapping[str, np.ndarray] | None = None):
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        self.genome = genome
        self.channels = int(channels)
        self.params: dict[str, np.ndarray] = {}
        enc = genome.encoding
        for i, g in enumerate(genome.genes):
            if i < enc.n_unary:
                name, init = f"U{i + 1}", UNARY_PARAM_INIT.get(g)
            else:
                name, init = f"B{i - enc.n_unary + 1}", BINARY_PARAM_INIT.get(g)
            if init is not None:
                self.params[name] = np.full(self.channels, init, dtype=np.float64)
        if params:
            for k, v in params.items():
                if k not in self.params:
                    raise ValueError(f"slot {k} of {genome} has no learnable parameter")
                self.params[k] = np.array(np.broadcast_to(np.asarray(v, dtype=np.float64), self.channels))

    def __repr__(self) -> str:
        return f"ActivationExpr({format_genome(self.genome)}, channels={self.channels})"

    @property
    def name(self) -> str:
        return format_genome(self.genome)

    def copy(self) -> "ActivationExpr":
        return ActivationExpr(self.genome, self.channels, {k: v.copy() for k, v in self.params.items()})

    def with_channels(self, channels: int) -> "ActivationExpr":
        """Fresh expression of the same genome and default parameters."""
        return ActivationExpr(self.genome, channels)

    def _p(self, slot, x, channel_axis):
        p = self.params.get(slot)
        return None if p is None else _broadcast_param(p, x, channel_axis)

    def _unary(self, k, x, ch):
        slot = f"U{k}"
        return ops.unary_forward(self.genome.genes[k - 1], x, self._p(slot, x, ch))

    def forward(self, x, channel_axis: int = 1):
        x = np.asarray(x)
        if not np.issubdtype(x.dtype, np.floating):
            x = x.astype(np.float64)
        if x.ndim > channel_axis and x.shape[channel_axis] != self.channels:
            raise ValueError(
                f"input has {x.shape[channel_axis]} channels on axis {channel_axis}, "
                f"expression expects {self.channels}"
            )
        if x.ndim <= channel_axis and self.channels != 1:
            raise ValueError(f"input of shape {x.shape} lacks channel axis {channel_axis}")
        genes = self.genome.genes
        v = {}
        v["U1"] = self._unary(1, x, channel_axis)
        v["U2"] = self._unary(2, x, channel_axis)
        b1 = 2 if self.genome.encoding is EncodingType.TYPE1 else 4
        v["B1"] = ops.binary_forward(genes[b1], v["U1"], v["U2"], self._p("B1", x, channel_axis))
        if self.genome.encoding is EncodingType.TYPE1:
            y = v["B1"]
        else:
            v["U3"] = self._unary(3, x, channel_axis)
            v["U4"] = ops.unary_forward(genes[3], v["B1"], self._p("U4", x, channel_axis))
            v["B2"] = ops.binary_forward(genes[5], v["U4"], v["U3"], self._p("B2", x, channel_axis))
            y = v["B2"]
        return y, Tape(id(self), x, channel_axis, v)

    def __call__(self, x, channel_axis: int = 1) -> np.ndarray:
        return self.forward(x, channel_axis)[0]

    def backward(self, tape: Tape, grad_y):
        """Chain rule through the graph.

        Returns ``(grad_x, grad_params)`` with parameter gradients summed over
        every non-channel axis.
        """
        if tape.owner != id(self):
            raise ValueError("tape was not produced by this expression")
        x, ch, v = tape.x, tape.channel_axis, tape.values
        grad_y = np.asarray(grad_y, dtype=x.dtype)
        if grad_y.shape != x.shape:
            raise ValueError(f"grad_y shape {grad_y.shape} != input shape {x.shape}")
        genes = self.genome.genes
        gp_el: dict[str, np.ndarray] = {}
        gx = np.zeros_like(x)
        if self.genome.encoding is EncodingType.TYPE1:
            g_b1 = grad_y
            b1_gene = genes[2]
        else:
            g4, g3, gp = ops.binary_backward(genes[5], v["U4"], v["U3"], grad_y, self._p("B2", x, ch))
            if gp is not None:
                gp_el["B2"] = gp
            g_b1, gp = ops.unary_backward(genes[3], v["B1"], g4, self._p("U4", x, ch))
            if gp is not None:
                gp_el["U4"] = gp
            d, gp = ops.unary_backward(genes[2], x, g3, self._p("U3", x, ch))
            gx = gx + d
            if gp is not None:
                gp_el["U3"] = gp
            b1_gene = genes[4]
        g1, g2, gp = ops.binary_backward(b1_gene, v["U1"], v["U2"], g_b1, self._p("B1", x, ch))
        if gp is not None:
            gp_el["B1"] = gp
        for k, g in ((1, g1), (2, g2)):
            d, gp = ops.unary_backward(genes[k - 1], x, g, self._p(f"U{k}", x, ch))
            gx = gx + d
            if gp is not None:
                gp_el[f"U{k}"] = gp
        grads = {k: _reduce_to_channels(gp_el[k], x.ndim, ch) for k in self.params}
        return gx, grads

    def scalar(self, channel: int = 0) -> Callable[[np.ndarray], np.ndarray]:
        """Elementwise float64 function using one channel's parameter values."""
        single = ActivationExpr(self.genome, 1, {k: v[channel] for k, v in self.params.items()})
        return lambda t: single.forward(np.asarray(t, dtype=np.float64), channel_axis=1)[0]

    def scalar_derivative(self, channel: int = 0) -> Callable[[np.ndarray], np.ndarray]:
        single = ActivationExpr(self.genome, 1, {k: v[channel] for k, v in self.params.items()})

        def deriv(t):
            t = np.asarray(t, dtype=np.float64)
            y, tape = single.forward(t, channel_axis=t.ndim + 1)
            return single.backward(tape, np.ones_like(y))[0]

        return deriv

    def is_periodic(self) -> bool:
        """True when every path from the input passes through sin or cos.

        Unary ops 3 and 19 discard the input; anything downstream of a periodic
        signal stays periodic.
        """
        periodic = {11, 12}
        constant = {ZERO_OP, 19}
        u = self.genome.unary
        ok = all(g in periodic | constant for g in u[:2]) and any(g in periodic for g in u[:2])
        if self.genome.encoding is EncodingType.TYPE2:
            ok = ok and u[2] in periodic | constant
        return ok


def decode(genome: Genome, channels: int = 1) -> ActivationExpr:
    if not isinstance(genome, Genome):
        genome = Genome.from_genes(genome)
    return ActivationExpr(genome, channels)


def eval_unary(op_index: int, x, params=None, channel_axis: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=np.result_type(np.asarray(x).dtype, np.float32))
    p = None if params is None else _broadcast_param(np.atleast_1d(np.asarray(params, np.float64)), x, channel_axis)
    return ops.unary_forward(op_index, x, p)


def eval_binary(op_index: int, x, y, params=None, channel_axis: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=np.result_type(np.asarray(x).dtype, np.float32))
    y = np.asarray(y, dtype=x.dtype)
    p = None if params is None else _broadcast_param(np.atleast_1d(np.asarray(params, np.float64)), x, channel_axis)
    return ops.binary_forward(op_index, x, y, p)


# --------------------------------------------------------------------------
# hand-crafted baselines


class RSign:
    """Learnable per-channel shift ahead of sign: ``sign(x - a)``.

    As a complementary function it computes ``x - a``; the network's sign
    then produces +1 exactly when ``x >= a``.
    """

    def __init__(self, channels: int = 1, alpha=0.0):
        self.channels = int(channels)
        self.params = {"alpha": np.array(np.broadcast_to(np.asarray(alpha, np.float64), self.channels))}

    name = "RSign"

    def copy(self):
        return RSign(self.channels, self.params["alpha"].copy())

    def with_channels(self, channels):
        return RSign(channels)

    def forward(self, x, channel_axis: int = 1):
        x = np.asarray(x)
        a = _broadcast_param(self.params["alpha"], x, channel_axis)
        return x - a, Tape(id(self), x, channel_axis, {})

    def __call__(self, x, channel_axis: int = 1):
        return self.forward(x, channel_axis)[0]

    def backward(self, tape, grad_y):
        if tape.owner != id(self):
            raise ValueError("tape was not produced by this expression")
        g = np.asarray(grad_y, dtype=tape.x.dtype)
        return g, {"alpha": -_reduce_to_channels(g, tape.x.ndim, tape.channel_axis)}

    def binarize(self, x, channel_axis: int = 1):
        a = _broadcast_param(self.params["alpha"], np.asarray(x), channel_axis)
        return np.where(np.asarray(x) >= a, 1.0, -1.0)

    def scalar(self, channel=0):
        a = self.params["alpha"][channel]
        return lambda t: np.asarray(t, dtype=np.float64) - a

    def scalar_derivative(self, channel=0):
        return lambda t: np.ones_like(np.asarray(t, dtype=np.float64))

    def is_periodic(self):
        return False


class RPReLU:
    """``x - g + z`` for ``x >= g``, ``b*(x - g) + z`` otherwise, all per channel."""

    name = "RPReLU"

    def __init__(self, channels: int = 1, gamma=0.0, zeta=0.0, beta=0.25):
        self.channels = int(channels)

        def full(v):
            return np.array(np.broadcast_to(np.asarray(v, np.float64), self.channels))

        self.params = {"gamma": full(gamma), "zeta": full(zeta), "beta": full(beta)}

    def copy(self):
        p = self.params
        return RPReLU(self.channels, p["gamma"].copy(), p["zeta"].copy(), p["beta"].copy())

    def with_channels(self, channels):
        return RPReLU(channels)

    def forward(self, x, channel_axis: int = 1):
        x = np.asarray(x)
        g, z, b = (_broadcast_param(self.params[k], x, channel_axis) for k in ("gamma", "zeta", "beta"))
        d = x - g
        pos = x >= g
        y = np.where(pos, d, b * d) + z
        return y.astype(x.dtype, copy=False), Tape(id(self), x, channel_axis, {"d": d, "pos": pos})

    def __call__(self, x, channel_axis: int = 1):
        return self.forward(x, channel_axis)[0]

    def backward(self, tape, grad_y):
        if tape.owner != id(self):
            raise ValueError("tape was not produced by this expression")
        x, ch = tape.x, tape.channel_axis
        g = np.asarray(grad_y, dtype=x.dtype)
        b = _broadcast_param(self.params["beta"], x, ch)
        d, pos = tape.values["d"], tape.values["pos"]
        slope = np.where(pos, 1, b)
        gx = (g * slope).astype(x.dtype, copy=False)
        red = lambda a: _reduce_to_channels(a, x.ndim, ch)  # noqa: E731
        return gx, {"gamma": -red(g * slope), "zeta": red(g), "beta": red(np.where(pos, 0, g * d))}

    def scalar(self, channel=0):
        single = RPReLU(1, *(self.params[k][channel] for k in ("gamma", "zeta", "beta")))
        return lambda t: single.forward(np.asarray(t, dtype=np.float64), channel_axis=9)[0]

    def scalar_derivative(self, channel=0):
        gam, b = self.params["gamma"][channel], self.params["beta"][channel]
        return lambda t: np.where(np.asarray(t, dtype=np.float64) >= gam, 1.0, b)

    def is_periodic(self):
        return False


# --------------------------------------------------------------------------
# catalog of discovered functions

# AF11 halves atan(x) through the lerp operator with b fixed at its 0.5 start.
CATALOG_GENOMES: dict[str, str] = {
    "AF1": "t1:U11-U12-B1",
    "AF2": "t1:U11-U12-B0",
    "AF3": "t1:U17-U11-B0",
    "AF4": "t1:U12-U0-B10",
    "AF5": "t1:U18-U11-B0",
    "AF6": "t1:U15-U17-B10",
    "AF7": "t1:U10-U11-B1",
    "AF8": "t1:U12-U14-B0",
    "AF9": "t1:U12-U14-B10",
    "AF10": "t1:U12-U14-B1",
    "AF11": "t2:U14-U3-U0-U12-B10-B0",
    "AF12": "t2:U0-U19-U0-U12-B0-B10",
    "AF13": "t2:U14-U3-U0-U12-B0-B0",
    "AF14": "t2:U15-U3-U0-U12-B0-B1",
    "AF15": "t2:U2-U3-U0-U12-B0-B0",
}

CATALOG_NAMES = tuple(CATALOG_GENOMES) + ("RSign", "RPReLU")


def catalog_af(name: str, channels: int = 1):
    """Look up a named function: ``AF1``..``AF15``, ``RSign`` or ``RPReLU``."""
    key = name.strip()
    for cand in CATALOG_NAMES:
        if cand.lower() == key.lower():
            key = cand
            break
    if key == "RSign":
        return RSign(channels)
    if key == "RPReLU":
        return RPReLU(channels)
    if key not in CATALOG_GENOMES:
        raise KeyError(f"unknown activation {name!r}; known: {', '.join(CATALOG_NAMES)}")
    return decode(parse_genome(CATALOG_GENOMES[key]), channels)


def resolve_af(spec: str, channels: int = 1):
    """Resolve genome text, a catalog name, or ``baseline`` (no function -> None)."""
    s = spec.strip()
    if s.lower() in ("baseline", "none", "sign"):
        return None
    if ":" in s:
        return decode(parse_genome(s), channels)
    return catalog_af(s, channels)


# --------------------------------------------------------------------------
# canonical forms (fitness-cache keys)


def _canon_pair(u1: int, u2: int, b: int) -> tuple[int, int, int]:
    if u2 == ZERO_OP and b in (0, 1):
        return (u1, ZERO_OP, 0)
    if u1 == ZERO_OP and b == 0:
        return (u2, ZERO_OP, 0)
    if b in COMMUTATIVE_BINARY and u2 < u1:
        return (u2, u1, b)
    return (u1, u2, b)


def canonicalize(genome: Genome) -> Genome:
    """Representative of the genome's equivalence class.

    Rewrites: ``y + 0``, ``0 + y`` and ``y - 0`` collapse to ``y + 0``; operands
    of commutative binaries are ordered by gene index; a subtree feeding the
    zero operator is reset to ``0 + 0``.
    """
    g = genome.genes
    if genome.encoding is EncodingType.TYPE1:
        return Genome(genome.encoding, _canon_pair(g[0], g[1], g[2]))
    u1, u2, u3, u4, b1, b2 = g
    u1, u2, b1 = _canon_pair(u1, u2, b1)
    if u4 == ZERO_OP:
        u1, u2, b1 = ZERO_OP, ZERO_OP, 0
    if u3 == ZERO_OP and b2 in (0, 1):
        b2 = 0
    return Genome(genome.encoding, (u1, u2, u3, u4, b1, b2))


# --------------------------------------------------------------------------
# infix rendering

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


def _wrap(term, need):
    s, prec = term
    return f"({s})" if prec < need else s


def _right(term, need):
    # negations on the right of a binary operator are always parenthesized
    s, prec = term
    return f"({s})" if prec < need or prec == _NEG else s


def _render_unary(op: int, t, a="a"):
    s = t[0]
    if op == 0:
        return t
    table = {
        1: (f"|{s}|", _ATOM),
        2: ("-" + _wrap(t, _POW), _NEG),
        3: ("0", _ATOM),
        4: (_wrap(t, _ATOM) + "^2", _POW),
        5: (_wrap(t, _ATOM) + "^3", _POW),
        6: (f"sign({s})*sqrt(|{s}|)", _MUL),
        7: (f"log(|{s}|)", _ATOM),
        8: (f"sigmoid({s})", _ATOM),
        9: (f"exp(-|{s}|)", _ATOM),
        10: (f"exp(-{_wrap(t, _ATOM)}^2)", _ATOM),
        11: (f"sin({s})", _ATOM),
        12: (f"cos({s})", _ATOM),
        13: (f"tan({s})", _ATOM),
        14: (f"atan({s})", _ATOM),
        15: (f"erf({s})", _ATOM),
        16: (f"erfc({s})", _ATOM),
        17: (f"max({s}, 0)", _ATOM),
        18: (f"min({s}, 0)", _ATOM),
        19: (a, _ATOM),
        20: (f"{a}*" + _right(t, _POW), _MUL),
        21: (f"{a} + " + _right(t, _MUL), _ADD),
    }
    return table[op]


def _render_binary(op: int, lt, rt, b="b"):
    L, R = lt[0], rt[0]
    if op == 0:
        return (f"{L} + {_right(rt, _MUL)}", _ADD)
    if op == 1:
        return (f"{L} - {_right(rt, _MUL)}", _ADD)
    if op == 2:
        return (f"{_wrap(lt, _MUL)}*{_right(rt, _POW)}", _MUL)
    if op == 3:
        return (f"{_wrap(lt, _MUL)}/{_right(rt, _POW)}", _MUL)
    if op == 4:
        return (f"{_wrap(lt, _MUL)}/({L} + {_right(rt, _MUL)})", _MUL)
    if op == 5:
        return (f"max({L}, {R})", _ATOM)
    if op == 6:
        return (f"min({L}, {R})", _ATOM)
    if op == 7:
        return (f"{_wrap(lt, _MUL)}/(1 + exp(-{_right(rt, _POW)}))", _MUL)
    if op == 8:
        return (f"exp(-|{L} - {_right(rt, _MUL)}|)", _ATOM)
    if op == 9:
        return (f"exp(-({L} - {_right(rt, _MUL)})^2)", _ATOM)
    return (f"{b}*{_right(lt, _POW)} + (1 - {b})*{_right(rt, _POW)}", _ADD)


def _param_names(genome: Genome) -> dict[int, str]:
    # a single a/b keeps its bare name; repeats are numbered left to right
    n_u = genome.encoding.n_unary
    slots = {"a": [], "b": []}
    for i, g in enumerate(genome.genes):
        if i < n_u and UNARY_OPS[g].n_params:
            slots["a"].append(i)
        elif i >= n_u and BINARY_OPS[g].n_params:
            slots["b"].append(i)
    names = {}
    for letter, positions in slots.items():
        for k, i in enumerate(positions):
            names[i] = letter if len(positions) == 1 else f"{letter}{k + 1}"
    return names


def render_formula(genome: Genome) -> str:
    """Infix rendering, e.g. ``sin(x) - cos(x)``; ``a``/``b`` are the learnable parameters."""
    x = ("x", _ATOM)
    g = genome.genes
    nm = _param_names(genome)

    def un(i, t):
        return _render_unary(g[i], t, nm.get(i, "a"))

    def bi(i, lt, rt):
        return _render_binary(g[i], lt, rt, nm.get(i, "b"))

    if genome.encoding is EncodingType.TYPE1:
        return bi(2, un(0, x), un(1, x))[0]
    inner = bi(4, un(0, x), un(1, x))
    return bi(5, un(3, inner), un(2, x))[0]


def all_genomes(encoding):
    """Iterate every genome of the encoding type in lexicographic gene order."""
    import itertools

    enc = EncodingType.parse(encoding)
    ranges = [range(N_UNARY)] * enc.n_unary + [range(N_BINARY)] * enc.n_binary
    for genes in itertools.product(*ranges):
        yield Genome(enc, genes)


__all__ = [
    "ActivationExpr", "BINARY_OPS", "CATALOG_GENOMES", "CATALOG_NAMES", "EncodingType", "Genome",
    "GenomeError", "RPReLU", "RSign", "Tape", "UNARY_OPS", "all_genomes", "canonicalize",
    "catalog_af", "decode", "eval_binary", "eval_unary", "format_genome", "parse_genome",
    "render_formula", "resolve_af", "search_space_size",
]
