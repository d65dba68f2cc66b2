"""Bit-packed +-1 vectors and the xnor/popcount dot product.

Layout: +1 -> bit 1, -1 -> bit 0, packed LSB-first into little-endian
uint64 words along the last axis. Tail bits of the final word are zero.
"""

import numpy as np

WORD_BITS = 64


def _check_pm1(x):
    x = np.asarray(x)
    bad = (x != 1) & (x != -1)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        raise ValueError(f"pack_bits needs +-1 values; found {x[idx]!r} at {idx}")
    return x


def pack_bits(x) -> np.ndarray:
    """Pack a +-1 array along its last axis into ``ceil(n/64)`` uint64 words."""
    x = _check_pm1(x)
    n = x.shape[-1]
    n_words = max(1, -(-n // WORD_BITS))
    bits = np.zeros(x.shape[:-1] + (n_words * WORD_BITS,), dtype=np.uint8)
    bits[..., :n] = x > 0
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return packed.view("<u8").reshape(x.shape[:-1] + (n_words,))


def unpack_bits(packed, n: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype="<u8")
    bits = np.unpackbits(packed.view(np.uint8), axis=-1, bitorder="little")[..., :n]
    return np.where(bits == 1, 1.0, -1.0).astype(np.float32)


def tail_mask(n: int, n_words: int) -> np.ndarray:
    mask = np.full(n_words, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    rem = n - (n_words - 1) * WORD_BITS
    if not 0 < rem <= WORD_BITS:
        raise ValueError(f"{n} bits do not fit {n_words} words")
    if rem < WORD_BITS:
        mask[-1] = np.uint64((1 << rem) - 1)
    return mask


def popcount(words) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(words).astype(np.int64)
    as_bytes = np.ascontiguousarray(words).view(np.uint8).reshape(words.shape + (8,))
    return np.unpackbits(as_bytes, axis=-1).sum(axis=-1, dtype=np.int64)


def xnor_popcount_dot(a, b, n: int):
    """``2*popcount(xnor(a, b) & mask) - n``: the +-1 dot product of ``n`` logical bits.

    Broadcasts over leading axes; the last axis holds the words.
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"packed lengths differ: {a.shape[-1]} vs {b.shape[-1]} words")
    mask = tail_mask(n, a.shape[-1])
    agree = ~(a ^ b) & mask
    return 2 * popcount(agree).sum(axis=-1) - n


def packed_matmul(x_packed, w_packed, n: int) -> np.ndarray:
    """(batch, words) x (out, words) -> (batch, out) integer dot products."""
    return xnor_popcount_dot(x_packed[:, None, :], w_packed[None, :, :], n)
