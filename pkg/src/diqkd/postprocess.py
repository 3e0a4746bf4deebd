"""Bit-exact classical post-processing: Toeplitz extraction and a verify tag.

The extractor is the two-universal family of Toeplitz matrices over
GF(2), applied matrix-free: the seed is packed into 64-bit words at all
64 bit offsets once, after which every output bit is an AND/XOR sweep
over one word-aligned window.  A length-m input with length-l output
costs O(l m / 64) word operations and no matrix storage.

The verification tag is a polynomial hash over GF(2^128) (GCM modulus)
composed with a multiply-then-truncate map to 64 bits.  For a message of
t = ceil(bits/128) padded blocks the collision probability over a
uniform key is at most (t + 1)/2^128 + 2^-64, which stays below 2^-61
for every supported message length (up to 2^61 bits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BitString",
    "ToeplitzSeed",
    "toeplitz_extract",
    "TagKey",
    "verify_tag",
    "tag_collision_bound",
]

_GF128_POLY = (1 << 128) | (1 << 7) | (1 << 2) | (1 << 1) | 1  # x^128 + x^7 + x^2 + x + 1

# extraction ratio used by the vacuum-noise QRNG feeding the basis choices;
# a documented operating constant, not an input to any computation here
QRNG_EXTRACTION_RATIO = 0.67


class BitString:
    """An ordered sequence of bits with exact length bookkeeping."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        a = np.asarray(bits, dtype=np.uint8)
        if a.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if a.size and a.max() > 1:
            raise ValueError("bits must be 0 or 1")
        self.bits = a

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, BitString) and np.array_equal(self.bits, other.bits)

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return BitString(self.bits ^ other.bits)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitString":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    @classmethod
    def from_hex(cls, text: str) -> "BitString":
        """Parse the 'length:hexdigits' serialization."""
        head, _, body = text.strip().partition(":")
        n = int(head)
        if n == 0:
            if body:
                raise ValueError("zero-length bitstring must have empty body")
            return cls(np.zeros(0, dtype=np.uint8))
        nbytes = (n + 7) // 8
        if len(body) != 2 * nbytes:
            raise ValueError(f"expected {2 * nbytes} hex digits for {n} bits, got {len(body)}")
        data = np.frombuffer(bytes.fromhex(body), dtype=np.uint8)
        bits = np.unpackbits(data, bitorder="big")[:n]
        return cls(bits)

    def to_hex(self) -> str:
        n = len(self)
        if n == 0:
            return "0:"
        packed = np.packbits(self.bits, bitorder="big")
        return f"{n}:{packed.tobytes().hex()}"

    def to_int(self) -> int:
        """Big-endian integer value of the bit sequence."""
        if len(self) == 0:
            return 0
        packed = np.packbits(self.bits, bitorder="big")
        return int.from_bytes(packed.tobytes(), "big") >> ((-len(self)) % 8)


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits defining the diagonal-constant matrix for (m, l) extraction."""

    bits: BitString

    def matrix_shape_for(self, m: int) -> tuple[int, int]:
        ell = len(self.bits) - m + 1
        if ell < 0:
            raise ValueError("seed shorter than the input length allows")
        return ell, m


def _pack_words(bits: np.ndarray, offset: int, words: int) -> np.ndarray:
    """bits[offset:] packed little-bit-endian into uint64 words."""
    padded = np.zeros(words * 64, dtype=np.uint8)
    chunk = bits[offset : offset + words * 64]
    padded[: chunk.size] = chunk
    return np.frombuffer(np.packbits(padded, bitorder="little").tobytes(), dtype="<u8").copy()


def _pack_offsets(bits: np.ndarray) -> list[np.ndarray]:
    """Word packings of the bit array at all 64 bit offsets.

    Entry r packs bits[r:], so any window starting at absolute bit
    position p is the word slice packed[p % 64][p // 64 : ...].
    """
    n = bits.size
    words = (n + 63) // 64 + 1
    return [_pack_words(bits, r, words) for r in range(64)]


_PARITY_TABLE = np.array(
    [bin(v).count("1") & 1 for v in range(65536)], dtype=np.uint8
)


def _parity64(words: np.ndarray) -> np.ndarray:
    w = words
    w = w ^ (w >> np.uint64(32))
    w = w ^ (w >> np.uint64(16))
    return _PARITY_TABLE[(w & np.uint64(0xFFFF)).astype(np.intp)]


def toeplitz_extract(raw: BitString, seed: ToeplitzSeed, ell: int) -> BitString:
    """GF(2) product of the Toeplitz matrix T[i, j] = seed[i - j + m - 1] with raw.

    Linear in the input; requires seed length m + ell - 1 and ell <= m.
    """
    m = len(raw)
    if ell < 0:
        raise ValueError("output length must be nonnegative")
    if ell == 0:
        return BitString(np.zeros(0, dtype=np.uint8))
    if ell > m:
        raise ValueError(f"cannot extract {ell} bits from {m}")
    if len(seed.bits) != m + ell - 1:
        raise ValueError(f"seed must have length m + ell - 1 = {m + ell - 1}, got {len(seed.bits)}")

    # out[i] = parity(raw & u[ell - 1 - i : ell - 1 - i + m]) with u the
    # reversed seed: rows are sliding word-aligned windows of u
    u = seed.bits.bits[::-1].copy()
    shifted = _pack_offsets(u)
    w = (m + 63) // 64
    raw_words = _pack_words(raw.bits, 0, w)
    tail_bits = m - (w - 1) * 64
    tail_mask = np.uint64((1 << tail_bits) - 1) if tail_bits < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)

    out = np.empty(ell, dtype=np.uint8)
    for i in range(ell):
        p = ell - 1 - i
        window = shifted[p % 64][p // 64 : p // 64 + w].copy()
        window[-1] &= tail_mask
        acc = np.bitwise_xor.reduce(window & raw_words)
        out[i] = _parity64(np.array([acc], dtype=np.uint64))[0]
    return BitString(out)


def _gf128_mul(x: int, y: int) -> int:
    """Carry-less product reduced by the GCM modulus."""
    out = 0
    while y:
        if y & 1:
            out ^= x
        y >>= 1
        x <<= 1
        if x >> 128:
            x ^= _GF128_POLY
    return out


_MASK128 = (1 << 128) - 1
# t * x^128 reduced, for the 4 overflow bits a nibble shift can produce
_RED4 = [_gf128_mul(t << 124, 1 << 4) if t else 0 for t in range(16)]


def _nibble_tables(k: int) -> list[int]:
    """Multiples v * k for v in 0..15, for windowed multiplication by k."""
    return [_gf128_mul(k, v) for v in range(16)]


def _mul_by_tables(acc: int, tables: list[int]) -> int:
    """acc * k via 4-bit windows of acc, with incremental reduction."""
    res = 0
    for shift in range(124, -4, -4):
        top = res >> 124
        res = ((res << 4) & _MASK128) ^ _RED4[top]
        res ^= tables[(acc >> shift) & 15]
    return res


@dataclass(frozen=True)
class TagKey:
    """256 bits of key material: the evaluation point and the output mixer."""

    point: int
    mixer: int

    def __post_init__(self) -> None:
        if not 0 <= self.point < 2**128 or not 0 <= self.mixer < 2**128:
            raise ValueError("key halves must be 128-bit values")

    @classmethod
    def from_bits(cls, bits: BitString) -> "TagKey":
        if len(bits) != 256:
            raise ValueError(f"tag key needs exactly 256 bits, got {len(bits)}")
        v = bits.to_int()
        return cls(point=v >> 128, mixer=v & ((1 << 128) - 1))


def _padded_blocks(message: BitString) -> list[int]:
    """128-bit blocks of the message with unambiguous 1000... padding."""
    bits = np.concatenate([message.bits, np.ones(1, dtype=np.uint8)])
    rem = (-bits.size) % 128
    bits = np.concatenate([bits, np.zeros(rem, dtype=np.uint8)])
    raw = np.packbits(bits, bitorder="big").tobytes()
    return [int.from_bytes(raw[i : i + 16], "big") for i in range(0, len(raw), 16)]


def verify_tag(message: BitString, key: TagKey) -> int:
    """64-bit verification tag of the message under the given key.

    Horner evaluation seeded at 1 (so differing block counts cannot
    collide identically), then a full-width multiply and truncation.
    """
    if len(message) > 2**61:
        raise ValueError("message exceeds the supported 2^61 bits")
    point_tables = _nibble_tables(key.point)
    acc = 1
    for block in _padded_blocks(message):
        acc = _mul_by_tables(acc ^ block, point_tables)
    mixed = _gf128_mul(acc, key.mixer)
    return mixed & ((1 << 64) - 1)


def tag_collision_bound(message_bits: int) -> float:
    """Collision probability bound for two distinct messages of this size."""
    t = (message_bits + 1 + 127) // 128
    return (t + 1) / 2.0**128 + 2.0**-64
