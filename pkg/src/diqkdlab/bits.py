"""Bit-array helpers: packing, hex encoding, parity.

Bit strings are numpy uint8 arrays of 0/1. Packing is little-endian
within bytes: bit i of the array lands in byte i // 8 at position
i % 8 (LSB first). Hex strings encode the packed bytes.
"""

from __future__ import annotations

import numpy as np


def as_bits(x) -> np.ndarray:
    """Coerce a sequence of 0/1 values to a uint8 bit array."""
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit array must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit array entries must be 0 or 1")
    return arr


def pack_bits(bits) -> bytes:
    bits = as_bits(bits)
    return np.packbits(bits, bitorder="little").tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    if n > len(data) * 8:
        raise ValueError(f"need {n} bits but got {len(data)} bytes")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:n].copy()


def bits_to_hex(bits) -> str:
    return pack_bits(bits).hex()


def hex_to_bits(s: str, n: int) -> np.ndarray:
    return unpack_bits(bytes.fromhex(s), n)


def parity(bits) -> int:
    return int(np.bitwise_xor.reduce(as_bits(bits))) if len(bits) else 0


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)
