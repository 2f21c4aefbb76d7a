"""Pure-Python twin of the compiled hashing kernels.

Used when corpusforge._kernels is not built or CORPUSFORGE_PURE_PYTHON is
set. Every function must return bit-identical values to the compiled
versions for every input; tests/test_kernels.py enforces parity.
"""

from __future__ import annotations

from typing import Iterable, Sequence

_FNV_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_M61 = (1 << 61) - 1
_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def fnv1a64(data: bytes) -> int:
    """FNV-1a over bytes: 64-bit offset basis, byte-at-a-time."""
    h = _FNV_BASIS
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _M64
    return h


def splitmix64(seed: int, counter: int) -> int:
    """Value at position ``counter`` of the splitmix64 stream seeded by ``seed``."""
    z = (seed + ((counter + 1) & _M64) * _GOLDEN) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def ngram_hashes(data: bytes, n: int) -> list[int]:
    """FNV-1a hashes of every n-token window of single-spaced text bytes.

    Matches the compiled kernel: tokens split on single 0x20 bytes, each
    window hashed over its exact byte range including separators, [] when
    fewer than ``n`` tokens.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not data:
        return []
    tokens = data.split(b" ")
    if len(tokens) < n:
        return []
    return [fnv1a64(b" ".join(tokens[i : i + n])) for i in range(len(tokens) - n + 1)]


def minhash_from_hashes(
    hashes: Iterable[int], a_params: Sequence[int], b_params: Sequence[int]
) -> list[int]:
    """MinHash signature: min over ``hashes`` of (a*h + b) mod 2^61-1 per slot."""
    hs = list(hashes)
    if not hs:
        raise ValueError("minhash of an empty hash set")
    if len(a_params) != len(b_params):
        raise ValueError("a_params and b_params lengths differ")
    return [
        min((a * h + b) % _M61 for h in hs)
        for a, b in zip(a_params, b_params)
    ]
