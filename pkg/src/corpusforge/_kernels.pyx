# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hashing kernels.

Hot loops shared by deduplication, decontamination, and the deterministic
RNG: FNV-1a 64, counter-based splitmix64, token n-gram window hashing, and
MinHash signatures under multiply-add permutations mod 2^61 - 1.

corpusforge._kernels_py is the pure-Python twin; both backends must return
bit-identical values for every input (see tests/test_kernels.py).
"""

from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc

cdef extern from *:
    ctypedef unsigned long long uint128 "unsigned __int128"

cdef uint64_t _FNV_BASIS = 0xcbf29ce484222325u
cdef uint64_t _FNV_PRIME = 0x100000001b3u
cdef uint64_t _M61 = 0x1fffffffffffffffu  # 2^61 - 1, Mersenne prime
cdef uint64_t _GOLDEN = 0x9e3779b97f4a7c15u
cdef uint64_t _U64_MAX = 0xffffffffffffffffu


cdef inline uint64_t _fnv(const unsigned char *p, Py_ssize_t n) nogil:
    cdef uint64_t h = _FNV_BASIS
    cdef Py_ssize_t i
    for i in range(n):
        h ^= p[i]
        h = h * _FNV_PRIME
    return h


cpdef uint64_t fnv1a64(const unsigned char[::1] data):
    """FNV-1a over bytes: 64-bit offset basis, byte-at-a-time."""
    cdef Py_ssize_t n = data.shape[0]
    if n == 0:
        return _FNV_BASIS
    return _fnv(&data[0], n)


cpdef uint64_t splitmix64(uint64_t seed, uint64_t counter):
    """Value at position ``counter`` of the splitmix64 stream seeded by ``seed``.

    Counter-based: any index is computable in O(1), which keeps parallel
    shard processing free of shared RNG state.
    """
    cdef uint64_t z = seed + (counter + 1) * _GOLDEN
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9u
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebu
    return z ^ (z >> 31)


def ngram_hashes(const unsigned char[::1] data, Py_ssize_t n):
    """FNV-1a hashes of every n-token window of single-spaced text bytes.

    ``data`` is the UTF-8 encoding of normalized text: tokens separated by
    single 0x20 bytes. Each window hash covers the bytes from the start of
    token i through the end of token i+n-1, separators included, so no
    window string is ever materialized. Returns [] when there are fewer
    than ``n`` tokens.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cdef Py_ssize_t length = data.shape[0]
    if length == 0:
        return []

    cdef const unsigned char *p = &data[0]
    cdef Py_ssize_t i, ntok = 1
    for i in range(length):
        if p[i] == 0x20:
            ntok += 1
    if ntok < n:
        return []

    cdef Py_ssize_t *starts = <Py_ssize_t *> malloc((ntok + 1) * sizeof(Py_ssize_t))
    if starts == NULL:
        raise MemoryError()
    cdef list out = []
    cdef Py_ssize_t k = 1, a, b
    cdef uint64_t h
    try:
        starts[0] = 0
        for i in range(length):
            if p[i] == 0x20:
                starts[k] = i + 1
                k += 1
        starts[ntok] = length + 1  # sentinel: pretend separator after the end

        for i in range(ntok - n + 1):
            a = starts[i]
            b = starts[i + n] - 1
            h = _fnv(p + a, b - a)
            out.append(h)
    finally:
        free(starts)
    return out


cdef inline uint64_t _permhash(uint64_t a, uint64_t h, uint64_t b) nogil:
    # (a*h + b) mod 2^61-1 via Mersenne folding; a, b < 2^61-1 so the
    # 128-bit intermediate never overflows.
    cdef uint128 t = (<uint128> a) * h + b
    cdef uint128 x = (t & _M61) + (t >> 61)
    x = (x & _M61) + (x >> 61)
    cdef uint64_t r = <uint64_t> x
    if r >= _M61:
        r -= _M61
    return r


def minhash_from_hashes(hashes, a_params, b_params):
    """MinHash signature: min over ``hashes`` of (a*h + b) mod 2^61-1 per slot.

    ``a_params`` and ``b_params`` are equal-length sequences below 2^61-1.
    Raises ValueError on an empty hash set.
    """
    cdef list hs = list(hashes)
    cdef Py_ssize_t nh = len(hs)
    cdef Py_ssize_t np = len(a_params)
    if nh == 0:
        raise ValueError("minhash of an empty hash set")
    if np != len(b_params):
        raise ValueError("a_params and b_params lengths differ")

    cdef uint64_t *harr = <uint64_t *> malloc(nh * sizeof(uint64_t))
    cdef uint64_t *aarr = <uint64_t *> malloc(np * sizeof(uint64_t))
    cdef uint64_t *barr = <uint64_t *> malloc(np * sizeof(uint64_t))
    if harr == NULL or aarr == NULL or barr == NULL:
        free(harr)
        free(aarr)
        free(barr)
        raise MemoryError()

    cdef list out = []
    cdef Py_ssize_t i, j
    cdef uint64_t m, v
    try:
        for j in range(nh):
            harr[j] = <uint64_t> hs[j]
        for i in range(np):
            aarr[i] = <uint64_t> a_params[i]
            barr[i] = <uint64_t> b_params[i]
        for i in range(np):
            m = _U64_MAX
            with nogil:
                for j in range(nh):
                    v = _permhash(aarr[i], harr[j], barr[i])
                    if v < m:
                        m = v
            out.append(m)
    finally:
        free(harr)
        free(aarr)
        free(barr)
    return out
