"""Kernel backend selection.

Imports the compiled kernels when available, otherwise the pure-Python
twin. Set CORPUSFORGE_PURE_PYTHON=1 to force the fallback (useful for
benchmarking and for debugging suspected kernel issues).
"""

from __future__ import annotations

import os

if os.environ.get("CORPUSFORGE_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

fnv1a64 = _impl.fnv1a64
splitmix64 = _impl.splitmix64
ngram_hashes = _impl.ngram_hashes
minhash_from_hashes = _impl.minhash_from_hashes

__all__ = [
    "BACKEND",
    "fnv1a64",
    "splitmix64",
    "ngram_hashes",
    "minhash_from_hashes",
]
