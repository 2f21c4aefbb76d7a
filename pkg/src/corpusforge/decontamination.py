"""Benchmark decontamination via token n-gram hash overlap.

Benchmark texts and corpus documents pass through the same
normalize/tokenize/hash primitives, so detection is invariant to case and
whitespace differences on either side. A document is dropped when any of
its 13-token windows (configurable) hashes into the benchmark index, or
when its whole normalized text matches a benchmark item shorter than n
tokens. Whole documents are dropped, never excised spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import kernels
from .core import Document, hash64, normalize_text
from .engine import StageContext
from .errors import IoError, SchemaError
from .registry import ArgSpec, _register_native

DEFAULT_NGRAM = 13


@dataclass(frozen=True)
class ContaminationIndex:
    n: int
    ngram_hashes: frozenset[int]
    whole_doc_hashes: frozenset[int]


def build_contamination_index(benchmark_path: str, n: int = DEFAULT_NGRAM) -> ContaminationIndex:
    """Index every n-token window of a benchmark JSONL file.

    Items with fewer than n tokens are indexed by their whole normalized
    text instead, so short benchmark entries still match verbatim copies.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    path = Path(benchmark_path)
    if not path.exists():
        raise IoError(f"benchmark file does not exist: {benchmark_path}")
    ngram_hashes: set[int] = set()
    whole_doc_hashes: set[int] = set()
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
                if not isinstance(raw, dict) or not isinstance(raw.get("text"), str):
                    raise SchemaError(f"{path}:{line_no}: needs a string 'text' field")
                data = normalize_text(raw["text"]).encode("utf-8")
                window_hashes = kernels.ngram_hashes(data, n)
                if window_hashes:
                    ngram_hashes.update(window_hashes)
                else:
                    whole_doc_hashes.add(hash64(data))
    except OSError as exc:
        raise IoError(f"cannot read benchmark {benchmark_path}: {exc}") from exc
    return ContaminationIndex(
        n=n,
        ngram_hashes=frozenset(ngram_hashes),
        whole_doc_hashes=frozenset(whole_doc_hashes),
    )


def _prepare(args: dict, ctx: StageContext) -> dict:
    # The index is built once in the parent; workers get it read-only.
    return {"index": build_contamination_index(args["benchmark_path"], args["n"])}


@_register_native(
    "filter",
    args=(
        ArgSpec("benchmark_path", "str", required=True),
        ArgSpec("n", "int", default=DEFAULT_NGRAM),
    ),
    doc="Drop documents overlapping a benchmark set by n-gram hashes.",
    prepare=_prepare,
)
def decontamination___ngram___filter(doc: Document, index: ContaminationIndex) -> Optional[str]:
    data = normalize_text(doc.text).encode("utf-8")
    for window_hash in kernels.ngram_hashes(data, index.n):
        if window_hash in index.ngram_hashes:
            return "contaminated"
    if index.whole_doc_hashes and hash64(data) in index.whole_doc_hashes:
        return "contaminated"
    return None
