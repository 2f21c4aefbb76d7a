"""Sampling, corpus statistics, and a fake-data generator for debugging.

The fake-data generator is registered as an ingestion processor so a
debug pipeline can start from synthetic records instead of real files.
Everything here is fully determined by (seed, record index); the stats
report is permutation-invariant over shard order.
"""

from __future__ import annotations

import sys
from typing import Any, Iterator, Optional

from .core import Document, tokenize_words
from .engine import Drop, ShardSet, StageContext, iter_shard_documents
from .errors import IoError
from .kernels import splitmix64
from .registry import ArgSpec, _register_native

VOCAB_SIZE = 1000
_VOCAB_SEED = 0x7C0FFEE5


def _build_vocab() -> tuple[str, ...]:
    # 19 consonants x 5 vowels = 95 CV syllables; words are 2-4 syllables
    # drawn from a fixed splitmix64 stream, deduplicated in draw order.
    syllables = [c + v for c in "bcdfghjklmnpqrstvwz" for v in "aeiou"]
    words: list[str] = []
    seen = set()
    counter = 0
    while len(words) < VOCAB_SIZE:
        draw = splitmix64(_VOCAB_SEED, counter)
        counter += 1
        length = 2 + (draw & 0xFFFF) % 3
        draw >>= 16
        word = "".join(syllables[(draw >> (7 * j)) % 95] for j in range(length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return tuple(words)


_VOCAB = _build_vocab()


def fake_word_count(record_seed: int, avg_words: int) -> int:
    """Binomial(2*avg_words, 1/2) via popcounts of the record's bit stream.

    Mean avg_words, concentrated like a Poisson; clamped to >= 1 so every
    record has text.
    """
    count_seed = splitmix64(record_seed, 0)
    bits = 2 * avg_words
    total = 0
    draw_index = 0
    while bits > 0:
        draw = splitmix64(count_seed, draw_index)
        draw_index += 1
        take = min(bits, 64)
        if take < 64:
            draw &= (1 << take) - 1
        total += bin(draw).count("1")
        bits -= take
    return max(1, total)


def fake_text(seed: int, index: int, avg_words: int) -> str:
    """The deterministic text of fake record `index` for this seed."""
    record_seed = splitmix64(seed, index)
    word_seed = splitmix64(record_seed, 1)
    count = fake_word_count(record_seed, avg_words)
    return " ".join(
        _VOCAB[splitmix64(word_seed, w) % VOCAB_SIZE] for w in range(count)
    )


def _check_fake_args(args: dict) -> Optional[str]:
    if args["count"] < 0:
        return "count must be >= 0"
    if args["avg_words"] < 1:
        return "avg_words must be >= 1"
    return None


@_register_native(
    "ingest",
    args=(
        ArgSpec("count", "int", required=True),
        ArgSpec("seed", "int"),
        ArgSpec("avg_words", "int", default=50),
    ),
    doc="Generate deterministic pseudo-English records for debugging.",
    check_args=_check_fake_args,
)
def data_ingestion___test___generate_fake_data(
    ctx: StageContext, count: int, seed: Optional[int] = None, avg_words: int = 50
) -> Iterator[Document]:
    """Yield `count` synthetic Documents with source "fake".

    Word counts are Binomial(2*avg_words, 1/2), so the corpus mean tracks
    avg_words. The seed arg overrides the run seed.
    """
    effective_seed = ctx.seed if seed is None else seed
    for index in range(count):
        yield Document(
            id=0, meta={}, source="fake", text=fake_text(effective_seed, index, avg_words)
        )


def _check_sample_args(args: dict) -> Optional[str]:
    if args["k"] < 0:
        return "k must be >= 0"
    return None


def reservoir_pick(stream: Iterator[Any], k: int, seed: int) -> list:
    """Algorithm R: uniform sample of min(k, N) items from a stream.

    Item i (for i >= k) replaces slot splitmix64(seed, i) % (i+1) when
    that lands below k, so the pick depends only on (seed, stream order).
    Returned in slot order, not stream order.
    """
    reservoir: list = []
    for i, item in enumerate(stream):
        if i < k:
            reservoir.append(item)
        else:
            j = splitmix64(seed, i) % (i + 1)
            if j < k:
                reservoir[j] = item
    return reservoir


class _ReservoirSampleStage:
    """Uniform sampling as a pipeline stage.

    local() lists each shard's ids; merge() runs reservoir_pick over them
    in shard order; apply() keeps exactly the chosen ids. Output order is
    ascending original id because apply never reorders.
    """

    def local(self, docs: Iterator[Document], ctx: StageContext, args: dict) -> list[int]:
        return [doc.id for doc in docs]

    def merge(self, locals_: list[list[int]], ctx: StageContext, args: dict) -> frozenset[int]:
        seed = ctx.seed if args.get("seed") is None else args["seed"]
        all_ids = (doc_id for ids in locals_ for doc_id in ids)
        return frozenset(reservoir_pick(all_ids, args["k"], seed))

    def apply(self, doc: Document, state: frozenset[int], args: dict) -> Optional[Drop]:
        if doc.id in state:
            return None
        return Drop("not_sampled")


_register_native(
    "global",
    name="utils___sample___reservoir",
    args=(ArgSpec("k", "int", required=True), ArgSpec("seed", "int")),
    doc="Keep a uniform reservoir sample of k records.",
    check_args=_check_sample_args,
)(_ReservoirSampleStage())


def _bucket_label(length: int) -> str:
    if length <= 0:
        return "[0,1)"
    low = 1 << (length.bit_length() - 1)
    return f"[{low},{low * 2})"


def _empty_stats() -> dict:
    return {
        "records": 0,
        "total_chars": 0,
        "total_words": 0,
        "char_length_histogram": {},
        "per_source": {},
    }


def _stats_of(docs: Iterator[Document]) -> dict:
    stats = _empty_stats()
    hist = stats["char_length_histogram"]
    per_source = stats["per_source"]
    for doc in docs:
        stats["records"] += 1
        stats["total_chars"] += len(doc.text)
        stats["total_words"] += len(tokenize_words(doc.text))
        label = _bucket_label(len(doc.text))
        hist[label] = hist.get(label, 0) + 1
        per_source[doc.source] = per_source.get(doc.source, 0) + 1
    return stats


def _merge_stats(parts: list[dict]) -> dict:
    merged = _empty_stats()
    for part in parts:
        merged["records"] += part["records"]
        merged["total_chars"] += part["total_chars"]
        merged["total_words"] += part["total_words"]
        for label, count in part["char_length_histogram"].items():
            merged["char_length_histogram"][label] = (
                merged["char_length_histogram"].get(label, 0) + count
            )
        for source, count in part["per_source"].items():
            merged["per_source"][source] = merged["per_source"].get(source, 0) + count
    return merged


def compute_corpus_stats(shards: ShardSet) -> dict:
    """Exact corpus report: counts, char/word totals, log2 length
    histogram, per-source record counts."""
    return _merge_stats([_stats_of(iter_shard_documents(s.path)) for s in shards.shards])


def stats_to_json(stats: dict) -> str:
    import json

    return json.dumps(stats, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class _CorpusStatsStage:
    """Pass-through stage that reports corpus statistics at the merge."""

    def local(self, docs: Iterator[Document], ctx: StageContext, args: dict) -> dict:
        return _stats_of(docs)

    def merge(self, locals_: list[dict], ctx: StageContext, args: dict) -> None:
        report = stats_to_json(_merge_stats(locals_))
        path = args.get("path")
        if path:
            try:
                with open(path, "w", encoding="utf-8", newline="\n") as handle:
                    handle.write(report + "\n")
            except OSError as exc:
                raise IoError(f"cannot write stats report {path}: {exc}") from exc
        else:
            sys.stdout.write(report + "\n")
        return None

    def apply(self, doc: Document, state: Any, args: dict) -> Optional[Drop]:
        return None


_register_native(
    "global",
    name="utils___stats___corpus",
    args=(ArgSpec("path", "str"),),
    doc="Report record/char/word counts, length histogram, source counts.",
)(_CorpusStatsStage())
