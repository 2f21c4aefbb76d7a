"""Exact and fuzzy (MinHash + LSH) deduplication.

Both run as global stages: a parallel per-shard local pass, one
single-threaded merge that decides survivors, and a parallel apply pass.
Matching is over normalize_text output, so case and whitespace variants
collide; the stored text is never modified. Among duplicates the smallest
Document.id survives, which makes results deterministic and order-stable.

Fuzzy dedup verifies every LSH candidate pair by exact Jaccard over the
shingle sets before dropping anything, so a drop below the threshold is
impossible; the banding only affects recall.
"""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from . import kernels
from .core import Document, hash64, normalize_text, unpack_id
from .engine import Drop, GlobalStage, StageContext, iter_shard_documents
from .errors import EmptyInput
from .registry import ArgSpec, _register_native

MERSENNE_61 = (1 << 61) - 1


def shingle_set(text: str, ngram: int) -> set[int]:
    """Hashes of every word n-gram of the normalized text.

    Texts with fewer than ``ngram`` tokens fall back to a single hash of
    the whole normalized text, so the result is never empty.
    """
    if ngram < 1:
        raise ValueError("ngram must be >= 1")
    data = normalize_text(text).encode("utf-8")
    hashes = kernels.ngram_hashes(data, ngram)
    if not hashes:
        return {hash64(data)}
    return set(hashes)


def make_permutation_params(seed: int, num_perm: int) -> tuple[list[int], list[int]]:
    """Deterministic (a_i, b_i) draws with a_i in [1, p), b_i in [0, p)."""
    a_params = [
        1 + kernels.splitmix64(seed, 2 * i) % (MERSENNE_61 - 1) for i in range(num_perm)
    ]
    b_params = [kernels.splitmix64(seed, 2 * i + 1) % MERSENNE_61 for i in range(num_perm)]
    return a_params, b_params


def minhash_signature(
    shingles: set[int], a_params: Sequence[int], b_params: Sequence[int]
) -> list[int]:
    """Signature slot i = min over shingle hashes h of (a_i*h + b_i) mod 2^61-1."""
    if not shingles:
        raise EmptyInput("cannot build a MinHash signature from an empty shingle set")
    return kernels.minhash_from_hashes(shingles, a_params, b_params)


def banding_keys(signature: Sequence[int], bands: int, rows: int) -> list[int]:
    """One key per band: hash64 of the band index plus its signature slots."""
    if bands * rows != len(signature):
        raise ValueError(
            f"bands*rows must equal signature length: {bands}*{rows} != {len(signature)}"
        )
    keys = []
    for band in range(bands):
        chunk = signature[band * rows : (band + 1) * rows]
        keys.append(hash64(struct.pack(f"<{rows + 1}Q", band, *chunk)))
    return keys


def jaccard(a: set[int], b: set[int]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.rank: dict[int, int] = {}

    def find(self, item: int) -> int:
        parent = self.parent.setdefault(item, item)
        if parent == item:
            self.rank.setdefault(item, 0)
            return item
        root = self.find(parent)
        self.parent[item] = root
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for item in self.parent:
            out[self.find(item)].append(item)
        return dict(out)


def _scope_key(source: str, scope: str) -> str:
    return source if scope == "per_source" else ""


_SCOPE_ARG = ArgSpec("scope", "str", default="global", choices=("global", "per_source"))
_DROP_LOG_ARG = ArgSpec("drop_log", "str")


class _ExactDedupStage(GlobalStage):
    """Drop records whose normalized text hash collides; smallest id wins."""

    def local(self, docs: Iterator[Document], ctx: StageContext, args: dict) -> dict:
        best: dict[tuple[str, int], int] = {}
        for doc in docs:
            key = (
                _scope_key(doc.source, args["scope"]),
                hash64(normalize_text(doc.text).encode("utf-8")),
            )
            if key not in best or doc.id < best[key]:
                best[key] = doc.id
        return best

    def merge(self, locals_: list[dict], ctx: StageContext, args: dict) -> dict:
        survivors: dict[tuple[str, int], int] = {}
        for shard_best in locals_:
            for key, doc_id in shard_best.items():
                if key not in survivors or doc_id < survivors[key]:
                    survivors[key] = doc_id
        return survivors

    def apply(self, doc: Document, state: dict, args: dict) -> Optional[Drop]:
        key = (
            _scope_key(doc.source, args["scope"]),
            hash64(normalize_text(doc.text).encode("utf-8")),
        )
        kept = state[key]
        if kept == doc.id:
            return None
        log = None
        if args.get("drop_log"):
            log = {"dropped_id": doc.id, "kept_id": kept, "mode": "exact"}
        return Drop(reason="exact_duplicate", log=log)


_register_native(
    "global",
    name="deduplication___exact___fnv",
    args=(_SCOPE_ARG, _DROP_LOG_ARG),
    doc="Drop exact duplicates of normalized text; smallest id survives.",
)(_ExactDedupStage())


def _check_minhash_args(args: dict) -> Optional[str]:
    if args["ngram"] < 1:
        return "ngram must be >= 1"
    if args["num_perm"] < 1 or args["bands"] < 1 or args["rows"] < 1:
        return "num_perm, bands, and rows must be >= 1"
    if args["bands"] * args["rows"] != args["num_perm"]:
        return (
            f"bands*rows must equal num_perm "
            f"({args['bands']}*{args['rows']} != {args['num_perm']})"
        )
    if not 0.0 < args["jaccard_threshold"] <= 1.0:
        return "jaccard_threshold must be in (0, 1]"
    return None


class _MinHashDedupStage(GlobalStage):
    """Near-duplicate removal: MinHash signatures, LSH banding, verification.

    local() computes each record's band keys; merge() buckets them,
    verifies candidate pairs by true Jaccard (re-reading only the shards
    that hold candidates), clusters verified pairs with union-find, and
    keeps the smallest id per cluster.
    """

    def local(
        self, docs: Iterator[Document], ctx: StageContext, args: dict
    ) -> list[tuple[int, str, list[int]]]:
        a_params, b_params = make_permutation_params(ctx.seed, args["num_perm"])
        out = []
        for doc in docs:
            shingles = shingle_set(doc.text, args["ngram"])
            signature = minhash_signature(shingles, a_params, b_params)
            keys = banding_keys(signature, args["bands"], args["rows"])
            out.append((doc.id, _scope_key(doc.source, args["scope"]), keys))
        return out

    def merge(self, locals_: list[list], ctx: StageContext, args: dict) -> dict:
        buckets: dict[tuple[str, int], list[int]] = defaultdict(list)
        for shard_rows in locals_:
            for doc_id, scope, keys in shard_rows:
                for key in keys:
                    buckets[(scope, key)].append(doc_id)

        candidate_pairs: set[tuple[int, int]] = set()
        for ids in buckets.values():
            if len(ids) < 2:
                continue
            ids = sorted(set(ids))
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    candidate_pairs.add((ids[i], ids[j]))

        if not candidate_pairs:
            return {}

        shingles = self._shingles_for(
            {doc_id for pair in candidate_pairs for doc_id in pair}, ctx, args
        )
        threshold = args["jaccard_threshold"]
        uf = UnionFind()
        best_edge: dict[int, float] = {}
        for low, high in sorted(candidate_pairs):
            similarity = jaccard(shingles[low], shingles[high])
            if similarity >= threshold:
                uf.union(low, high)
                for node in (low, high):
                    if similarity > best_edge.get(node, -1.0):
                        best_edge[node] = similarity

        drops: dict[int, tuple[int, float]] = {}
        for members in uf.groups().values():
            members = sorted(members)
            kept = members[0]
            for dropped in members[1:]:
                drops[dropped] = (kept, best_edge[dropped])
        return drops

    def _shingles_for(
        self, wanted: set[int], ctx: StageContext, args: dict
    ) -> dict[int, set[int]]:
        """Shingle sets for candidate ids, reading only their shards.

        A record's shard index is id >> 40 for the whole run (per-record
        stages never move records between shards), so ctx.shard_paths can
        be indexed directly.
        """
        by_shard: dict[int, set[int]] = defaultdict(set)
        for doc_id in wanted:
            shard_index, _ = unpack_id(doc_id)
            by_shard[shard_index].add(doc_id)
        out: dict[int, set[int]] = {}
        for shard_index, ids in sorted(by_shard.items()):
            for doc in iter_shard_documents(ctx.shard_paths[shard_index]):
                if doc.id in ids:
                    out[doc.id] = shingle_set(doc.text, args["ngram"])
        return out

    def apply(self, doc: Document, state: dict, args: dict) -> Optional[Drop]:
        hit = state.get(doc.id)
        if hit is None:
            return None
        kept, similarity = hit
        log = None
        if args.get("drop_log"):
            log = {
                "dropped_id": doc.id,
                "kept_id": kept,
                "mode": "fuzzy",
                "jaccard": similarity,
            }
        return Drop(reason="near_duplicate", log=log)


_register_native(
    "global",
    name="deduplication___minhash___lsh",
    args=(
        ArgSpec("ngram", "int", default=3),
        ArgSpec("num_perm", "int", default=128),
        ArgSpec("bands", "int", default=16),
        ArgSpec("rows", "int", default=8),
        ArgSpec("jaccard_threshold", "float", default=0.8),
        _SCOPE_ARG,
        _DROP_LOG_ARG,
    ),
    doc="Drop near-duplicates via MinHash/LSH with exact Jaccard verification.",
    check_args=_check_minhash_args,
)(_MinHashDedupStage())
