"""Canonical record model and the deterministic primitives built on it.

Everything that fingerprints or compares text (dedup, decontamination,
quality metrics) goes through normalize_text / tokenize_words / hash64 so
that matching is insensitive to case and whitespace while the stored text
is never altered.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Union

from . import kernels
from .errors import SchemaError

Scalar = Union[str, int, float, bool]

# id packing: shard index in the high bits, record index in the low 40.
RECORD_BITS = 40
MAX_RECORDS_PER_SHARD = 1 << RECORD_BITS
MAX_SHARDS = 1 << 24

_WS_RE = re.compile(r"\s+")


@dataclass
class Document:
    """One text record flowing through the pipeline.

    Attributes:
        id: stable 64-bit identifier, shard_index * 2^40 + record_index.
            Assigned once at ingestion and never reassigned by transforms.
        text: the payload; may be empty but never absent.
        source: short tag naming the originating dataset.
        meta: flat string-to-scalar map (str, int, float, bool values).
    """

    id: int
    text: str
    source: str = ""
    meta: dict[str, Scalar] = field(default_factory=dict)


def pack_id(shard_index: int, record_index: int) -> int:
    """Combine shard and record position into one stable Document id."""
    if not 0 <= shard_index < MAX_SHARDS:
        raise ValueError(f"shard_index {shard_index} out of range")
    if not 0 <= record_index < MAX_RECORDS_PER_SHARD:
        raise ValueError(f"record_index {record_index} out of range")
    return (shard_index << RECORD_BITS) | record_index


def unpack_id(doc_id: int) -> tuple[int, int]:
    """Inverse of pack_id: (shard_index, record_index)."""
    return doc_id >> RECORD_BITS, doc_id & (MAX_RECORDS_PER_SHARD - 1)


def normalize_text(text: str) -> str:
    """Canonical matching form: NFKC, casefolded, whitespace collapsed.

    All whitespace runs (tabs, newlines included) become a single space and
    the ends are stripped. Idempotent, so repeated normalization is safe.
    """
    folded = unicodedata.normalize("NFKC", text).casefold()
    if not folded.isascii():
        # Casefolding can denormalize (Greek iota-subscript expansions), so
        # refold until stable; two passes are the observed worst case.
        while True:
            again = unicodedata.normalize("NFKC", folded).casefold()
            if again == folded:
                break
            folded = again
    return _WS_RE.sub(" ", folded).strip()


def tokenize_words(text: str) -> list[str]:
    """Words of the normalized text; empty input gives an empty list."""
    normalized = normalize_text(text)
    if not normalized:
        return []
    return normalized.split(" ")


def hash64(data: bytes) -> int:
    """FNV-1a 64-bit fingerprint; stable across runs and platforms."""
    return kernels.fnv1a64(data)


# Shard files and saved outputs share one canonical JSON encoding so that
# equal datasets are byte-identical regardless of how they were produced.


def document_to_line(doc: Document) -> str:
    return json.dumps(
        {"id": doc.id, "text": doc.text, "source": doc.source, "meta": doc.meta},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def document_from_line(line: str) -> Document:
    raw = json.loads(line)
    return Document(id=raw["id"], text=raw["text"], source=raw["source"], meta=raw["meta"])


def check_meta_value(key: str, value: object) -> Scalar:
    """Validate one meta entry; bool must be tested before int."""
    if isinstance(value, bool) or isinstance(value, (str, int, float)):
        return value
    raise SchemaError(f"meta value for {key!r} must be a string, number, or boolean")
