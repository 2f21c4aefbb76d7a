"""Cleaning maps and quality filters.

Cleaning maps are idempotent text rewrites; quality filters drop records
against configurable heuristic thresholds, reporting the first violated
rule in a fixed order so RunReports are reproducible. The default numbers
follow published web-corpus filtering practice and are defaults, not
truths: every one is an arg.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .core import Document, normalize_text, tokenize_words
from .registry import ArgSpec, _register_native

# CR counts as a space so CRLF endings normalize to LF
_SPACES_RE = re.compile(r"[ \t\r]+")
# after space-run collapse, any whitespace before a newline is one space
_TRAIL_RE = re.compile(r" (?=\n)")
_NEWLINES_RE = re.compile(r"\n{3,}")


@_register_native(
    "map",
    doc="Collapse space runs, trailing whitespace, and blank-line stacks.",
)
def cleaning___text___normalize_whitespace(doc: Document) -> Document:
    """Collapse space/tab runs to one space, >=3 newlines to two, strip ends."""
    text = _SPACES_RE.sub(" ", doc.text)
    text = _TRAIL_RE.sub("", text)
    text = _NEWLINES_RE.sub("\n\n", text)
    doc.text = text.strip()
    return doc


@_register_native(
    "map",
    doc="Remove control and format characters except newline and tab.",
)
def cleaning___text___remove_control_chars(doc: Document) -> Document:
    """Strip Unicode Cc/Cf characters, keeping newline and tab."""
    doc.text = "".join(
        ch
        for ch in doc.text
        if ch in "\n\t" or unicodedata.category(ch) not in ("Cc", "Cf")
    )
    return doc


def _check_length_args(args: dict) -> Optional[str]:
    for low_name, high_name in (("min_chars", "max_chars"), ("min_words", "max_words")):
        low, high = args[low_name], args[high_name]
        if low < 0:
            return f"{low_name} must be >= 0"
        if low > high:
            return f"{low_name} ({low}) exceeds {high_name} ({high})"
    return None


@_register_native(
    "filter",
    args=(
        ArgSpec("min_chars", "int", default=1),
        ArgSpec("max_chars", "int", default=1000000),
        ArgSpec("min_words", "int", default=1),
        ArgSpec("max_words", "int", default=1000000),
    ),
    doc="Drop records outside character/word count bounds.",
    check_args=_check_length_args,
)
def cleaning___filter___length(
    doc: Document,
    min_chars: int = 1,
    max_chars: int = 1000000,
    min_words: int = 1,
    max_words: int = 1000000,
) -> Optional[str]:
    """Bounds are evaluated on the normalized text; reason is "length"."""
    normalized = normalize_text(doc.text)
    n_chars = len(normalized)
    n_words = len(normalized.split(" ")) if normalized else 0
    if not (min_chars <= n_chars <= max_chars and min_words <= n_words <= max_words):
        return "length"
    return None


@dataclass(frozen=True)
class QualityStats:
    word_count: int
    mean_word_len: float
    symbol_ratio: float
    dup_line_frac: float
    top_bigram_frac: float


def compute_quality_stats(text: str) -> QualityStats:
    """Per-record quality metrics.

    symbol_ratio counts non-alphanumeric, non-whitespace characters over
    all characters of the raw text. dup_line_frac is the fraction of
    non-empty lines whose content occurs more than once (blank separator
    lines are ignored so ordinary multi-paragraph prose is not penalized).
    top_bigram_frac is the most frequent word bigram's share of all
    bigrams.
    """
    tokens = tokenize_words(text)
    word_count = len(tokens)
    mean_word_len = sum(len(tok) for tok in tokens) / word_count if word_count else 0.0

    if text:
        symbols = sum(1 for ch in text if not ch.isalnum() and not ch.isspace())
        symbol_ratio = symbols / len(text)
    else:
        symbol_ratio = 0.0

    lines = [line.strip() for line in text.split("\n")]
    non_empty = [line for line in lines if line]
    if non_empty:
        line_counts = Counter(non_empty)
        duplicated = sum(1 for line in non_empty if line_counts[line] > 1)
        dup_line_frac = duplicated / len(non_empty)
    else:
        dup_line_frac = 0.0

    if word_count >= 2:
        bigram_counts = Counter(zip(tokens, tokens[1:]))
        top_bigram_frac = max(bigram_counts.values()) / (word_count - 1)
    else:
        top_bigram_frac = 0.0

    return QualityStats(
        word_count=word_count,
        mean_word_len=mean_word_len,
        symbol_ratio=symbol_ratio,
        dup_line_frac=dup_line_frac,
        top_bigram_frac=top_bigram_frac,
    )


@_register_native(
    "map",
    doc="Attach quality metrics to meta as quality_* fields.",
)
def quality___stats___compute(doc: Document) -> Document:
    stats = compute_quality_stats(doc.text)
    doc.meta["quality_word_count"] = stats.word_count
    doc.meta["quality_mean_word_len"] = stats.mean_word_len
    doc.meta["quality_symbol_ratio"] = stats.symbol_ratio
    doc.meta["quality_dup_line_frac"] = stats.dup_line_frac
    doc.meta["quality_top_bigram_frac"] = stats.top_bigram_frac
    return doc


@_register_native(
    "filter",
    args=(
        ArgSpec("min_words", "int", default=5),
        ArgSpec("max_words", "int", default=500000),
        ArgSpec("min_mean_word_len", "float", default=2.0),
        ArgSpec("max_mean_word_len", "float", default=12.0),
        ArgSpec("max_symbol_ratio", "float", default=0.4),
        ArgSpec("max_dup_line_frac", "float", default=0.3),
        ArgSpec("max_top_bigram_frac", "float", default=0.2),
    ),
    doc="Drop low-quality records; reason names the first violated rule.",
)
def quality___filter___heuristic(
    doc: Document,
    min_words: int = 5,
    max_words: int = 500000,
    min_mean_word_len: float = 2.0,
    max_mean_word_len: float = 12.0,
    max_symbol_ratio: float = 0.4,
    max_dup_line_frac: float = 0.3,
    max_top_bigram_frac: float = 0.2,
) -> Optional[str]:
    """Rules are checked in a fixed order; the first violation is the reason:
    word_count, mean_word_len, symbol_ratio, dup_line_frac, top_bigram_frac.
    """
    stats = compute_quality_stats(doc.text)
    if not min_words <= stats.word_count <= max_words:
        return "word_count"
    if not min_mean_word_len <= stats.mean_word_len <= max_mean_word_len:
        return "mean_word_len"
    if stats.symbol_ratio > max_symbol_ratio:
        return "symbol_ratio"
    if stats.dup_line_frac > max_dup_line_frac:
        return "dup_line_frac"
    if stats.top_bigram_frac > max_top_bigram_frac:
        return "top_bigram_frac"
    return None
