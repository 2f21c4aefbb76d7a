"""PII redaction and wordlist-based safety filtering.

Redaction replaces matches with fixed placeholder tokens rather than
deleting them, preserving sentence structure. Patterns favor precision
over recall: a missed phone number is cheaper than mangling dates,
version strings, or IP addresses. Rules run in a fixed order (email,
phone, ipv4, ssn, credit_card), each over the text already redacted by
earlier rules, so replacement tokens never re-match.
"""

from __future__ import annotations

import re
from typing import Callable, Optional

from .core import Document, normalize_text, tokenize_words
from .engine import StageContext
from .errors import IoError
from .registry import ArgSpec, _register_native

RULE_ORDER = ("email", "phone", "ipv4", "ssn", "credit_card")

REPLACEMENTS = {
    "email": "<|EMAIL|>",
    "phone": "<|PHONE|>",
    "ipv4": "<|IP|>",
    "ssn": "<|SSN|>",
    "credit_card": "<|CARD|>",
}

# RFC-5322-lite: local@domain.tld with at least one dot in the domain.
_EMAIL = r"[A-Za-z0-9][A-Za-z0-9._%+-]*@[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?(?:\.[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?)+"

# Phone candidates grab a whole digit/separator run; the validator then
# demands 7-15 digits plus at least two separator/anchor cues and rejects
# runs shaped like SSNs, dotted quads, or dashed dates. Grabbing the whole
# run means an overlong run (e.g. a 16-digit card) is skipped intact
# instead of having a 15-digit suffix redacted.
_PHONE = r"(?<![0-9A-Za-z.+-])\+?[\d(][\d ().-]*\d(?![0-9A-Za-z.-])"

_OCTET = r"(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)"
_IPV4 = rf"(?<![\w.]){_OCTET}(?:\.{_OCTET}){{3}}(?![\w.])"

_SSN = r"(?<![0-9A-Za-z-])\d{3}-\d{2}-\d{4}(?![0-9A-Za-z-])"

# 13-19 digits with optional single spaces/dashes between digits.
_CARD = r"(?<![0-9A-Za-z-])\d(?:[ -]?\d){12,18}(?![0-9A-Za-z-])"

DEFAULT_PATTERNS = {
    "email": _EMAIL,
    "phone": _PHONE,
    "ipv4": _IPV4,
    "ssn": _SSN,
    "credit_card": _CARD,
}

_PHONE_REJECT_SHAPES = (
    re.compile(r"\d{3}-\d{2}-\d{4}$"),       # SSN
    re.compile(r"\d{1,3}(?:\.\d{1,3}){3}$"),  # dotted quad
    re.compile(r"\d{4}-\d{2}-\d{2}$"),       # ISO date
    re.compile(r"\d{1,2}-\d{1,2}-\d{4}$"),   # day-month-year date
)


def _valid_phone(span: str) -> bool:
    digits = sum(ch.isdigit() for ch in span)
    if not 7 <= digits <= 15:
        return False
    for shape in _PHONE_REJECT_SHAPES:
        if shape.fullmatch(span):
            return False
    cues = sum(ch in " ().-" for ch in span) + span.startswith("+")
    return cues >= 2


def luhn_check(digits: str) -> bool:
    """Standard Luhn mod-10 validity; raises ValueError on non-digit input."""
    if not digits or not digits.isdigit():
        raise ValueError(f"luhn_check needs decimal digits, got {digits!r}")
    total = 0
    for i, ch in enumerate(reversed(digits)):
        value = ord(ch) - 48
        if i % 2 == 1:
            value *= 2
            if value > 9:
                value -= 9
        total += value
    return total % 10 == 0


def _valid_card(span: str) -> bool:
    digits = "".join(ch for ch in span if ch.isdigit())
    return 13 <= len(digits) <= 19 and luhn_check(digits)


_VALIDATORS: dict[str, Callable[[str], bool]] = {
    "phone": _valid_phone,
    "credit_card": _valid_card,
}


def compile_rules(
    kinds: Optional[list[str]] = None, patterns: Optional[dict] = None
) -> list[tuple[str, re.Pattern, str, Optional[Callable[[str], bool]]]]:
    """Ordered (kind, compiled pattern, replacement, validator) rules."""
    wanted = list(RULE_ORDER) if kinds is None else kinds
    unknown = [kind for kind in wanted if kind not in RULE_ORDER]
    if unknown:
        raise ValueError(f"unknown pii kinds: {unknown}; valid: {list(RULE_ORDER)}")
    overrides = patterns or {}
    rules = []
    for kind in RULE_ORDER:
        if kind not in wanted:
            continue
        source = overrides.get(kind, DEFAULT_PATTERNS[kind])
        rules.append((kind, re.compile(source), REPLACEMENTS[kind], _VALIDATORS.get(kind)))
    return rules


def redact_text(text: str, rules) -> tuple[str, dict[str, int]]:
    """Apply each rule in order to the already-redacted text of earlier ones."""
    counts: dict[str, int] = {}

    for kind, pattern, replacement, validator in rules:
        hits = 0

        def substitute(match: re.Match) -> str:
            nonlocal hits
            span = match.group(0)
            if validator is not None and not validator(span):
                return span
            hits += 1
            return replacement

        text = pattern.sub(substitute, text)
        if hits:
            counts[kind] = hits
    return text, counts


def _check_pii_args(args: dict) -> Optional[str]:
    kinds = args.get("kinds")
    if kinds is not None:
        unknown = [kind for kind in kinds if kind not in RULE_ORDER]
        if unknown:
            return f"unknown pii kinds: {unknown}; valid: {list(RULE_ORDER)}"
    patterns = args.get("patterns")
    if patterns:
        for kind, source in patterns.items():
            if kind not in RULE_ORDER:
                return f"pattern override for unknown kind {kind!r}"
            try:
                re.compile(source)
            except re.error as exc:
                return f"invalid pattern for {kind}: {exc}"
    return None


def _prepare_pii(args: dict, ctx: StageContext) -> dict:
    return {"rules": compile_rules(args.get("kinds"), args.get("patterns"))}


@_register_native(
    "map",
    args=(
        ArgSpec("kinds", "list"),
        ArgSpec("patterns", "map"),
    ),
    doc="Replace emails, phones, IPs, SSNs, and cards with placeholders.",
    prepare=_prepare_pii,
    check_args=_check_pii_args,
)
def pii___regex___redact(doc: Document, rules) -> Document:
    """Redact PII spans; meta gains a pii_<kind> count per redacted kind."""
    doc.text, counts = redact_text(doc.text, rules)
    for kind, count in counts.items():
        doc.meta[f"pii_{kind}"] = count
    return doc


def load_wordlist(path: str) -> frozenset[str]:
    """One term per line, '#' comments and blanks ignored, normalized."""
    try:
        raw = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise IoError(f"cannot read wordlist {path}: {exc}") from exc
    terms = set()
    for line in raw.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        term = normalize_text(line)
        if term:
            terms.add(term)
    return frozenset(terms)


def _prepare_wordlist(args: dict, ctx: StageContext) -> dict:
    return {
        "terms": load_wordlist(args["wordlist_path"]),
        "threshold": args["threshold"],
        "kind": args["kind"],
    }


@_register_native(
    "filter",
    args=(
        ArgSpec("wordlist_path", "str", required=True),
        ArgSpec("threshold", "float", default=0.01),
        ArgSpec("kind", "str", default="toxicity", choices=("toxicity", "bias")),
    ),
    doc="Drop records whose flagged-token fraction exceeds the threshold.",
    prepare=_prepare_wordlist,
)
def safety___wordlist___filter(
    doc: Document, terms: frozenset[str], threshold: float, kind: str
) -> Optional[str]:
    """Flagged fraction = |tokens in terms| / word_count; drop iff greater
    than threshold (strictly) and the document has at least one word."""
    if not terms:
        return None
    tokens = tokenize_words(doc.text)
    if not tokens:
        return None
    flagged = sum(1 for token in tokens if token in terms)
    if flagged / len(tokens) > threshold:
        return kind
    return None
