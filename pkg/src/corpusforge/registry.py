"""Processor catalog keyed by the triple-underscore naming convention.

Every data processor is addressed as ``category___subcategory___name``.
Native processors self-register at import; embedding programs add their
own with the register_processor decorator (or ProcessorRegistry.register)
before building a pipeline, then reference them by name in config.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import DuplicateKeyError, KeyFormatError, ProcessorNotFound

KINDS = ("ingest", "map", "filter", "global", "save")

# Parts are lowercase identifiers. Leading/trailing underscores are
# rejected because they would make the formatted key ambiguous to split
# (a_ + b and a + _b both format to "a____b").
_PART_RE = re.compile(r"[a-z0-9](?:[a-z0-9_]*[a-z0-9])?$")
_SEP = "___"


@dataclass(frozen=True)
class ProcessorKey:
    category: str
    subcategory: str
    name: str

    def __str__(self) -> str:
        return format_key(self)


def parse_key(s: str) -> ProcessorKey:
    """Split a key string on the exact ``___`` separator and validate parts.

    Raises KeyFormatError naming the offending fragment.
    """
    parts = s.split(_SEP)
    if len(parts) != 3:
        raise KeyFormatError(
            f"processor key {s!r} must have exactly 3 parts separated by "
            f"'{_SEP}', got {len(parts)}"
        )
    for part in parts:
        if not _PART_RE.fullmatch(part) or _SEP in part:
            raise KeyFormatError(
                f"invalid key part {part!r} in {s!r}: parts are lowercase "
                "[a-z0-9_], no leading/trailing underscore"
            )
    return ProcessorKey(*parts)


def format_key(key: ProcessorKey) -> str:
    return _SEP.join((key.category, key.subcategory, key.name))


@dataclass(frozen=True)
class ArgSpec:
    """Declared shape of one processor argument."""

    name: str
    type: str  # str | int | float | bool | list | map
    required: bool = False
    default: Any = None
    choices: tuple[Any, ...] | None = None


@dataclass(frozen=True)
class ProcessorEntry:
    """A registered processor: key, execution kind, callable, arg schema.

    kind governs placement and execution:
      ingest: head of the pipeline; fn(ctx, **args) yields Documents.
      map:    fn(doc, **args) -> Document, record counts unchanged.
      filter: fn(doc, **args) -> None to keep, or a drop-reason string.
      global: fn is an object with local/merge/apply (see engine module).
      save:   tail of the pipeline; fn(shard_set, ctx, **args) -> paths.

    prepare, when set, runs once in the parent process per stage:
    prepare(args, ctx) -> args, used to compile patterns or load files so
    workers receive ready-to-use state.
    """

    key: ProcessorKey
    kind: str
    fn: Callable[..., Any]
    arg_schema: tuple[ArgSpec, ...] = ()
    doc: str = ""
    prepare: Optional[Callable[..., dict]] = None
    check_args: Optional[Callable[[dict], Optional[str]]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown processor kind {self.kind!r}")


@dataclass
class ProcessorRegistry:
    """Mutable during setup, read-only once a pipeline runs."""

    entries: dict[str, ProcessorEntry] = field(default_factory=dict)

    def register(self, entry: ProcessorEntry) -> None:
        key_str = format_key(entry.key)
        if key_str in self.entries:
            raise DuplicateKeyError(f"processor {key_str!r} is already registered")
        self.entries[key_str] = entry

    def lookup(self, key: ProcessorKey | str) -> ProcessorEntry:
        key_str = key if isinstance(key, str) else format_key(key)
        entry = self.entries.get(key_str)
        if entry is None:
            hints = self._nearest(key_str, 3)
            hint_text = f"; nearest: {', '.join(hints)}" if hints else ""
            raise ProcessorNotFound(f"unknown processor {key_str!r}{hint_text}")
        return entry

    def list_processors(self, category: str | None = None) -> list[tuple[str, str, str]]:
        """Sorted (key, kind, doc) rows, optionally one category only."""
        rows = [
            (key_str, entry.kind, entry.doc)
            for key_str, entry in self.entries.items()
            if category is None or entry.key.category == category
        ]
        return sorted(rows)

    def _nearest(self, target: str, limit: int) -> list[str]:
        scored = sorted(
            (( _edit_distance(target, known), known) for known in self.entries),
            key=lambda pair: (pair[0], pair[1]),
        )
        return [known for _, known in scored[:limit]]


def _edit_distance(a: str, b: str) -> int:
    # Plain Levenshtein; the catalog is small so O(len*len) is fine.
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# Native processors append here as their defining modules are imported;
# user extensions land in a separate list so the native catalog stays
# stable for inspection and tests.
_NATIVE: list[ProcessorEntry] = []
_EXTENSIONS: list[ProcessorEntry] = []


def _make_entry(
    obj: Callable[..., Any],
    kind: str,
    name: str | None,
    args: tuple[ArgSpec, ...],
    doc: str,
    prepare: Optional[Callable[..., dict]],
    check_args: Optional[Callable[[dict], Optional[str]]],
) -> ProcessorEntry:
    key = parse_key(name if name is not None else obj.__name__)
    if doc:
        one_line = doc
    else:
        doc_text = (getattr(obj, "__doc__", None) or "").strip()
        one_line = doc_text.splitlines()[0] if doc_text else ""
    return ProcessorEntry(
        key=key,
        kind=kind,
        fn=obj,
        arg_schema=tuple(args),
        doc=one_line,
        prepare=prepare,
        check_args=check_args,
    )


def _register_native(
    kind: str,
    *,
    name: str | None = None,
    args: tuple[ArgSpec, ...] = (),
    doc: str = "",
    prepare: Optional[Callable[..., dict]] = None,
    check_args: Optional[Callable[[dict], Optional[str]]] = None,
):
    def deco(obj):
        _NATIVE.append(_make_entry(obj, kind, name, args, doc, prepare, check_args))
        return obj

    return deco


def register_processor(
    kind: str,
    *,
    name: str | None = None,
    args: tuple[ArgSpec, ...] = (),
    doc: str = "",
    prepare: Optional[Callable[..., dict]] = None,
    check_args: Optional[Callable[[dict], Optional[str]]] = None,
):
    """Decorator registering a user-defined processor.

    The processor's key is the decorated function's own name (or the
    ``name`` override), so defining ``def custom___demo___add_one(doc)``
    and decorating it makes ``custom___demo___add_one`` addressable from
    config. Must run before default_registry() is called for the run.
    Processors must be module-level so worker processes can import them.
    """

    def deco(obj):
        entry = _make_entry(obj, kind, name, args, doc, prepare, check_args)
        for existing in _EXTENSIONS:
            if existing.key == entry.key:
                raise DuplicateKeyError(
                    f"extension {format_key(entry.key)!r} is already registered"
                )
        _EXTENSIONS.append(entry)
        return obj

    return deco


def clear_extensions() -> None:
    """Drop all user-registered extensions (intended for tests)."""
    _EXTENSIONS.clear()


def default_registry(include_extensions: bool = True) -> ProcessorRegistry:
    """Fresh registry holding every native processor (plus extensions)."""
    # Imported here for their registration side effects; top-level imports
    # would cycle (processor modules import registry for the decorator).
    from . import cleaning_quality, decontamination, dedup, io, pii_safety, utilities  # noqa: F401

    reg = ProcessorRegistry()
    for entry in _NATIVE:
        reg.register(entry)
    if include_extensions:
        for entry in _EXTENSIONS:
            reg.register(entry)
    return reg
