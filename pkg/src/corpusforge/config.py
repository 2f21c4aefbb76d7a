"""Configuration loading, unification, and validation.

Accepts YAML or JSON, from a file path or an inline string, and produces
one unified PipelineConfig. Structural rules (block ordering, bounds) are
checked at load time; registry-dependent rules (processor existence, arg
schemas) are checked by validate_config.

Canonical schema::

    executor: {workers: int, seed: int, shard_size: int, work_dir: str}
    etl:
      - name: category___subcategory___name
        args: {...}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import KeyFormatError, ParseError, ValidationError
from .registry import ProcessorEntry, ProcessorRegistry, parse_key

DEFAULT_SEED = 42
DEFAULT_SHARD_SIZE = 100000
DEFAULT_WORK_DIR = "./.corpusforge"
WORK_DIR_ENV = "CORPUSFORGE_WORK_DIR"

_MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class ExecutorSpec:
    workers: int
    seed: int
    shard_size: int
    work_dir: str


@dataclass(frozen=True)
class ProcessorSpec:
    name: str
    args: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    executor: ExecutorSpec
    etl: tuple[ProcessorSpec, ...]

    def to_dict(self) -> dict:
        return {
            "executor": {
                "workers": self.executor.workers,
                "seed": self.executor.seed,
                "shard_size": self.executor.shard_size,
                "work_dir": self.executor.work_dir,
            },
            "etl": [
                {"name": spec.name, "args": dict(spec.args)} for spec in self.etl
            ],
        }


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: which etl entry, which field, what's wrong."""

    etl_index: int | None
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def default_workers() -> int:
    return os.cpu_count() or 1


def default_work_dir() -> str:
    return os.environ.get(WORK_DIR_ENV) or DEFAULT_WORK_DIR


def load_config(source: str | Path, format: str | None = None) -> PipelineConfig:
    """Parse and structurally validate a config from a path or inline text.

    ``format`` is "yaml" or "json"; when omitted it is inferred from the
    file extension, and inline strings default to YAML (a JSON superset
    here, so inline JSON also parses). Raises ParseError for syntax
    problems and ValidationError for schema violations.
    """
    text, origin = _read_source(source)
    fmt = _resolve_format(source, format, origin)
    raw = _parse(text, fmt)
    return _unify(raw)


def dump_config(cfg: PipelineConfig, format: str = "yaml") -> str:
    """Serialize back to the canonical schema; reloading yields an equal value."""
    data = cfg.to_dict()
    if format == "json":
        return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if format == "yaml":
        return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)
    raise ValueError(f"unknown format {format!r}")


def _read_source(source: str | Path) -> tuple[str, str]:
    """Returns (text, origin) where origin is 'file' or 'inline'."""
    if isinstance(source, Path):
        path = source
    else:
        looks_like_path = source.endswith((".yaml", ".yml", ".json")) or (
            "\n" not in source and os.path.exists(source)
        )
        if not looks_like_path:
            return source, "inline"
        path = Path(source)
    try:
        return path.read_text(encoding="utf-8"), "file"
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc


def _resolve_format(source: str | Path, format: str | None, origin: str) -> str:
    if format is not None:
        if format not in ("yaml", "json"):
            raise ValidationError("format", f"must be 'yaml' or 'json', got {format!r}")
        return format
    if origin == "file" and str(source).endswith(".json"):
        return "json"
    return "yaml"


def _parse(text: str, fmt: str) -> Any:
    if fmt == "json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ParseError(str(getattr(exc, "problem", exc)), line=mark.line + 1, column=mark.column + 1) from exc
        raise ParseError(str(exc)) from exc


def _unify(raw: Any) -> PipelineConfig:
    if raw is None:
        raise ValidationError("<root>", "config is empty")
    if not isinstance(raw, dict):
        raise ValidationError("<root>", f"config must be a mapping, got {type(raw).__name__}")
    unknown = set(raw) - {"executor", "etl"}
    if unknown:
        raise ValidationError("<root>", f"unknown top-level keys: {sorted(unknown)}")

    executor = _unify_executor(raw.get("executor") or {})
    etl = _unify_etl(raw.get("etl"))
    _check_block_order(etl)
    return PipelineConfig(executor=executor, etl=etl)


def _unify_executor(raw: Any) -> ExecutorSpec:
    if not isinstance(raw, dict):
        raise ValidationError("executor", "must be a mapping")
    unknown = set(raw) - {"workers", "seed", "shard_size", "work_dir"}
    if unknown:
        raise ValidationError("executor", f"unknown keys: {sorted(unknown)}")

    workers = _require_int(raw.get("workers", default_workers()), "executor.workers")
    if workers < 1:
        raise ValidationError("executor.workers", f"must be >= 1, got {workers}")

    seed = _require_int(raw.get("seed", DEFAULT_SEED), "executor.seed")
    if not 0 <= seed <= _MAX_SEED:
        raise ValidationError("executor.seed", "must fit in an unsigned 64-bit integer")

    shard_size = _require_int(raw.get("shard_size", DEFAULT_SHARD_SIZE), "executor.shard_size")
    if shard_size < 1:
        raise ValidationError("executor.shard_size", f"must be >= 1, got {shard_size}")

    work_dir = raw.get("work_dir", default_work_dir())
    if not isinstance(work_dir, str) or not work_dir:
        raise ValidationError("executor.work_dir", "must be a non-empty string")

    return ExecutorSpec(workers=workers, seed=seed, shard_size=shard_size, work_dir=work_dir)


def _require_int(value: Any, fieldname: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(fieldname, f"must be an integer, got {value!r}")
    return value


def _unify_etl(raw: Any) -> tuple[ProcessorSpec, ...]:
    if raw is None:
        raise ValidationError("etl", "missing: a pipeline needs at least one block")
    if not isinstance(raw, list) or not raw:
        raise ValidationError("etl", "must be a non-empty list of blocks")
    specs = []
    for i, block in enumerate(raw):
        fieldname = f"etl[{i}]"
        if not isinstance(block, dict):
            raise ValidationError(fieldname, "block must be a mapping")
        unknown = set(block) - {"name", "args"}
        if unknown:
            raise ValidationError(fieldname, f"unknown keys: {sorted(unknown)}")
        name = block.get("name")
        if not isinstance(name, str):
            raise ValidationError(f"{fieldname}.name", "missing or not a string")
        try:
            parse_key(name)
        except KeyFormatError as exc:
            raise ValidationError(f"{fieldname}.name", str(exc)) from exc
        args = block.get("args") or {}
        if not isinstance(args, dict):
            raise ValidationError(f"{fieldname}.args", "must be a mapping")
        for arg_name in args:
            if not isinstance(arg_name, str):
                raise ValidationError(f"{fieldname}.args", f"arg name {arg_name!r} must be a string")
        specs.append(ProcessorSpec(name=name, args=dict(args)))
    return tuple(specs)


def _check_block_order(etl: tuple[ProcessorSpec, ...]) -> None:
    categories = [parse_key(spec.name).category for spec in etl]
    if categories[0] != "data_ingestion":
        raise ValidationError("etl[0]", "first block must be data_ingestion")
    seen_non_ingest = False
    for i, category in enumerate(categories):
        if category == "data_ingestion":
            if seen_non_ingest:
                raise ValidationError(
                    f"etl[{i}]", "data_ingestion blocks must form a contiguous prefix"
                )
        else:
            seen_non_ingest = True
    saving = [i for i, category in enumerate(categories) if category == "data_saving"]
    if len(saving) > 1:
        raise ValidationError(f"etl[{saving[1]}]", "at most one data_saving block")
    if saving and saving[0] != len(etl) - 1:
        raise ValidationError(f"etl[{saving[0]}]", "data_saving must be the last block")


_TYPE_CHECKS = {
    "str": lambda v: isinstance(v, str),
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "list": lambda v: isinstance(v, list),
    "map": lambda v: isinstance(v, dict),
}


def validate_config(cfg: PipelineConfig, reg: ProcessorRegistry) -> list[Diagnostic]:
    """Cross-check every block against the registry.

    Returns diagnostics (empty means valid): unknown processors, unknown /
    missing / ill-typed args, and kind placement problems. A config with
    no diagnostics cannot fail name or arg-shape resolution at run time.
    """
    diagnostics: list[Diagnostic] = []
    entries: list[ProcessorEntry | None] = []
    for i, spec in enumerate(cfg.etl):
        if spec.name in reg.entries:
            entries.append(reg.entries[spec.name])
        else:
            entries.append(None)
            try:
                reg.lookup(spec.name)
            except Exception as exc:
                diagnostics.append(Diagnostic(i, f"etl[{i}].name", str(exc)))

    _check_kind_placement(entries, diagnostics)

    for i, (spec, entry) in enumerate(zip(cfg.etl, entries)):
        if entry is None:
            continue
        diagnostics.extend(_check_args(i, spec, entry))
    return diagnostics


def _check_kind_placement(
    entries: list[ProcessorEntry | None], diagnostics: list[Diagnostic]
) -> None:
    known = [(i, e) for i, e in enumerate(entries) if e is not None]
    if not known:
        return
    if entries[0] is not None and entries[0].kind != "ingest":
        diagnostics.append(
            Diagnostic(0, "etl[0]", "pipeline must start with an ingest-kind processor")
        )
    seen_non_ingest = False
    for i, entry in known:
        if entry.kind == "ingest":
            if seen_non_ingest:
                diagnostics.append(
                    Diagnostic(
                        i, f"etl[{i}]", "ingest-kind processors must form a contiguous prefix"
                    )
                )
        else:
            seen_non_ingest = True
        if entry.kind == "save" and i != len(entries) - 1:
            diagnostics.append(
                Diagnostic(i, f"etl[{i}]", "save-kind processor must be the last block")
            )


def _check_args(i: int, spec: ProcessorSpec, entry: ProcessorEntry) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    schema = {arg.name: arg for arg in entry.arg_schema}
    for arg_name, value in spec.args.items():
        arg = schema.get(arg_name)
        if arg is None:
            out.append(
                Diagnostic(
                    i,
                    f"etl[{i}].args.{arg_name}",
                    f"unknown arg for {spec.name} (accepts: {sorted(schema) or 'none'})",
                )
            )
            continue
        if not _TYPE_CHECKS[arg.type](value):
            out.append(
                Diagnostic(
                    i,
                    f"etl[{i}].args.{arg_name}",
                    f"expected {arg.type}, got {type(value).__name__}",
                )
            )
            continue
        if arg.choices is not None and value not in arg.choices:
            out.append(
                Diagnostic(
                    i,
                    f"etl[{i}].args.{arg_name}",
                    f"must be one of {list(arg.choices)}, got {value!r}",
                )
            )
    for arg in entry.arg_schema:
        if arg.required and arg.name not in spec.args:
            out.append(
                Diagnostic(
                    i, f"etl[{i}].args.{arg.name}", f"missing required arg for {spec.name}"
                )
            )
    if entry.check_args is not None and not any(d.etl_index == i for d in out):
        message = entry.check_args(resolve_args(spec, entry))
        if message:
            out.append(Diagnostic(i, f"etl[{i}].args", message))
    return out


def resolve_args(spec: ProcessorSpec, entry: ProcessorEntry) -> dict:
    """Config args with schema defaults filled in; floats coerced."""
    resolved: dict[str, Any] = {}
    for arg in entry.arg_schema:
        if arg.name in spec.args:
            value = spec.args[arg.name]
            if arg.type == "float" and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            resolved[arg.name] = value
        elif arg.default is not None or not arg.required:
            resolved[arg.name] = arg.default
    return resolved
