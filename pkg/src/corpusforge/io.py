"""Native ingestion and saving processors over local files.

JSONL is the package's own record schema (id/meta/source/text per line);
CSV is supported for foreign tabular data. Saving copies the canonical
shard bytes, so save-then-ingest round trips preserve text, source, and
meta exactly (ids are reassigned on re-ingest by design).
"""

from __future__ import annotations

import csv
import json
import os
import shutil
from pathlib import Path
from typing import Iterator, Optional

from .core import Document, Scalar, check_meta_value
from .engine import ShardSet, StageContext
from .errors import CsvParseError, EncodingError, IoError, SchemaError
from .registry import ArgSpec, _register_native

_INGEST_ARGS = (
    ArgSpec("path", "str", required=True),
    ArgSpec("text_field", "str", default="text"),
    ArgSpec("source_tag", "str"),
)


def _input_files(path_arg: str) -> list[Path]:
    path = Path(path_arg)
    if not path.exists():
        raise IoError(f"input path does not exist: {path_arg}")
    if path.is_dir():
        files = sorted(
            (child for child in path.iterdir() if child.is_file()),
            key=lambda child: str(child),
        )
        if not files:
            raise IoError(f"input directory is empty: {path_arg}")
        return files
    return [path]


def _default_source(path_arg: str) -> str:
    return os.path.basename(path_arg.rstrip("/")) or path_arg


@_register_native(
    "ingest",
    args=_INGEST_ARGS,
    doc="Load JSON Lines files; one Document per line.",
)
def data_ingestion___jsonl___load(
    ctx: StageContext, path: str, text_field: str = "text", source_tag: Optional[str] = None
) -> Iterator[Document]:
    """Yield Documents from a JSONL file or directory of files.

    Files are read in lexicographic path order. Per line: ``text_field``
    becomes the text, a "source" key becomes the source (unless
    source_tag is given), a "meta" object is merged into meta, an "id" key
    is dropped (ids are reassigned), and any other key lands in meta:
    scalars as-is, null skipped, nested values as canonical JSON strings.
    """
    if not text_field:
        raise SchemaError("text_field must be non-empty")
    for file in _input_files(path):
        fallback_source = source_tag if source_tag is not None else _default_source(path)
        try:
            with open(file, encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    yield _document_from_json_line(
                        line, file, line_no, text_field, source_tag, fallback_source
                    )
        except UnicodeDecodeError as exc:
            raise EncodingError(f"{file} is not valid UTF-8: {exc}") from exc
        except OSError as exc:
            raise IoError(f"cannot read {file}: {exc}") from exc


def _document_from_json_line(
    line: str,
    file: Path,
    line_no: int,
    text_field: str,
    source_tag: Optional[str],
    fallback_source: str,
) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{file}:{line_no}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{file}:{line_no}: line must be a JSON object")
    if text_field not in raw:
        raise SchemaError(f"{file}:{line_no}: missing field {text_field!r}")
    text = raw[text_field]
    if not isinstance(text, str):
        raise SchemaError(f"{file}:{line_no}: field {text_field!r} must be a string")

    source = fallback_source
    if source_tag is None and isinstance(raw.get("source"), str):
        source = raw["source"]

    meta: dict[str, Scalar] = {}
    meta_obj = raw.get("meta")
    for key, value in raw.items():
        if key in (text_field, "id", "source", "meta"):
            continue
        if value is None:
            continue
        if isinstance(value, bool) or isinstance(value, (str, int, float)):
            meta[key] = value
        else:
            meta[key] = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    if isinstance(meta_obj, dict):
        for key, value in meta_obj.items():
            try:
                meta[str(key)] = check_meta_value(str(key), value)
            except SchemaError as exc:
                raise SchemaError(f"{file}:{line_no}: {exc}") from exc
    elif meta_obj is not None:
        meta["meta"] = json.dumps(meta_obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    return Document(id=0, text=text, source=source, meta=meta)


@_register_native(
    "ingest",
    args=_INGEST_ARGS,
    doc="Load RFC-4180 CSV files with a header row.",
)
def data_ingestion___csv___load(
    ctx: StageContext, path: str, text_field: str = "text", source_tag: Optional[str] = None
) -> Iterator[Document]:
    """Yield Documents from CSV files; non-text columns become string meta."""
    if not text_field:
        raise SchemaError("text_field must be non-empty")
    for file in _input_files(path):
        source = source_tag if source_tag is not None else _default_source(path)
        try:
            with open(file, encoding="utf-8", newline="") as handle:
                reader = csv.reader(handle)
                try:
                    header = next(reader)
                except StopIteration:
                    raise SchemaError(f"{file}: empty CSV (no header row)") from None
                if text_field not in header:
                    raise SchemaError(f"{file}: header lacks column {text_field!r}")
                text_idx = header.index(text_field)
                for row in reader:
                    if not row:
                        continue
                    if len(row) != len(header):
                        raise CsvParseError(
                            f"{file}: row {reader.line_num} has {len(row)} fields, "
                            f"header has {len(header)}"
                        )
                    meta = {
                        name: value
                        for i, (name, value) in enumerate(zip(header, row))
                        if i != text_idx
                    }
                    yield Document(id=0, text=row[text_idx], source=source, meta=meta)
        except UnicodeDecodeError as exc:
            raise EncodingError(f"{file} is not valid UTF-8: {exc}") from exc
        except csv.Error as exc:
            raise CsvParseError(f"{file}: {exc}") from exc
        except OSError as exc:
            raise IoError(f"cannot read {file}: {exc}") from exc


@_register_native(
    "save",
    args=(
        ArgSpec("path", "str", required=True),
        ArgSpec("shard_output", "bool", default=False),
    ),
    doc="Write the dataset as canonical JSONL plus a manifest.",
)
def data_saving___jsonl___save(
    shard_set: ShardSet, ctx: StageContext, path: str, shard_output: bool = False
) -> list[str]:
    """Persist the final ShardSet under ``path``.

    shard_output=True writes one part-{index:05}.jsonl per shard;
    otherwise everything is concatenated into data.jsonl in shard order.
    manifest.json records counts, the executed stage names, and the config
    hash. Bytes are copied from the already-canonical shards, so equal
    datasets produce identical output files.
    """
    out_dir = Path(path)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written: list[str] = []
        if shard_output:
            for shard in shard_set.shards:
                target = out_dir / f"part-{shard.index:05}.jsonl"
                shutil.copyfile(shard.path, target)
                written.append(str(target))
        else:
            target = out_dir / "data.jsonl"
            with open(target, "wb") as out_handle:
                for shard in shard_set.shards:
                    with open(shard.path, "rb") as in_handle:
                        shutil.copyfileobj(in_handle, out_handle)
            written.append(str(target))

        manifest = {
            "records": shard_set.total_records(),
            "shards": len(shard_set.shards),
            "stages": list(ctx.stage_names),
            "config_hash": ctx.config_hash,
        }
        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        written.append(str(manifest_path))
        return written
    except OSError as exc:
        raise IoError(f"cannot write output under {path}: {exc}") from exc
