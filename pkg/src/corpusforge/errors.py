"""Exception types shared across the package.

The CLI maps these onto stable exit codes: configuration and validation
problems exit 2, I/O problems exit 3, stage/data failures during a run
exit 4.
"""

from __future__ import annotations


class CorpusforgeError(Exception):
    """Base class for all package errors."""


class ParseError(CorpusforgeError):
    """Config source is not syntactically valid YAML/JSON."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class ValidationError(CorpusforgeError):
    """Config violates the schema; carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class KeyFormatError(CorpusforgeError):
    """Processor key string does not follow category___subcategory___name."""


class DuplicateKeyError(CorpusforgeError):
    """A processor key was registered twice."""


class ProcessorNotFound(CorpusforgeError):
    """Lookup of an unregistered processor key."""


class IoError(CorpusforgeError):
    """File system problem: missing input, unreadable file, failed write."""


class SchemaError(CorpusforgeError):
    """Input record violates the expected shape (missing field, bad type)."""


class EncodingError(CorpusforgeError):
    """Input file is not valid UTF-8."""


class CsvParseError(CorpusforgeError):
    """CSV row is structurally invalid."""


class EmptyInput(CorpusforgeError):
    """An operation that needs at least one element got none."""


class StageError(CorpusforgeError):
    """A processor failed during a pipeline run.

    Raised in the parent process with stage/shard/record context attached;
    the offending record id is part of the message so it survives any
    transport.
    """

    def __init__(
        self,
        message: str,
        *,
        stage_index: int | None = None,
        shard_index: int | None = None,
        record_id: int | None = None,
    ):
        parts = []
        if stage_index is not None:
            parts.append(f"stage {stage_index}")
        if shard_index is not None:
            parts.append(f"shard {shard_index}")
        if record_id is not None:
            parts.append(f"record {record_id}")
        prefix = f"[{', '.join(parts)}] " if parts else ""
        super().__init__(prefix + message)
        self.stage_index = stage_index
        self.shard_index = shard_index
        self.record_id = record_id
