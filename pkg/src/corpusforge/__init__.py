"""corpusforge: config-driven ETL pipelines for LLM training corpora.

Pipelines are ordered lists of named processor blocks (ingest, map,
filter, global, save) edited purely via configuration. Execution is
sharded, parallel, and byte-deterministic for any worker count.

Typical embedding:

    from corpusforge import (
        default_registry, load_config, validate_config,
        build_pipeline, run_pipeline,
    )

    reg = default_registry()
    cfg = load_config("pipeline.yaml")
    assert not validate_config(cfg, reg)
    shards, report = run_pipeline(build_pipeline(cfg, reg), cfg.executor)
"""

from .config import (
    Diagnostic,
    ExecutorSpec,
    PipelineConfig,
    ProcessorSpec,
    dump_config,
    load_config,
    resolve_args,
    validate_config,
)
from .core import (
    Document,
    document_from_line,
    document_to_line,
    hash64,
    normalize_text,
    pack_id,
    tokenize_words,
    unpack_id,
)
from .engine import (
    Drop,
    GlobalStage,
    RunReport,
    ShardInfo,
    ShardSet,
    StageContext,
    StagePlan,
    StageReport,
    build_pipeline,
    iter_shard_documents,
    plan_partitions,
    run_pipeline,
    run_truncated,
)
from .errors import (
    CorpusforgeError,
    CsvParseError,
    DuplicateKeyError,
    EmptyInput,
    EncodingError,
    IoError,
    KeyFormatError,
    ParseError,
    ProcessorNotFound,
    SchemaError,
    StageError,
    ValidationError,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .registry import (
    ArgSpec,
    ProcessorEntry,
    ProcessorKey,
    ProcessorRegistry,
    clear_extensions,
    default_registry,
    format_key,
    parse_key,
    register_processor,
)

__version__ = "0.1.0"

__all__ = [
    "ArgSpec",
    "CorpusforgeError",
    "CsvParseError",
    "Diagnostic",
    "Document",
    "Drop",
    "DuplicateKeyError",
    "EmptyInput",
    "EncodingError",
    "ExecutorSpec",
    "GlobalStage",
    "IoError",
    "KERNEL_BACKEND",
    "KeyFormatError",
    "ParseError",
    "PipelineConfig",
    "ProcessorEntry",
    "ProcessorKey",
    "ProcessorNotFound",
    "ProcessorRegistry",
    "ProcessorSpec",
    "RunReport",
    "SchemaError",
    "ShardInfo",
    "ShardSet",
    "StageContext",
    "StagePlan",
    "StageReport",
    "StageError",
    "ValidationError",
    "build_pipeline",
    "clear_extensions",
    "default_registry",
    "document_from_line",
    "document_to_line",
    "dump_config",
    "format_key",
    "hash64",
    "iter_shard_documents",
    "load_config",
    "normalize_text",
    "pack_id",
    "parse_key",
    "plan_partitions",
    "register_processor",
    "resolve_args",
    "run_pipeline",
    "run_truncated",
    "tokenize_words",
    "unpack_id",
    "validate_config",
    "__version__",
]
