"""Pipeline assembly and deterministic sharded execution.

A validated config becomes an ordered list of StagePlans; each stage reads
the previous stage's shards and materializes its own under
``work_dir/stage{K}/shard-{index:05}.jsonl``. Per-record stages map shard i
to shard i preserving record order, so a document's shard index is always
``id >> 40`` for the whole run. Global stages run as a parallel per-shard
local pass, a single-threaded merge, and a parallel apply pass.

Determinism: shards are dispatched to the pool in shard order and every
worker writes to a path derived from (stage, shard) alone, so outputs are
byte-identical for any worker count.
"""

from __future__ import annotations

import json
import logging
import multiprocessing
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Optional

from .config import ExecutorSpec, PipelineConfig
from .core import (
    MAX_SHARDS,
    Document,
    check_meta_value,
    document_from_line,
    document_to_line,
    hash64,
    pack_id,
)
from .errors import CorpusforgeError, IoError, StageError
from .registry import ProcessorEntry, ProcessorRegistry, format_key

log = logging.getLogger("corpusforge.engine")


@dataclass(frozen=True)
class ShardInfo:
    index: int
    record_count: int
    path: str


@dataclass(frozen=True)
class ShardSet:
    """The materialized dataset between stages: ordered shard files."""

    shards: tuple[ShardInfo, ...]
    stage_tag: str

    def total_records(self) -> int:
        return sum(shard.record_count for shard in self.shards)

    def iter_documents(self) -> Iterator[Document]:
        for shard in self.shards:
            yield from iter_shard_documents(shard.path)


@dataclass(frozen=True)
class StagePlan:
    index: int
    entry: ProcessorEntry
    args: dict
    mode: str  # per_record | global

    @property
    def name(self) -> str:
        return format_key(self.entry.key)


@dataclass(frozen=True)
class StageContext:
    """Read-only run facts handed to processors."""

    seed: int
    workers: int
    shard_size: int
    work_dir: str
    stage_index: int
    stage_names: tuple[str, ...] = ()
    config_hash: str = ""
    shard_paths: tuple[str, ...] = ()


@dataclass
class StageReport:
    index: int
    name: str
    kind: str
    input_count: int
    output_count: int
    dropped_by_reason: dict[str, int]
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "kind": self.kind,
            "input_count": self.input_count,
            "output_count": self.output_count,
            "dropped_by_reason": dict(sorted(self.dropped_by_reason.items())),
            "wall_time": self.wall_time,
        }


@dataclass
class RunReport:
    seed: int
    workers: int
    stages: list[StageReport] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "workers": self.workers,
            "outputs": list(self.outputs),
            "stages": [stage.to_dict() for stage in self.stages],
        }


@dataclass(frozen=True)
class Drop:
    """A global stage's decision to drop a record, with an optional log row."""

    reason: str
    log: Optional[dict] = None


class GlobalStage:
    """Protocol for kind=global processors.

    local() runs per shard in parallel and returns a compact summary;
    merge() runs single-threaded over all summaries (in shard order) and
    returns the state that apply() consults; apply() runs per record in
    parallel and returns None to keep or a Drop. merge() may read shard
    files via ctx.shard_paths for candidate verification.
    """

    def local(self, docs: Iterator[Document], ctx: StageContext, args: dict) -> Any:
        raise NotImplementedError

    def merge(self, locals_: list[Any], ctx: StageContext, args: dict) -> Any:
        raise NotImplementedError

    def apply(self, doc: Document, state: Any, args: dict) -> Optional[Drop]:
        raise NotImplementedError


def iter_shard_documents(path: str) -> Iterator[Document]:
    try:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                yield document_from_line(line)
    except OSError as exc:
        raise IoError(f"cannot read shard {path}: {exc}") from exc


def plan_partitions(record_count: int, shard_size: int) -> list[tuple[int, int]]:
    """Contiguous (start, end) ranges covering record_count, shard_size apart."""
    if shard_size < 1:
        raise ValueError("shard_size must be >= 1")
    return [
        (start, min(start + shard_size, record_count))
        for start in range(0, record_count, shard_size)
    ]


def build_pipeline(cfg: PipelineConfig, reg: ProcessorRegistry) -> list[StagePlan]:
    """One StagePlan per etl block, in config order, defaults filled.

    The config must already have passed validate_config.
    """
    from .config import resolve_args

    plans = []
    for i, spec in enumerate(cfg.etl):
        entry = reg.lookup(spec.name)
        plans.append(
            StagePlan(
                index=i,
                entry=entry,
                args=resolve_args(spec, entry),
                mode="global" if entry.kind == "global" else "per_record",
            )
        )
    return plans


def run_pipeline(
    plans: list[StagePlan], exec_spec: ExecutorSpec, *, keep_intermediate: bool = False
) -> tuple[ShardSet, RunReport]:
    """Execute every stage; returns the final ShardSet and the RunReport.

    Intermediate stage directories are deleted on success unless
    keep_intermediate is set; on error everything written so far is left
    in place for inspection.
    """
    if not plans:
        raise ValueError("empty pipeline")
    return _execute(
        plans, exec_spec, upto=len(plans) - 1, limit=None, keep_intermediate=keep_intermediate
    )


def run_truncated(
    plans: list[StagePlan],
    exec_spec: ExecutorSpec,
    upto: int,
    limit: Optional[int] = None,
    *,
    keep_intermediate: bool = False,
) -> tuple[ShardSet, RunReport]:
    """Execute plans[0..=upto] only; limit caps ingested records."""
    if not 0 <= upto < len(plans):
        raise ValueError(f"upto must be in [0, {len(plans) - 1}], got {upto}")
    if limit is not None and limit < 0:
        raise ValueError("limit must be >= 0")
    return _execute(plans, exec_spec, upto=upto, limit=limit, keep_intermediate=keep_intermediate)


# ---------------------------------------------------------------------------
# internals


class _TaskFailure(Exception):
    """Worker-side wrapper: args = (shard_index, record_id or None, cause)."""


class _WorkerPool:
    """Fixed process pool; inline execution when one worker suffices."""

    def __init__(self, workers: int):
        self.workers = workers
        self._pool: Optional[ProcessPoolExecutor] = None

    def map_tasks(self, fn: Callable[[Any], Any], tasks: list) -> list:
        if self.workers <= 1 or len(tasks) <= 1:
            return [fn(task) for task in tasks]
        if self._pool is None:
            methods = multiprocessing.get_all_start_methods()
            ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
            self._pool = ProcessPoolExecutor(max_workers=self.workers, mp_context=ctx)
        futures = [self._pool.submit(fn, task) for task in tasks]
        return [future.result() for future in futures]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True, cancel_futures=True)
            self._pool = None


def _config_hash(plans: list[StagePlan], exec_spec: ExecutorSpec) -> str:
    # Only dataset-defining fields: workers and work_dir must never change
    # the produced bytes, so they stay out of the hash.
    payload = {
        "executor": {"seed": exec_spec.seed, "shard_size": exec_spec.shard_size},
        "etl": [{"name": plan.name, "args": plan.args} for plan in plans],
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return f"{hash64(canonical.encode('utf-8')):016x}"


def _stage_dir(work_dir: Path, stage_index: int) -> Path:
    return work_dir / f"stage{stage_index}"


def _fresh_stage_dir(work_dir: Path, stage_index: int) -> Path:
    directory = _stage_dir(work_dir, stage_index)
    if directory.exists():
        shutil.rmtree(directory)
    directory.mkdir(parents=True)
    return directory


def _shard_path(directory: Path, shard_index: int) -> str:
    return str(directory / f"shard-{shard_index:05}.jsonl")


def _execute(
    plans: list[StagePlan],
    exec_spec: ExecutorSpec,
    *,
    upto: int,
    limit: Optional[int],
    keep_intermediate: bool,
) -> tuple[ShardSet, RunReport]:
    if plans[0].entry.kind != "ingest":
        raise ValueError("first stage must be an ingest-kind processor")

    work_dir = Path(exec_spec.work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)

    executed = plans[: upto + 1]
    stage_names = tuple(plan.name for plan in executed)
    config_hash = _config_hash(plans, exec_spec)

    report = RunReport(seed=exec_spec.seed, workers=exec_spec.workers)
    current = ShardSet(shards=(), stage_tag="empty")
    remaining = limit
    pool = _WorkerPool(exec_spec.workers)
    written_stage_dirs: list[Path] = []

    try:
        for plan in executed:
            ctx = StageContext(
                seed=exec_spec.seed,
                workers=exec_spec.workers,
                shard_size=exec_spec.shard_size,
                work_dir=str(work_dir),
                stage_index=plan.index,
                stage_names=stage_names,
                config_hash=config_hash,
                shard_paths=tuple(shard.path for shard in current.shards),
            )
            started = time.perf_counter()
            kind = plan.entry.kind

            if kind == "ingest":
                current, stage_report, ingested = _run_ingest(plan, ctx, current, work_dir, remaining)
                if remaining is not None:
                    remaining -= ingested
                written_stage_dirs.append(_stage_dir(work_dir, plan.index))
            elif kind in ("map", "filter"):
                current, stage_report = _run_per_record(plan, ctx, current, work_dir, pool)
                written_stage_dirs.append(_stage_dir(work_dir, plan.index))
            elif kind == "global":
                current, stage_report = _run_global(plan, ctx, current, work_dir, pool)
                written_stage_dirs.append(_stage_dir(work_dir, plan.index))
            elif kind == "save":
                stage_report, outputs = _run_save(plan, ctx, current)
                report.outputs.extend(outputs)
            else:  # pragma: no cover - registry rejects unknown kinds
                raise StageError(f"unknown kind {kind!r}", stage_index=plan.index)

            stage_report.wall_time = time.perf_counter() - started
            report.stages.append(stage_report)
            log.info(
                "stage %d %s: %d -> %d records (%.3fs)",
                plan.index,
                plan.name,
                stage_report.input_count,
                stage_report.output_count,
                stage_report.wall_time,
            )
    finally:
        pool.close()

    if not report.outputs:
        report.outputs = [shard.path for shard in current.shards]

    if not keep_intermediate:
        final_dirs = {Path(shard.path).resolve().parent for shard in current.shards}
        for directory in written_stage_dirs:
            if directory.exists() and directory.resolve() not in final_dirs:
                shutil.rmtree(directory)

    return current, report


def _wrap_stage_errors(plan: StagePlan):
    """Context manager translating worker/processor failures to StageError."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is None or isinstance(exc, (StageError, IoError)):
                return False
            if isinstance(exc, _TaskFailure):
                shard_index, record_id, cause = exc.args
                raise StageError(
                    cause,
                    stage_index=plan.index,
                    shard_index=shard_index,
                    record_id=record_id,
                ) from exc
            if isinstance(exc, (CorpusforgeError, Exception)):
                raise StageError(
                    f"{plan.name}: {exc!r}", stage_index=plan.index
                ) from exc
            return False

    return _Ctx()


def _prepared_args(plan: StagePlan, ctx: StageContext) -> dict:
    if plan.entry.prepare is None:
        return plan.args
    return plan.entry.prepare(dict(plan.args), ctx)


def _run_ingest(
    plan: StagePlan,
    ctx: StageContext,
    current: ShardSet,
    work_dir: Path,
    limit: Optional[int],
) -> tuple[ShardSet, StageReport, int]:
    directory = _fresh_stage_dir(work_dir, plan.index)
    writer = _ShardWriter(directory, start_shard=len(current.shards), shard_size=ctx.shard_size)
    ingested = 0
    try:
        with _wrap_stage_errors(plan):
            if limit is None or limit > 0:
                for doc in plan.entry.fn(ctx, **plan.args):
                    writer.add(doc)
                    ingested += 1
                    if limit is not None and ingested >= limit:
                        break
            new_shards = writer.finish()
    except BaseException:
        writer.abort()
        raise
    shard_set = ShardSet(
        shards=current.shards + new_shards, stage_tag=f"stage{plan.index}:{plan.name}"
    )
    stage_report = StageReport(
        index=plan.index,
        name=plan.name,
        kind="ingest",
        input_count=ingested,
        output_count=ingested,
        dropped_by_reason={},
        wall_time=0.0,
    )
    return shard_set, stage_report, ingested


class _ShardWriter:
    """Assigns packed ids and rolls shard files at shard_size records."""

    def __init__(self, directory: Path, start_shard: int, shard_size: int):
        self.directory = directory
        self.shard_size = shard_size
        self.shard_index = start_shard
        self.record_index = 0
        self.shards: list[ShardInfo] = []
        self._handle = None
        self._path: Optional[str] = None

    def add(self, doc: Document) -> None:
        if self.record_index >= self.shard_size:
            self._roll()
        if self._handle is None:
            if self.shard_index >= MAX_SHARDS:
                raise IoError(f"shard limit {MAX_SHARDS} exceeded")
            self._path = _shard_path(self.directory, self.shard_index)
            self._handle = open(self._path, "w", encoding="utf-8", newline="\n")
        doc.id = pack_id(self.shard_index, self.record_index)
        for key, value in doc.meta.items():
            check_meta_value(key, value)
        self._handle.write(document_to_line(doc) + "\n")
        self.record_index += 1

    def _roll(self) -> None:
        self._close_current()
        self.shard_index += 1
        self.record_index = 0

    def _close_current(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self.shards.append(ShardInfo(self.shard_index, self.record_index, self._path))
            self._handle = None
            self._path = None

    def finish(self) -> tuple[ShardInfo, ...]:
        self._close_current()
        return tuple(self.shards)

    def abort(self) -> None:
        if self._handle is not None:
            try:
                self._handle.close()
            except OSError:
                pass
            self._handle = None


@dataclass(frozen=True)
class _PerRecordTask:
    stage_index: int
    shard_index: int
    in_path: str
    out_path: str
    fn: Callable
    args: dict
    kind: str


def _per_record_shard_task(task: _PerRecordTask) -> tuple[int, int, dict[str, int], str]:
    dropped: dict[str, int] = {}
    in_count = out_count = 0
    try:
        in_handle = open(task.in_path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read shard {task.in_path}: {exc}") from exc
    with in_handle, open(task.out_path, "w", encoding="utf-8", newline="\n") as out_handle:
        for line in in_handle:
            doc = document_from_line(line)
            record_id = doc.id  # fn may mutate doc in place
            in_count += 1
            try:
                if task.kind == "map":
                    result = task.fn(doc, **task.args)
                    _check_map_result(record_id, result)
                    out_handle.write(document_to_line(result) + "\n")
                    out_count += 1
                else:
                    reason = task.fn(doc, **task.args)
                    if reason is None:
                        # keep the already-canonical input bytes
                        out_handle.write(line if line.endswith("\n") else line + "\n")
                        out_count += 1
                    elif isinstance(reason, str):
                        dropped[reason] = dropped.get(reason, 0) + 1
                    else:
                        raise TypeError(
                            f"filter must return None or a reason string, got {type(reason).__name__}"
                        )
            except Exception as exc:
                raise _TaskFailure(task.shard_index, record_id, repr(exc)) from exc
    return in_count, out_count, dropped, task.out_path


def _check_map_result(original_id: int, result: Any) -> None:
    if not isinstance(result, Document):
        raise TypeError(f"map must return a Document, got {type(result).__name__}")
    if result.id != original_id:
        raise ValueError(f"map changed record id {original_id} -> {result.id}")
    if not isinstance(result.text, str):
        raise TypeError("Document.text must be a string")
    for key, value in result.meta.items():
        check_meta_value(key, value)


def _run_per_record(
    plan: StagePlan,
    ctx: StageContext,
    current: ShardSet,
    work_dir: Path,
    pool: _WorkerPool,
) -> tuple[ShardSet, StageReport]:
    directory = _fresh_stage_dir(work_dir, plan.index)
    with _wrap_stage_errors(plan):
        args = _prepared_args(plan, ctx)
        tasks = [
            _PerRecordTask(
                stage_index=plan.index,
                shard_index=shard.index,
                in_path=shard.path,
                out_path=_shard_path(directory, shard.index),
                fn=plan.entry.fn,
                args=args,
                kind=plan.entry.kind,
            )
            for shard in current.shards
        ]
        results = pool.map_tasks(_per_record_shard_task, tasks)

    shards = []
    dropped: dict[str, int] = {}
    input_count = output_count = 0
    for shard, (in_count, out_count, shard_dropped, out_path) in zip(current.shards, results):
        if plan.entry.kind == "map" and out_count != in_count:
            raise StageError(
                f"map stage changed record count {in_count} -> {out_count}",
                stage_index=plan.index,
                shard_index=shard.index,
            )
        input_count += in_count
        output_count += out_count
        for reason, count in shard_dropped.items():
            dropped[reason] = dropped.get(reason, 0) + count
        shards.append(ShardInfo(shard.index, out_count, out_path))

    shard_set = ShardSet(shards=tuple(shards), stage_tag=f"stage{plan.index}:{plan.name}")
    stage_report = StageReport(
        index=plan.index,
        name=plan.name,
        kind=plan.entry.kind,
        input_count=input_count,
        output_count=output_count,
        dropped_by_reason=dropped,
        wall_time=0.0,
    )
    return shard_set, stage_report


@dataclass(frozen=True)
class _GlobalLocalTask:
    stage_index: int
    shard_index: int
    in_path: str
    stage: Any
    args: dict
    ctx: StageContext


def _global_local_task(task: _GlobalLocalTask) -> Any:
    try:
        docs = iter_shard_documents(task.in_path)
        return task.stage.local(docs, task.ctx, task.args)
    except IoError:
        raise
    except Exception as exc:
        raise _TaskFailure(task.shard_index, None, repr(exc)) from exc


@dataclass(frozen=True)
class _GlobalApplyTask:
    stage_index: int
    shard_index: int
    in_path: str
    out_path: str
    stage: Any
    state: Any
    args: dict


def _global_apply_task(task: _GlobalApplyTask) -> tuple[int, int, dict[str, int], list, str]:
    dropped: dict[str, int] = {}
    logs: list[dict] = []
    in_count = out_count = 0
    try:
        in_handle = open(task.in_path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read shard {task.in_path}: {exc}") from exc
    with in_handle, open(task.out_path, "w", encoding="utf-8", newline="\n") as out_handle:
        for line in in_handle:
            doc = document_from_line(line)
            in_count += 1
            try:
                decision = task.stage.apply(doc, task.state, task.args)
            except Exception as exc:
                raise _TaskFailure(task.shard_index, doc.id, repr(exc)) from exc
            if decision is None:
                out_handle.write(line if line.endswith("\n") else line + "\n")
                out_count += 1
            else:
                dropped[decision.reason] = dropped.get(decision.reason, 0) + 1
                if decision.log is not None:
                    logs.append(decision.log)
    return in_count, out_count, dropped, logs, task.out_path


def _run_global(
    plan: StagePlan,
    ctx: StageContext,
    current: ShardSet,
    work_dir: Path,
    pool: _WorkerPool,
) -> tuple[ShardSet, StageReport]:
    directory = _fresh_stage_dir(work_dir, plan.index)
    stage = plan.entry.fn
    with _wrap_stage_errors(plan):
        local_tasks = [
            _GlobalLocalTask(
                stage_index=plan.index,
                shard_index=shard.index,
                in_path=shard.path,
                stage=stage,
                args=plan.args,
                ctx=ctx,
            )
            for shard in current.shards
        ]
        local_results = pool.map_tasks(_global_local_task, local_tasks)
        state = stage.merge(local_results, ctx, plan.args)
        apply_tasks = [
            _GlobalApplyTask(
                stage_index=plan.index,
                shard_index=shard.index,
                in_path=shard.path,
                out_path=_shard_path(directory, shard.index),
                stage=stage,
                state=state,
                args=plan.args,
            )
            for shard in current.shards
        ]
        results = pool.map_tasks(_global_apply_task, apply_tasks)

    shards = []
    dropped: dict[str, int] = {}
    all_logs: list[dict] = []
    input_count = output_count = 0
    for shard, (in_count, out_count, shard_dropped, logs, out_path) in zip(
        current.shards, results
    ):
        input_count += in_count
        output_count += out_count
        for reason, count in shard_dropped.items():
            dropped[reason] = dropped.get(reason, 0) + count
        all_logs.extend(logs)
        shards.append(ShardInfo(shard.index, out_count, out_path))

    drop_log_path = plan.args.get("drop_log")
    if drop_log_path and all_logs:
        try:
            with open(drop_log_path, "w", encoding="utf-8", newline="\n") as handle:
                for row in all_logs:
                    handle.write(
                        json.dumps(row, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
                        + "\n"
                    )
        except OSError as exc:
            raise IoError(f"cannot write drop log {drop_log_path}: {exc}") from exc

    shard_set = ShardSet(shards=tuple(shards), stage_tag=f"stage{plan.index}:{plan.name}")
    stage_report = StageReport(
        index=plan.index,
        name=plan.name,
        kind="global",
        input_count=input_count,
        output_count=output_count,
        dropped_by_reason=dropped,
        wall_time=0.0,
    )
    return shard_set, stage_report


def _run_save(
    plan: StagePlan, ctx: StageContext, current: ShardSet
) -> tuple[StageReport, list[str]]:
    with _wrap_stage_errors(plan):
        outputs = plan.entry.fn(current, ctx, **plan.args)
    total = current.total_records()
    stage_report = StageReport(
        index=plan.index,
        name=plan.name,
        kind="save",
        input_count=total,
        output_count=total,
        dropped_by_reason={},
        wall_time=0.0,
    )
    return stage_report, list(outputs)
