import json
from pathlib import Path

import pytest
import yaml

from corpusforge import (
    Document,
    build_pipeline,
    clear_extensions,
    default_registry,
    load_config,
    run_pipeline,
    validate_config,
)


@pytest.fixture(autouse=True)
def _isolated_extensions():
    # user-registered processors must not leak between tests
    clear_extensions()
    yield
    clear_extensions()


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name: str, rows: list[dict]) -> str:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")
        return str(path)

    return _write


@pytest.fixture
def make_config(tmp_path):
    """Write a config YAML and load it through the real parser."""

    counter = [0]

    def _make(etl: list[dict], **executor):
        executor.setdefault("workers", 1)
        executor.setdefault("seed", 7)
        executor.setdefault("shard_size", 1000)
        counter[0] += 1
        executor.setdefault("work_dir", str(tmp_path / f"work{counter[0]}"))
        path = tmp_path / f"config{counter[0]}.yaml"
        path.write_text(yaml.safe_dump({"executor": executor, "etl": etl}))
        return load_config(path)

    return _make


@pytest.fixture
def run(make_config):
    """Build and execute a pipeline from etl blocks; asserts a clean config."""

    def _run(etl: list[dict], *, keep_intermediate=False, registry=None, **executor):
        cfg = make_config(etl, **executor)
        reg = registry if registry is not None else default_registry()
        diagnostics = validate_config(cfg, reg)
        assert not diagnostics, [str(d) for d in diagnostics]
        plans = build_pipeline(cfg, reg)
        return run_pipeline(plans, cfg.executor, keep_intermediate=keep_intermediate)

    return _run


def all_documents(shard_set) -> list[Document]:
    return list(shard_set.iter_documents())


def read_lines(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()
