#!/usr/bin/env python3
"""Benchmark the compiled hashing kernels against the pure-Python twins.

Both implementations are imported directly, so one process measures both
regardless of which backend the package selected at import time. The
optional end-to-end mode runs a small dedup pipeline in subprocesses,
once per backend, to show the effect on a real stage.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 7 --end-to-end
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

from corpusforge import _kernels_py
from corpusforge.dedup import make_permutation_params
from corpusforge.utilities import fake_text

try:
    from corpusforge import _kernels
except ImportError:
    _kernels = None


def _time(func, repeat: int) -> float:
    """Best-of-``repeat`` wall time for one call of ``func``."""
    samples = []
    func()  # warmup
    for _ in range(repeat):
        started = time.perf_counter()
        func()
        samples.append(time.perf_counter() - started)
    return min(samples)


def _workloads(scale: int):
    doc = fake_text(3, 0, 50 * scale).encode("utf-8")
    page = (fake_text(3, 1, 200) + "\n").encode("utf-8") * scale
    a_params, b_params = make_permutation_params(7, 128)
    window_hashes = _kernels_py.ngram_hashes(doc, 3)

    return [
        (
            f"fnv1a64 ({len(page)} bytes x 100)",
            lambda impl: [impl.fnv1a64(page) for _ in range(100)],
        ),
        (
            f"splitmix64 (stream of {50000 * scale})",
            lambda impl: [impl.splitmix64(42, i) for i in range(50000 * scale)],
        ),
        (
            f"ngram_hashes (n=13, {len(doc)} bytes x 200)",
            lambda impl: [impl.ngram_hashes(doc, 13) for _ in range(200)],
        ),
        (
            f"ngram_hashes (n=3, {len(doc)} bytes x 200)",
            lambda impl: [impl.ngram_hashes(doc, 3) for _ in range(200)],
        ),
        (
            f"minhash_from_hashes ({len(window_hashes)} hashes, 128 perms, x 20)",
            lambda impl: [
                impl.minhash_from_hashes(window_hashes, a_params, b_params)
                for _ in range(20)
            ],
        ),
    ]


def bench_kernels(repeat: int, scale: int) -> None:
    rows = []
    for label, runner in _workloads(scale):
        py = _time(lambda: runner(_kernels_py), repeat)
        if _kernels is not None:
            cy = _time(lambda: runner(_kernels), repeat)
            rows.append((label, py, cy, py / cy))
        else:
            rows.append((label, py, None, None))

    width = max(len(label) for label, *_ in rows)
    header = f"{'workload':<{width}}  {'python':>10}  {'cython':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, py, cy, speedup in rows:
        if cy is None:
            print(f"{label:<{width}}  {py * 1000:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
        else:
            print(
                f"{label:<{width}}  {py * 1000:>8.2f}ms  {cy * 1000:>8.2f}ms"
                f"  {speedup:>7.1f}x"
            )
    if _kernels is None:
        print("\ncompiled backend not built; install with the build toolchain")


_PIPELINE_SNIPPET = """
import json, sys, tempfile, time
import yaml
from corpusforge import build_pipeline, default_registry, load_config, run_pipeline
from corpusforge.kernels import BACKEND

with tempfile.TemporaryDirectory() as tmp:
    etl = [
        {"name": "data_ingestion___test___generate_fake_data",
         "args": {"count": int(sys.argv[1])}},
        {"name": "cleaning___text___normalize_whitespace"},
        {"name": "deduplication___exact___fnv"},
        {"name": "deduplication___minhash___lsh"},
    ]
    config = tmp + "/config.yaml"
    executor = {"workers": 1, "seed": 7, "shard_size": 5000, "work_dir": tmp + "/work"}
    with open(config, "w") as handle:
        yaml.safe_dump({"executor": executor, "etl": etl}, handle)
    cfg = load_config(config)
    plans = build_pipeline(cfg, default_registry())
    started = time.perf_counter()
    run_pipeline(plans, cfg.executor)
    print(json.dumps({"backend": BACKEND, "seconds": time.perf_counter() - started}))
"""


def bench_end_to_end(count: int) -> None:
    print(f"\nend-to-end: fake -> normalize -> exact dedup -> minhash ({count} docs)")
    results = {}
    for env_value, label in (("", "cython"), ("1", "python")):
        env = dict(os.environ)
        env.pop("CORPUSFORGE_PURE_PYTHON", None)
        if env_value:
            env["CORPUSFORGE_PURE_PYTHON"] = env_value
        proc = subprocess.run(
            [sys.executable, "-c", _PIPELINE_SNIPPET, str(count)],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            print(f"  {label}: failed\n{proc.stderr}")
            continue
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        if payload["backend"] != label:
            print(f"  {label}: backend unavailable (got {payload['backend']}), skipped")
            continue
        results[label] = payload["seconds"]
        print(f"  {label:>7}: {payload['seconds']:.2f}s")
    if len(results) == 2:
        print(f"  speedup: {results['python'] / results['cython']:.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="best-of repetitions")
    parser.add_argument("--scale", type=int, default=1, help="workload multiplier")
    parser.add_argument(
        "--end-to-end",
        action="store_true",
        help="also time a small dedup pipeline under each backend",
    )
    options = parser.parse_args()
    bench_kernels(options.repeat, options.scale)
    if options.end_to_end:
        bench_end_to_end(20000)
