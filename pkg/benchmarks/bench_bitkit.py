#!/usr/bin/env python3
"""Benchmark the compiled bit kernel against the pure-Python fallback.

Times the three hot paths of a corpus scan: full decode of consent strings,
encode, and negative sniffing over non-consent tokens.

    python benchmarks/bench_bitkit.py [--n 2000]
"""

from __future__ import annotations

import argparse
import importlib
import random
import sys
import time
import uuid
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import revaudit._bitkit as bitkit
from conftest import random_core  # noqa: E402
from revaudit import tcs
from revaudit._bitkit import _pure

KERNEL_NAMES = ("read_uint", "read_set_bits", "write_uint", "set_bit")


def activate(impl) -> None:
    for name in KERNEL_NAMES:
        setattr(bitkit, name, getattr(impl, name))


def bench(label: str, fn, repeat: int = 3) -> float:
    best = min(timeit(fn) for _ in range(repeat))
    print(f"  {label:<28s} {best * 1000:8.1f} ms")
    return best


def timeit(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=2000, help="strings per measurement")
    args = parser.parse_args()

    rng = random.Random(42)
    cores = [random_core(rng, dense_vendors=(i % 2 == 0)) for i in range(args.n)]
    texts = [tcs.encode_tc_core(c) for c in cores]
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
    negatives = [
        str(uuid.UUID(int=rng.getrandbits(128)))
        if i % 2
        else "".join(rng.choice(alphabet) for _ in range(rng.randrange(8, 80)))
        for i in range(args.n * 5)
    ]

    try:
        fast = importlib.import_module("revaudit._bitkit._fast")
    except ImportError:
        fast = None
        print("compiled kernel not built; benchmarking pure only")

    results: dict[str, dict[str, float]] = {}
    for impl in filter(None, (fast, _pure)):
        activate(impl)
        print(f"kernel: {impl.IMPLEMENTATION}")
        results[impl.IMPLEMENTATION] = {
            "decode": bench("decode", lambda: [tcs.decode_tc_string(t) for t in texts]),
            "encode": bench("encode", lambda: [tcs.encode_tc_core(c) for c in cores]),
            "sniff negatives": bench(
                "sniff negatives", lambda: [tcs.sniff_tcs(t) for t in negatives]
            ),
        }

    if fast is not None:
        print("speedup (pure / cython):")
        for op in results["pure"]:
            ratio = results["pure"][op] / results["cython"][op]
            print(f"  {op:<28s} {ratio:8.2f}x")


if __name__ == "__main__":
    main()
