"""Timing comparison of the compiled sparse kernel against the scipy fallback.

Both paths produce bit-identical outputs; this script measures what the
extension actually buys on representative operator sizes.  Run directly:

    python3 benchmarks/bench_kernels.py [--points 400] [--reps 200]

The kernel path is fixed at import time, so the script re-executes itself
with SCCNN_NO_EXT=1 to collect the fallback numbers, then prints both
timings side by side and checks that the output checksums agree.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from sccnn import kernels, tasks
from sccnn.complexes import Cochain, normalized_operators
from sccnn.models import ModelSpec, forward, init_params


def _time(fn, reps: int) -> float:
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def measure(points: int, reps: int) -> dict:
    sc = tasks.gen_synthetic_sc(points, 0, seed=0)
    ops = normalized_operators(sc, 1, "random_walk")
    results: dict[str, dict] = {}

    for width in (1, 16):
        for dtype in (np.float64, np.float32):
            lin = kernels.LinOp(ops.lap_down, dtype=dtype)
            rng = np.random.default_rng(7)
            x = np.ascontiguousarray(rng.normal(size=(lin.shape[1], width)), dtype=dtype)
            out = lin.dot(x)
            name = f"csr_matmul L1_down {lin.shape[0]}x{lin.shape[1]} w={width} {np.dtype(dtype).name}"
            results[name] = {
                "seconds": _time(lambda: lin.dot(x), reps),
                "checksum": "%.17g" % float(np.float64(out).sum()),
            }

    lin = kernels.LinOp(ops.lap_down)
    rng = np.random.default_rng(7)
    x = np.ascontiguousarray(rng.normal(size=(lin.shape[1], 16)))
    g = lin.dot(x)
    results["csr_matmul transpose (reverse pass) w=16 float64"] = {
        "seconds": _time(lambda: lin.tdot(g), reps),
        "checksum": "%.17g" % float(lin.tdot(g).sum()),
    }

    spec = ModelSpec(
        variant="sccnn", dim=2, layers=2, features=(1, 16, 16), t_down=2, t_up=2,
        order=None, nonlinearity="tanh", scheme="random_walk",
        readout="trajectory", seed=0,
    )
    params = init_params(spec)
    rng = np.random.default_rng(3)
    inputs = {k: Cochain(k, rng.normal(size=(sc.num(k), 1))) for k in spec.orders}
    out = forward(spec, params, sc, inputs)
    results[f"full forward sccnn L=2 F=16 ({points}-point mesh)"] = {
        "seconds": _time(lambda: forward(spec, params, sc, inputs), max(1, reps // 20)),
        "checksum": "%.17g" % float(sum(v.values.sum() for v in out.values())),
    }
    return results


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=400, help="synthetic mesh size")
    parser.add_argument("--reps", type=int, default=200, help="repetitions per kernel")
    parser.add_argument("--emit-json", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    results = measure(args.points, args.reps)
    if args.emit_json:
        json.dump({"compiled": kernels.HAVE_COMPILED, "results": results}, sys.stdout)
        return 0

    if not kernels.HAVE_COMPILED:
        print("compiled extension not available; fallback timings only\n")
        for name, row in results.items():
            print(f"  {name}: {row['seconds'] * 1e6:9.1f} us/call")
        return 0

    env = dict(os.environ, SCCNN_NO_EXT="1")
    child = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--points", str(args.points),
         "--reps", str(args.reps), "--emit-json"],
        capture_output=True, text=True, env=env, check=True,
    )
    fallback = json.loads(child.stdout)
    assert not fallback["compiled"], "child still imported the extension"

    width = max(len(n) for n in results)
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'fallback':>10}  speedup")
    mismatched = []
    for name, row in results.items():
        other = fallback["results"][name]
        ratio = other["seconds"] / row["seconds"]
        print(
            f"{name:<{width}}  {row['seconds'] * 1e6:8.1f} us  {other['seconds'] * 1e6:8.1f} us  {ratio:6.2f}x"
        )
        if row["checksum"] != other["checksum"]:
            mismatched.append(name)
    if mismatched:
        print("\nCHECKSUM MISMATCH (paths are expected to agree bit for bit):")
        for name in mismatched:
            print(f"  {name}")
        return 1
    print("\nall checksums identical across paths")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
