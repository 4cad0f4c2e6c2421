"""Compare the jit and pure-python event loops on a fixed workload.

Runs the same simulations twice in subprocesses, once as-is and once with
GRAPHLB_NO_NUMBA=1, verifies the CSV outputs agree byte for byte, and
reports wall-clock times.  The first pass in each subprocess is a warmup
(jit compilation, allocator); the reported time is the second pass.

Usage: python3 benchmarks/bench_kernels.py [--n 2000] [--horizon 50]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import subprocess
import sys
import time


def workload(n: int, horizon: float) -> str:
    from graphlb import (SimConfig, gen_erdos_renyi, gen_ring, simulate,
                         simulate_coupled)

    g = gen_erdos_renyi(n, math.log(n) / n, seed=11)
    tr = simulate(g, SimConfig(lam=0.9, horizon=horizon, seed=5,
                               sample_grid=0.5, record_waits=True))
    ring = gen_ring(max(n // 2, 4))
    co = simulate_coupled(ring, SimConfig(lam=0.8, horizon=horizon / 2,
                                          seed=6, sample_grid=0.5),
                          n=max(n // 20, 1))
    return tr.csv_text() + co.csv_text()


def inner(n: int, horizon: float) -> None:
    workload(n, horizon)  # warmup: compilation happens here on the jit path
    t0 = time.perf_counter()
    text = workload(n, horizon)
    elapsed = time.perf_counter() - t0
    digest = hashlib.sha256(text.encode()).hexdigest()
    json.dump({"elapsed": elapsed, "sha256": digest}, sys.stdout)


def run_mode(args: argparse.Namespace, no_numba: bool) -> dict:
    env = dict(os.environ)
    env["GRAPHLB_NO_NUMBA"] = "1" if no_numba else ""
    cmd = [sys.executable, os.path.abspath(__file__), "--inner",
           "--n", str(args.n), "--horizon", str(args.horizon)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        raise SystemExit(f"inner run failed (no_numba={no_numba})")
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--inner", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.inner:
        inner(args.n, args.horizon)
        return

    jit = run_mode(args, no_numba=False)
    pure = run_mode(args, no_numba=True)
    match = jit["sha256"] == pure["sha256"]
    print(f"workload: ERRG N={args.n} T={args.horizon} + coupled ring")
    print(f"jit path:  {jit['elapsed']:.3f} s")
    print(f"pure path: {pure['elapsed']:.3f} s")
    if jit["elapsed"] > 0:
        print(f"speedup:   {pure['elapsed'] / jit['elapsed']:.1f}x")
    print(f"outputs byte-identical: {match}")
    if not match:
        raise SystemExit("output mismatch between kernel paths")


if __name__ == "__main__":
    main()
