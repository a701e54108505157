"""Compare the compiled and pure-Python context-tree kernels.

    python3 benchmarks/bench_kernels.py [--n 200000] [--depth 20] [--m 2]

Times a full build, a CTW pass, a BCT pass and a run of shadow predictions
for each backend on the same random series, and checks the results agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bayesct import _backend


def bench(kernel_cls, x: np.ndarray, m: int, depth: int, beta: float, n_pred: int) -> dict:
    k = kernel_cls(m, depth, (0.5,) * m, x[:depth].tolist())
    t0 = time.perf_counter()
    k.extend(x[depth:])
    t1 = time.perf_counter()
    ev = k.ctw_pass(beta)
    t2 = time.perf_counter()
    bct_val, _ = k.bct(beta)
    t3 = time.perf_counter()
    for i in range(n_pred):
        for a in range(m):
            k.log_root_after(a)
        k.push(int(x[i % len(x)]))
    t4 = time.perf_counter()
    return {
        "build": t1 - t0,
        "ctw": t2 - t1,
        "bct": t3 - t2,
        "predict": t4 - t3,
        "nodes": k.n_nodes,
        "evidence": ev,
        "bct_value": bct_val,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--depth", type=int, default=20)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--predictions", type=int, default=2_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    x = rng.integers(0, args.m, size=args.n + args.depth)
    beta = 1.0 - 2.0 ** (-(args.m - 1))
    rows = {}
    backends = [("python", _backend.PyKernel)]
    if _backend.CKernel is not None:
        backends.insert(0, ("cython", _backend.CKernel))
    for name, cls in backends:
        rows[name] = bench(cls, x, args.m, args.depth, beta, args.predictions)

    print(f"n={args.n} m={args.m} depth={args.depth} predictions={args.predictions}")
    print(f"{'backend':<8} {'build':>9} {'ctw':>9} {'bct':>9} {'predict':>9} {'nodes':>10}")
    for name, r in rows.items():
        print(f"{name:<8} {r['build']:9.3f} {r['ctw']:9.3f} {r['bct']:9.3f} {r['predict']:9.3f} {r['nodes']:10d}")
    if len(rows) == 2:
        c, p = rows["cython"], rows["python"]
        print("speedup  " + " ".join(f"{p[k] / c[k]:9.1f}" for k in ("build", "ctw", "bct", "predict")))
        same = c["evidence"] == p["evidence"] and c["bct_value"] == p["bct_value"]
        print(f"results identical: {same}")


if __name__ == "__main__":
    main()
