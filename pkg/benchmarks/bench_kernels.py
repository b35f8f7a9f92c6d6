"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel is run on the same inputs through both backends; outputs are
checked for equality before timings are reported.
"""

import argparse
import json
import time

import numpy as np

from gridmesh import kernels
from gridmesh.geometry import icosphere
from gridmesh.mc_table import TRI_TABLE


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(p, q) for p, q in zip(x, y))
    return np.array_equal(x, y)


def cases(rng):
    mesh = icosphere(4, radius=0.4)
    v0, v1, v2 = (np.ascontiguousarray(x) for x in mesh.corners)
    a = rng.uniform(-0.5, 0.5, (2000, 3))
    b = a + rng.normal(scale=0.05, size=a.shape)
    pts = rng.uniform(-0.5, 0.5, (2000, 3))
    configs = rng.integers(0, 256, 100000).astype(np.uint8)
    edges = np.ascontiguousarray(rng.integers(0, 10**6, (100000, 12)).astype(np.int64))
    return {
        "segment_hits": lambda k: k.segment_hits(a, b, v0, v1, v2),
        "point_triangle_distance": lambda k: k.point_triangle_distance(pts, v0, v1, v2),
        "triangulate_cubes": lambda k: k.triangulate_cubes(configs, edges, TRI_TABLE),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    rows = []
    for name, run in cases(np.random.default_rng(args.seed)).items():
        tc, oc = _best(lambda: run(kernels.compiled_backend), args.repeat)
        tp, op = _best(lambda: run(kernels.python_backend), args.repeat)
        rows.append({"kernel": name, "compiled_s": tc, "python_s": tp, "speedup": tp / tc, "identical": _same(oc, op)})
    print(f"{'kernel':<26}{'compiled [s]':>14}{'python [s]':>12}{'speedup':>10}  identical")
    for r in rows:
        print(f"{r['kernel']:<26}{r['compiled_s']:>14.4f}{r['python_s']:>12.4f}{r['speedup']:>9.1f}x  {r['identical']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
