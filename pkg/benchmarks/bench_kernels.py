"""Compiled kernels versus the numpy fallback.

Runs each hot kernel on both backends with identical inputs, checks that the
outputs agree, and prints best-of-N wall times and the speedup.

    python benchmarks/bench_kernels.py [--quick] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from gapscale import _fallback

try:
    from gapscale import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(quick):
    L_orb = 8 if quick else 10
    L_tab = 8 if quick else 10
    n_chain = 16 if quick else 20
    L_mc, sweeps = 32, (200 if quick else 1000)

    def orbit(k):
        return lambda: k.orbit_representatives(L_orb, 2)

    reps, _ = _fallback.orbit_representatives(L_tab, 2)

    def table(k):
        return lambda: k.flip_table(reps, L_tab, 2)

    cols = _fallback.flip_table(reps, L_tab, 2)
    z = np.random.default_rng(0).standard_normal(reps.shape[0])

    def apply(k):
        def run():
            out = np.empty_like(z)
            k.table_apply(cols, z, out)
            return out
        return run

    x = np.random.default_rng(1).standard_normal(1 << n_chain)

    def flip(k):
        def run():
            out = np.empty_like(x)
            k.full_flip_apply(x, n_chain, out)
            return out
        return run

    rng = np.random.default_rng(2)
    spins0 = np.where(rng.random(2 * L_mc) < 0.5, 1, -1).astype(np.int8)
    sites = rng.integers(0, 2 * L_mc, size=sweeps * 2 * L_mc, dtype=np.int64)
    unif = rng.random(sweeps * 2 * L_mc)
    betas = 1.0 / np.geomspace(3.0, 0.05, sweeps)

    def mc(k):
        def run():
            s = spins0.copy()
            e, _, _ = k.metropolis_sweeps(s, L_mc, 5.0, 1.0, sites, unif, betas, 0.0,
                                          -np.inf, 0.0, False)
            return s, e
        return run

    return [
        (f"orbit_representatives ladder L={L_orb}", orbit),
        (f"flip_table ladder L={L_tab} (dim {reps.shape[0]})", table),
        (f"table_apply ladder L={L_tab}", apply),
        (f"full_flip_apply chain L={n_chain}", flip),
        (f"metropolis_sweeps L={L_mc} x {sweeps}", mc),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        if a.dtype.kind == "f":
            return np.allclose(a, b, rtol=0, atol=1e-12)
        return np.array_equal(a, b)
    return abs(a - b) <= 1e-9 * max(1.0, abs(a))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run pip install -e . first")

    rows = []
    print(f"{'kernel':44s} {'cython s':>10s} {'numpy s':>10s} {'speedup':>8s}  match")
    for name, make in cases(args.quick):
        tc, oc = best_time(make(_kernels), args.repeat)
        tp, op = best_time(make(_fallback), max(1, args.repeat - 2))
        ok = same(oc, op)
        rows.append({"kernel": name, "cython_s": tc, "numpy_s": tp, "speedup": tp / tc, "match": ok})
        print(f"{name:44s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {'yes' if ok else 'NO'}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
