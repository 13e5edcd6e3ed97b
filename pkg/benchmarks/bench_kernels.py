"""Timing of the compiled quantization kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5] [--json out.json]

Both backends are checked for agreement before timing.  ``assemble`` is
O(N^3) in both implementations and is skipped above N = 256.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from pevo import _kernels_py as fallback

try:
    from pevo import _kernels as compiled
except ImportError:
    compiled = None


def cases(N, rng):
    P = np.ascontiguousarray(rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)))
    v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    root = fallback.roots_of_unity(N)
    out = {
        "left_apply": lambda mod: mod.left_apply(P, v, root),
        "reverse_apply": lambda mod: mod.reverse_apply(P, v, root),
    }
    if N <= 256:
        out["assemble"] = lambda mod: mod.assemble(P, 1, root)
    return out


def best_of(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the rows to this file")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':<14}{'N':>6}{'cython [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for N in args.sizes:
        for name, call in cases(N, rng).items():
            a, b = call(compiled), call(fallback)
            diff = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
            t_c = best_of(lambda: call(compiled), args.repeat)
            t_p = best_of(lambda: call(fallback), args.repeat)
            rows.append({"kernel": name, "N": N, "cython_s": t_c, "numpy_s": t_p, "relative_difference": diff})
            print(f"{name:<14}{N:>6}{1e3 * t_c:>14.3f}{1e3 * t_p:>14.3f}{t_p / t_c:>10.2f}{diff:>12.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
