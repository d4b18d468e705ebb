"""Compare the compiled codec kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--lines N] [--repeat R]

Prints per-line compress and decompress times for each algorithm and data
profile, and the speedup of the compiled build.
"""

import argparse
import sys
import timeit

from cabasim import _kernels_py
from cabasim.workload import Dictionary, FrequentPattern, LowDynamicRange, Random, profile_lines, profile_text

try:
    from cabasim import _kernels
except ImportError:
    _kernels = None

KERNELS = (("BDI", "bdi_compress", "bdi_decompress"), ("FPC", "fpc_compress", "fpc_decompress"),
           ("CPACK", "cpack_compress", "cpack_decompress"))
PROFILES = (LowDynamicRange(), FrequentPattern(), Dictionary(), Random())


def per_line(fn, items, repeat):
    """Best-of-``repeat`` seconds per call of ``fn`` over ``items``."""
    best = min(timeit.repeat(lambda: [fn(*a) for a in items], number=1, repeat=repeat))
    return best / len(items)


def bench(lines: int, repeat: int, line_size: int = 128):
    rows = []
    for profile in PROFILES:
        data = [bytes(r) for r in profile_lines(profile, lines, 0, line_size)]
        for alg, comp, decomp in KERNELS:
            images = [getattr(_kernels_py, comp)(x) for x in data]
            packed = [(img, line_size) for img in images if img]
            row = {"profile": profile_text(profile), "alg": alg}  # NaN: nothing compressed
            for name, mod in (("py", _kernels_py), ("cy", _kernels)):
                if mod is None:
                    continue
                row[f"{name}_c"] = per_line(getattr(mod, comp), [(x,) for x in data], repeat)
                row[f"{name}_d"] = per_line(getattr(mod, decomp), packed, repeat) if packed else float("nan")
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
    rows = bench(args.lines, args.repeat)
    print(f"{'profile':<32} {'alg':<6} {'py comp':>9} {'cy comp':>9} {'x':>6} {'py dec':>9} {'cy dec':>9} {'x':>6}")
    for r in rows:
        us = lambda k: f"{r[k] * 1e6:8.2f}u" if r.get(k, 0) == r.get(k, 0) and k in r else f"{'-':>9}"  # noqa: E731
        sp = lambda a, b: f"{r[a] / r[b]:5.1f}x" if b in r and r[b] == r[b] and r[b] > 0 else f"{'-':>6}"  # noqa: E731
        print(f"{r['profile']:<32} {r['alg']:<6} {us('py_c')} {us('cy_c')} {sp('py_c', 'cy_c')} "
              f"{us('py_d')} {us('cy_d')} {sp('py_d', 'cy_d')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
