"""Compare the compiled kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py            # kernel micro-benchmarks
    python benchmarks/bench_kernels.py --fleet 50 # plus end-to-end fleet evaluation per backend
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from smartcharge import _kernels_py

try:
    from smartcharge import _kernels as _compiled
except ImportError:
    _compiled = None

FLEET_SNIPPET = """
import time
from smartcharge import kernels
from smartcharge.config import SynthParams
from smartcharge.moer import hourly_average
from smartcharge.pipeline import evaluate_fleet
from smartcharge.synth import generate_synthetic_fleet
f = generate_synthetic_fleet(SynthParams(vehicles={n}, seed=0))
h = {{s.region_id: hourly_average(s) for s in f.moer}}
t = time.perf_counter()
evaluate_fleet(f.windows, f.catalog, f.tariffs, h, 900, ("constrained", "unconstrained"))
print(kernels.BACKEND, len(f.windows), time.perf_counter() - t)
"""


def instance(n: int, rng: np.random.Generator):
    price = rng.choice([0.12, 0.25, 0.55], size=n)
    moer = rng.uniform(0, 900, size=n)
    start = np.arange(n) * 900.0
    cap = np.full(n, 2.5)
    return price, moer, start, cap, 0.4 * cap.sum()


def bench(label: str, fn, repeat: int) -> float:
    per_call = min(timeit.repeat(fn, number=repeat, repeat=5)) / repeat
    print(f"  {label:<10} {per_call * 1e6:9.2f} us/call")
    return per_call


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--fleet", type=int, default=0, help="vehicles for the end-to-end comparison (0 skips it)")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"numpy": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    else:
        print("compiled kernels unavailable; timing the NumPy fallback only")

    for n in (12, 96, 192, 960):
        args_fill = instance(n, rng)
        extra = np.sort(rng.uniform(0, n * 900.0, size=max(1, n // 24)))
        print(f"greedy_fill, {n} slots")
        t = {k: bench(k, lambda m=m: m.greedy_fill(*args_fill), 2000) for k, m in backends.items()}
        if len(t) == 2:
            print(f"  speedup    {t['numpy'] / t['cython']:9.1f}x")
        print(f"build_cuts, {n} slots")
        t = {k: bench(k, lambda m=m: m.build_cuts(0.0, n * 900.0, 900.0, extra), 2000) for k, m in backends.items()}
        if len(t) == 2:
            print(f"  speedup    {t['numpy'] / t['cython']:9.1f}x")

    if args.fleet:
        print(f"fleet evaluation, {args.fleet} vehicles")
        for pure in ("0", "1"):
            env = dict(os.environ, SMARTCHARGE_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", FLEET_SNIPPET.format(n=args.fleet)], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            print(f"  {out[0]:<10} {float(out[2]):9.2f} s for {out[1]} windows")


if __name__ == "__main__":
    main()
