"""Compare the numba and numpy backends.

Kernel-level timings call both forms of each hot loop in one process (the
numba form is compiled once before timing). End-to-end timings run the CLI
in a subprocess per backend, selected with ``HKDELAY_BACKEND``.

    python3 benchmarks/bench_backends.py [--quick] [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import timeit
from pathlib import Path

import numpy as np

from hkdelay import _accel, _hot
from hkdelay.core import Kernel


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(quick):
    rng = np.random.default_rng(0)
    k = Kernel.inverse_power(1.0, 0.5)
    sizes = (128, 512) if quick else (128, 512, 2048)
    for n in sizes:
        q = rng.normal(size=(n, 2))
        w = np.full(n, 1.0 / n)
        yield f"attract n={n}", (lambda q=q, w=w: _hot.attract_loops(q, q, w, k.code, k.param_array)), (
            lambda q=q, w=w: _hot.attract_numpy(q, q, w, k.code, k.param_array)
        )
    for n in sizes:
        pts = rng.normal(size=(n, 3))
        yield f"farthest_pair n={n}", (lambda p=pts: _hot.farthest_pair_loops(p)), (lambda p=pts: _hot.farthest_pair_numpy(p))
    for n in (50, 200) if quick else (50, 200, 400):
        cost = rng.random((n, n))
        yield f"hungarian n={n}", (lambda c=cost: _hot.hungarian_loops(c)), (lambda c=cost: _hot.hungarian_numpy(c))
    for n in (100, 400):
        adj = rng.random((n, n)) < 0.05
        yield f"hopcroft_karp n={n}", (lambda a=adj: _hot.hopcroft_karp_loops(a)), (lambda a=adj: _hot.hopcroft_karp_python(a))


def end_to_end(backend, config, out):
    env = dict(os.environ, HKDELAY_BACKEND=backend)
    cmd = [sys.executable, "-m", "hkdelay", "run", "--config", str(config), "--out", str(out)]
    subprocess.run(cmd, env=env, check=True)  # warm the numba cache
    code = f"import subprocess; subprocess.run({cmd!r}, env={env!r}, check=True)"
    return min(timeit.repeat(code, repeat=2, number=1))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller sizes")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.USE_NUMBA:
        sys.exit("kernel comparison needs the numba backend (unset HKDELAY_BACKEND)")

    print(f"{'kernel':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fast, slow in kernel_cases(args.quick):
        fast()  # compile
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{name:<24}{1e3 * t_fast:>12.3f}{1e3 * t_slow:>12.3f}{t_slow / t_fast:>10.1f}")

    k = {"family": "inverse_power", "c": 1.0, "beta": 0.5}
    n = 64 if args.quick else 256
    doc = {
        "mode": "meanfield_case2",
        "kernels": {"psi": k, "phi": k, "rho": k},
        "delays": {"tau1": 0.25, "tau2": 0.25},
        "population": {"m": 4, "n": n, "d": 2},
        "histories": {"kind": "random", "seed": 1, "radius": 3.0, "shape": "linear"},
        "numerics": {"step": 0.01, "t_end": 5.0, "samples_per_window": 16},
    }
    with tempfile.TemporaryDirectory() as tmp:
        config = Path(tmp) / "bench.json"
        config.write_text(json.dumps(doc))
        times = {b: end_to_end(b, config, Path(tmp) / b) for b in ("numba", "numpy")}
    print(f"\nend-to-end meanfield_case2, {n} atoms, t_end=5:")
    for b, t in times.items():
        print(f"  {b:<6} {t:8.2f} s")
    print(f"  speedup {times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
