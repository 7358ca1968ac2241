"""Time the compiled and pure-Python kernels on representative inputs.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time over ``--repeat`` runs and the speed-up of
the compiled backend.  The end-to-end rows time a full y-ladder, which is what
``atoms`` and ``check-theorem`` spend their time on.
"""
import argparse
import time

import numpy as np

from freediag import kernels
from freediag.boundary import build_ladder
from freediag.models import ScalarAtomic, SemicircularProfile
from freediag.algebra import AlgebraDescriptor

BERNOULLI = (np.array([0.0, 1.0]), np.array([0.75, 0.25]), np.array([0.0, 2.0]), np.array([0.75, 0.25]))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(mod):
    rng = np.random.default_rng(0)
    S = rng.uniform(0, 1, (8, 8))
    S = 0.5 * (S + S.T)
    b0 = rng.uniform(-1, 1, 8) + 0.01j
    W = rng.uniform(0, 1, (2000, 400))
    sizes = np.array([1000, 1000], dtype=np.int64)
    pts = [complex(a, 1e-6) for a in np.linspace(-1, 3, 50)]

    def dyson():
        mod.dyson_damped(S, b0, -1j * np.ones(8), 0.5, 1e-12, 200000)

    def subord():
        for z in pts:
            mod.atomic_subordination(z, *BERNOULLI, z, 0.5, 1e-12, 20000, 50)

    def cauchy():
        for z in pts * 100:
            mod.atomic_cauchy(z, BERNOULLI[0], BERNOULLI[1])

    def block():
        mod.block_average_rows(W, sizes)

    return {"dyson_damped d=8 y=0.01": dyson,
            "atomic_subordination x50 y=1e-6": subord,
            "atomic_cauchy x5000": cauchy,
            "block_average_rows 2000x400": block}


def ladders():
    half = AlgebraDescriptor.uniform(2)
    x, y = ScalarAtomic([0, 1], [0.75, 0.25]), ScalarAtomic([0, 2], [0.75, 0.25])
    p = SemicircularProfile(half, [[1, 0.5], [0.5, 2]])
    q = SemicircularProfile(half, [[0.3, 1], [1, 0.7]])
    return {"ladder Bernoulli a=0": lambda: build_ladder(x, y, 0.0),
            "ladder profile pair a=0.3": lambda: build_ladder(p, q, 0.3)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = kernels.available_backends()
    if "cython" not in mods:
        print("compiled backend not built; only the pure-Python timings are shown")
    print(f"{'case':36s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")

    rows = {}
    for name, mod in mods.items():
        for case, fn in cases(mod).items():
            rows.setdefault(case, {})[name] = best_of(fn, args.repeat)
    saved = kernels._impl
    try:
        for name, mod in mods.items():
            kernels._impl = mod
            for case, fn in ladders().items():
                rows.setdefault(case, {})[name] = best_of(fn, args.repeat)
    finally:
        kernels._impl = saved

    for case, t in rows.items():
        py, cy = t["python"], t.get("cython")
        cy_s = f"{cy:12.4g}" if cy is not None else f"{'-':>12s}"
        sp = f"{py / cy:8.1f}x" if cy else f"{'-':>9s}"
        print(f"{case:36s} {py:12.4g} {cy_s} {sp}")


if __name__ == "__main__":
    main()
