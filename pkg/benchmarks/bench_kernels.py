"""Timing of the compiled and numpy kernel backends on identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from lcfrisk._backend import available
from lcfrisk.material import deviator
from lcfrisk.microstructure import FCC, sample_rotations

E, K, NP = 200e3, 1200.0, 0.15
CMB = (1000.0, 0.5, -0.09, -0.6)


def cases(n, rng):
    s = rng.uniform(50.0, 2000.0, n)
    eps = rng.uniform(1e-4, 2e-2, n)
    U = sample_rotations(rng, max(n // 10, 1))
    dev = deviator(np.diag([600.0, 0.0, 0.0]))
    return {
        "neuber_solve": lambda k: k.neuber_solve(s, E, K, NP, 1e-12, 200),
        "ro_inverse_solve": lambda k: k.ro_inverse_solve(eps, E, K, NP, 1e-12, 200),
        "cmb_inverse_solve": lambda k: k.cmb_inverse_solve(eps, *CMB, E, 1e-12, 200),
        "max_resolved_shear": lambda k: k.max_resolved_shear(dev, U, FCC.normals, FCC.directions),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(args.n, rng).items():
        times, outs = {}, {}
        for b, k in backends.items():
            outs[b] = fn(k)
            times[b] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        first = lambda o: o[0] if isinstance(o, tuple) else o  # noqa: E731
        ref = first(outs["numpy"])
        diff = max(float(np.max(np.abs(first(o) - ref) / np.maximum(np.abs(ref), 1e-300))) for o in outs.values())
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<20}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
              + f"{speed:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
