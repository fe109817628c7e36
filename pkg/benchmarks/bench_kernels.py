"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --cells 256 --dims 2 --repeat 5

Prints one row per kernel with the best wall time of each backend and the
speedup, and checks that both backends return the same field.
"""
import argparse
import timeit

import numpy as np

from degenflow import _kernels_py as python_backend
from degenflow import kernels


def make_state(k, cells, dims, seed):
    rng = np.random.default_rng(seed)
    u = rng.random((k,) + (cells,) * dims)
    u[..., : cells // 4] = 0.0  # a degenerate strip
    return u


def cases(u, h, m, steps):
    dims = u.ndim - 1
    U = u.sum(axis=0)
    e = tuple([1.0] + [0.0] * (dims - 1))
    k = u.shape[0]
    lam, beta = np.ones(k), np.ones(k)
    bc, mean = python_backend.ZERO_FLUX, python_backend.ARITHMETIC
    D, _ = python_backend.face_coef(U, m, mean, 1e-12, bc)
    advance_args = (h, bc, m, mean, 1e-12, python_backend.SUM, lam, beta, 1.0, 0.0, 1.0,
                    0.0, 1.5, e, 0.4, 0.0, 1.0, steps, False, 1e-14)
    return {
        "face_coef": (lambda b: b.face_coef(U, m, mean, 1e-12, bc)[0][0]),
        "rhs": (lambda b: b.rhs(u[0], D, h, bc, 1.0, 0.0, 0.0, 1.5, e)[0]),
        f"advance x{steps}": (lambda b: b.advance(u, *advance_args)[0]),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=256, help="cells per axis")
    ap.add_argument("--dims", type=int, default=2, choices=(1, 2))
    ap.add_argument("--k", type=int, default=2, help="number of components")
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=20, help="time steps per advance call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled extension not built; only the numpy fallback is timed")
    u = make_state(args.k, args.cells, args.dims, args.seed)
    h = tuple([1.0 / args.cells] * args.dims)
    print(f"k={args.k} grid={args.cells}^{args.dims} m={args.m}")
    print(f"{'kernel':<14}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, call in cases(u, h, args.m, args.steps).items():
        t_py = min(timeit.repeat(lambda: call(python_backend), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:<14}{1e3 * t_py:>14.3f}{'-':>16}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(call(compiled)) - np.asarray(call(python_backend)))))
        print(f"{name:<14}{1e3 * t_py:>14.3f}{1e3 * t_c:>16.3f}{t_py / t_c:>9.1f}x"
              f"   max |diff| {diff:.2e}")


if __name__ == "__main__":
    main()
