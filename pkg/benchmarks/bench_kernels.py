"""Compiled kernels against the numpy fallback, plus one end-to-end solve.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from fracyam import _kernels_py, kernels


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(repeat: int) -> list[tuple]:
    rng = np.random.default_rng(0)
    rows = []
    for B, m in ((64, 200), (1024, 200), (4096, 120)):
        lo = -rng.uniform(0, 1, (B, m))
        up = -rng.uniform(0, 1, (B, m))
        d = 2.5 + rng.uniform(0, 1, (B, m))
        rhs = rng.normal(size=(B, m))
        U = rng.normal(size=(B, m + 1))
        coef = rng.uniform(size=(B, m))
        k = rng.normal(size=(3, m))
        for name, py, fast, args in (
            ("thomas_batched", _kernels_py.thomas_batched, kernels.thomas_batched, (lo, d, up, rhs)),
            ("element_apply", _kernels_py.element_apply, kernels.element_apply, (U, coef, *k)),
        ):
            t_py = _best(lambda: py(*args), repeat)
            t_fast = _best(lambda: fast(*args), repeat)
            err = float(np.max(np.abs(py(*args) - fast(*args))))
            rows.append((name, B, m, t_py, t_fast, t_py / t_fast, err))
    return rows


SOLVE = """
import math, time, numpy as np
from fracyam import kernels
from fracyam.extsolve import TorusExtensionProblem, graded_normal_grid, solve_extension
from fracyam.params import make_params
M = 64
ng = graded_normal_grid(0.5, 20.0, 200)
x = 2 * math.pi * np.arange(M) / M
bump = (1 + 0.3 * np.cos(x)[:, None, None] * np.cos(x)[None, :, None]) * np.ones((M, M, ng.m))
A = np.zeros((2, 2, M, M, ng.m))
A[0, 0] = A[1, 1] = bump
ext = TorusExtensionProblem(make_params(2, 0.5), 2 * math.pi, M, ng, A_tan=A, A_NN=bump)
u = 1 + 0.5 * np.sin(x)[:, None] * np.cos(2 * x)[None, :]
solve_extension(ext, u)
t = time.perf_counter(); F = solve_extension(ext, u, tol=1e-12); dt = time.perf_counter() - t
print(kernels.BACKEND, dt, F.iterations, float(F.values[..., 1].sum()))
"""


def solve_table() -> list[str]:
    out = []
    for pure in ("0", "1"):
        env = dict(os.environ, FYAM_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True,
                             text=True, check=True)
        out.append(res.stdout.strip())
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"backend selected at import: {kernels.BACKEND}")
    print(f"{'kernel':16s} {'B':>5s} {'m':>4s} {'numpy [ms]':>11s} {'compiled [ms]':>14s} "
          f"{'speedup':>8s} {'max diff':>9s}")
    for name, B, m, tp, tf, sp, err in kernel_table(args.repeat):
        print(f"{name:16s} {B:5d} {m:4d} {1e3 * tp:11.3f} {1e3 * tf:14.3f} {sp:8.1f} {err:9.1e}")
    print("\nvariable-coefficient extension solve, 64x64x200 (PCG to 1e-12):")
    for line in solve_table():
        b, dt, it, chk = line.split()
        print(f"  {b:7s} {float(dt):7.3f} s  {it} iterations  checksum {float(chk):.12e}")


if __name__ == "__main__":
    main()
