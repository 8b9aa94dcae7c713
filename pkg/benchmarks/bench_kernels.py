"""Compare the compiled and pure-Python kernels on the workloads the package runs.

    python benchmarks/bench_kernels.py [--repeat N]

Jacobi eigendecomposition is timed on random Hermitian matrices of the sizes
used for multi-copy qubit models; the Schur complement is timed on the
Nagaoka-Hayashi problems for 1-4 copies of the phase-dephasing qubit.
"""

import argparse
import time

import numpy as np

from priorest import _pykernels, bounds, model
from priorest.errors import PriorestError

try:
    from priorest import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_jacobi(repeat, rng):
    rows = []
    for n in (4, 8, 16, 32):
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = z + z.conj().T
        row = [f"jacobi n={n}", best_of(lambda: _pykernels.jacobi_eigh(h), repeat)]
        row.append(best_of(lambda: _ext.jacobi_eigh(h), repeat) if _ext else np.nan)
        rows.append(row)
    return rows


def bench_schur(repeat, rng):
    rows = []
    base = model.phase_dephasing(0.0, 0.5)
    for copies in (1, 2, 3, 4):
        try:
            asm = bounds._Assembly(model.n_copy(base, copies))
        except PriorestError as exc:
            print(f"skip copies={copies}: {exc}")
            continue
        a = asm.gs.tocsr()
        n = asm.n
        ptr = a.indptr.astype(np.intc)
        r = (a.indices // n).astype(np.intc)
        c = (a.indices % n).astype(np.intc)
        q = rng.normal(size=(n, n))
        x = q @ q.T / n + np.eye(n)
        s = np.linalg.inv(x)
        label = f"schur copies={copies} (m={asm.m}, n={n})"
        py_rep = 1 if copies >= 4 else repeat
        row = [label, best_of(lambda: _pykernels.schur_complement(ptr, r, c, a.data, x, s), py_rep)]
        row.append(best_of(lambda: _ext.schur_complement(ptr, r, c, a.data, x, s), repeat) if _ext else np.nan)
        if _ext:
            diff = np.abs(_ext.schur_complement(ptr, r, c, a.data, x, s)
                          - _pykernels.schur_complement(ptr, r, c, a.data, x, s)).max()
            label += f"  max|diff|={diff:.1e}"
            row[0] = label
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _ext is None:
        print("compiled extension not built; only the Python column is meaningful")
    rows = bench_jacobi(args.repeat, rng) + bench_schur(args.repeat, rng)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python [s]':>11}  {'cython [s]':>11}  {'speed-up':>8}")
    for name, tp, tc in rows:
        print(f"{name:<{width}}  {tp:11.5f}  {tc:11.5f}  {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
