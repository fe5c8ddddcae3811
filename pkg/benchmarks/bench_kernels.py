"""Compare the numba and numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``.  Each kernel is timed on
both backends after one warm-up call (so numba compilation is excluded),
then a full 8x8 NESS solve is timed in a fresh interpreter per backend with
``QWZNESS_BACKEND`` set.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from qwzness import kernels
from qwzness.quadrature import panel_rule

SOLVE = """
import time
from qwzness import (BathSpec, LatticeSpec, build_hamiltonian, build_self_energies,
                     effective_hamiltonian, steady_correlation)
spec = LatticeSpec(8, 8, m=1.0)
bath = BathSpec(1.0, 0.01, {gamma}, "{stat}", {mu})
se = build_self_energies(spec, bath)
eff = effective_hamiltonian(build_hamiltonian(spec), se)
steady_correlation(eff, se, bath)
t = time.perf_counter()
for _ in range({repeat}):
    steady_correlation(eff, se, bath)
print((time.perf_counter() - t) / {repeat})
"""


def kernel_cases(rng):
    n = 128
    lam = np.ascontiguousarray(rng.uniform(7, 13, n) - 1j * rng.uniform(0.001, 0.01, n))
    mh = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    mc = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    nodes, wk, wg = panel_rule(9.0, 9.7)
    fh, fc = np.exp(-nodes), np.exp(-3 * nodes)
    weight = mh @ mh.conj().T
    grid = np.linspace(6, 14, 301)
    k = np.linspace(-np.pi, np.pi, 201)
    kx, ky = (np.ascontiguousarray(a) for a in np.meshgrid(k, k, indexing="ij"))
    seeds = np.array([4.0, 18.0, 9.8])
    tol = np.full(n, 1e-11)
    return {
        "resolvent_panel (N=128)": lambda K: K.resolvent_panel(lam, nodes, wk, wg, fh, fc, mh, mc),
        "transmission_nodes (301 nodes)": lambda K: K.transmission_nodes(lam, grid, weight),
        "curvature_grid (201^2)": lambda K: K.curvature_grid(kx, ky, 1.0, 1.0, 1.0),
        "link_flux (n=200)": lambda K: K.link_flux(200, 1.0, 1.0, 1.0, -1),
        "mode_transforms (N=128)": lambda K: K.mode_transforms(lam, 4.0, 18.0, seeds, 1.0, 0.01, 9.8,
                                                               kernels.FERMI, tol, 200000),
    }


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def solve_time(backend, stat, repeat):
    mu = 9.99 if stat == "fermion" else 0.0
    code = SOLVE.format(gamma=0.005, stat=stat, mu=mu, repeat=repeat)
    env = dict(os.environ, QWZNESS_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if kernels.NUMBA_KERNELS is None:
        print("numba is not importable; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s}")
    for name, call in kernel_cases(rng).items():
        t_np = best_of(lambda: call(kernels.NUMPY_KERNELS), args.repeat)
        t_nb = best_of(lambda: call(kernels.NUMBA_KERNELS), args.repeat)
        print(f"{name:34s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:9.1f}")
    for stat in ("boson", "fermion"):
        t_np = solve_time("numpy", stat, args.repeat)
        t_nb = solve_time("numba", stat, args.repeat)
        name = f"8x8 {stat} NESS solve"
        print(f"{name:34s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
