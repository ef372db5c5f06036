"""Time the hot kernels under each available backend.

    python benchmarks/bench_kernels.py [--sizes 50 200] [--repeat 5]

Prints the best-of-N wall time per kernel and the speedup of the compiled
backend over the numpy one.
"""
import argparse
import timeit

import numpy as np

from varexp import _kernels
from varexp.assembly import apply_dirichlet, assemble_logsource, assemble_mass, assemble_plaplacian, \
    assemble_stiffness, cg_solve
from varexp.config import reference_config
from varexp.driver import build_problem, step
from varexp.exponents import ExponentField
from varexp.functionals import luxemburg_norm
from varexp.mesh import Rect, build_mesh


def cases(n):
    mesh = build_mesh(Rect(-1, 1, -1, 1), n, n)
    p, q = ExponentField.floor_form(0.2, 2.5), ExponentField.floor_form(0.1, 6.0)
    u = mesh.interpolate(lambda x, y: 0.25 * np.exp(-x * x - y * y))
    u[mesh.boundary_mask] = 0.0
    M, K = assemble_mass(mesh), assemble_stiffness(mesh)
    A, b = apply_dirichlet(M + K, M @ u, mesh)
    problem = build_problem(reference_config(**{"mesh.nx": n, "mesh.ny": n}))
    return {
        "p-Laplacian load": lambda: assemble_plaplacian(mesh, p, u),
        "log-source load": lambda: assemble_logsource(mesh, q, u),
        "Luxemburg norm": lambda: luxemburg_norm(mesh, q, u),
        "PCG solve": lambda: cg_solve(A, b, tol=1e-10),
        "full time step": lambda: step(u, 0.01, problem),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}; threads: {_kernels.threads()}")
    for n in args.sizes:
        print(f"\n{n}x{n} mesh ({2 * n * n} triangles)")
        print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
        for name, fn in cases(n).items():
            times = {}
            for b in backends:
                prev = _kernels.set_backend(b)
                fn()  # warm caches
                number = 5
                times[b] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
                _kernels.set_backend(prev)
            row = f"{name:<20}" + "".join(f"{1e3 * times[b]:>10.3f}ms" for b in backends)
            if "cython" in times:
                row += f"{times['python'] / times['cython']:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
