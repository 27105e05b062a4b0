"""Compare the compiled and NumPy kernel backends.

Usage::

    python benchmarks/bench_kernels.py --family m4 --n 20 --k 3 --repeat 5
"""
import argparse
import time
import timeit

import numpy as np

from vemsupg import _pykernels, kernels
from vemsupg.analysis import problem1
from vemsupg.assembly import assemble
from vemsupg.mesh import generate
from vemsupg.vemspace import build_element_operators

try:
    from vemsupg import _ckernels
except ImportError:
    _ckernels = None


def kernel_inputs(mesh, k):
    """Quadrature data of every cell, as fed to the kernels during assembly."""
    coeffs = problem1().coeffs
    out = []
    for ci in range(mesh.n_cells):
        ops = build_element_operators(mesh, ci, k)
        pts = np.ascontiguousarray(ops.rule.points)
        x, y = pts[:, 0], pts[:, 1]
        M, Mx, My = _pykernels.monomial_table(pts, np.asarray(ops.basis.center), ops.h, k)
        n1 = ops.Pi0km1.shape[0]
        gx, gy = M[:, :n1] @ ops.Pi0grad[0], M[:, :n1] @ ops.Pi0grad[1]
        P = M @ ops.Pi0k
        args = (ops.rule.weights, P, P, gx, gy, Mx[:, :n1] @ ops.Pi0grad[0],
                My[:, :n1] @ ops.Pi0grad[0], Mx[:, :n1] @ ops.Pi0grad[1],
                My[:, :n1] @ ops.Pi0grad[1], np.ascontiguousarray(coeffs.K(x, y)),
                np.ascontiguousarray(coeffs.div_K(x, y, ops.h)),
                np.ascontiguousarray(coeffs.beta(x, y)),
                np.ascontiguousarray(coeffs.div_beta(x, y, ops.h)),
                coeffs.gamma(x, y), coeffs.f(x, y), 0.01)
        out.append((pts, np.asarray(ops.basis.center), ops.h, args))
    return out


def bench_backend(module, data, k, repeat):
    def run():
        for pts, center, h, args in data:
            module.monomial_table(pts, center, h, k)
            module.element_matrices(*args)

    return min(timeit.repeat(run, number=1, repeat=repeat))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--family", default="m4")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    mesh = generate(args.family, args.n)
    data = kernel_inputs(mesh, args.k)
    print(f"{mesh!r}, k={args.k}, {len(data)} cells")
    t_py = bench_backend(_pykernels, data, args.k, args.repeat)
    print(f"python kernels : {t_py * 1e3:9.2f} ms")
    if _ckernels is not None:
        t_c = bench_backend(_ckernels, data, args.k, args.repeat)
        print(f"cython kernels : {t_c * 1e3:9.2f} ms  (speed-up {t_py / t_c:.2f}x)")
    else:
        print("cython kernels : not built")

    coeffs = problem1()
    start = time.perf_counter()
    assemble(mesh, args.k, coeffs.coeffs, coeffs.dirichlet)
    print(f"full assembly ({kernels.BACKEND} backend): {time.perf_counter() - start:.2f} s")


if __name__ == "__main__":
    main()
