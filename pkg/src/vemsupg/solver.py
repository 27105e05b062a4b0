"""Sparse linear solves for the assembled (nonsymmetric) system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


@dataclass
class SolveOptions:
    method: str = "direct"
    tolerance: float = 1e-12
    max_iterations: int = 2000
    restart: int = 100

    def __post_init__(self):
        if self.method not in ("direct", "krylov"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve(system, opts: SolveOptions | None = None) -> np.ndarray:
    """Solve ``system.matrix x = system.rhs``.

    ``system`` may also be a ``(matrix, rhs)`` pair.
    """
    opts = opts or SolveOptions()
    if isinstance(system, tuple):
        A, b = system
    else:
        A, b = system.matrix, system.rhs
    A = A.tocsc()
    if opts.method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        x = lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("sparse LU produced non-finite values")
        return x
    try:
        ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
    except RuntimeError as exc:
        raise SolverError(f"incomplete factorization failed: {exc}") from exc
    M = spla.LinearOperator(A.shape, ilu.solve)
    x, info = spla.gmres(A, b, M=M, rtol=opts.tolerance, atol=0.0, restart=opts.restart,
                         maxiter=opts.max_iterations)
    res = relative_residual(A, x, b)
    if info != 0 or res > 10 * opts.tolerance:
        raise SolverError(f"GMRES did not converge (info={info}, residual={res:.3e})", res)
    return x
