"""Benchmark problems, error norms and convergence studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from vemsupg import kernels
from vemsupg.assembly import AssemblyOptions, assemble, stability_matrix
from vemsupg.mesh import Mesh, generate
from vemsupg.poly import dim_poly, exponents
from vemsupg.solver import SolveOptions, SolverError, solve
from vemsupg.supg import CoefficientField
from vemsupg.vemspace import build_dof_map, dof_functionals

TWO_PI = 2.0 * math.pi
ALPHA_SWEEP = tuple(10.0 ** -p for p in range(4, 12))
LAYER_THETA = math.atan(1.0)
LAYER_SPLIT = 0.2


@dataclass
class BenchmarkProblem:
    name: str
    coeffs: CoefficientField
    dirichlet: Callable
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    domain: str = "unit square (0,1)^2"

    @property
    def has_exact(self) -> bool:
        return self.u is not None and self.grad_u is not None


# ---------------------------------------------------------------- problem 1


def _p1_u(x, y):
    return np.sin(TWO_PI * x) * np.sin(TWO_PI * y) + x**5 + y**5 + 1.0


def _p1_grad(x, y):
    sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
    sy, cy = np.sin(TWO_PI * y), np.cos(TWO_PI * y)
    return np.stack([TWO_PI * cx * sy + 5 * x**4, TWO_PI * sx * cy + 5 * y**4], axis=-1)


def _p1_K(alpha):
    def K(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        out = np.empty(x.shape + (2, 2))
        out[..., 0, 0] = alpha * (1 + x**2)
        out[..., 0, 1] = out[..., 1, 0] = alpha * x * y
        out[..., 1, 1] = alpha * (1 + y**2)
        return out

    def gradK(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        g = np.zeros(x.shape + (2, 2, 2))
        g[..., 0, 0, 0] = 2 * alpha * x
        g[..., 0, 1, 0] = g[..., 1, 0, 0] = alpha * y
        g[..., 0, 1, 1] = g[..., 1, 0, 1] = alpha * x
        g[..., 1, 1, 1] = 2 * alpha * y
        return g

    return K, gradK


def _p1_beta(x, y):
    return np.stack([np.cos(TWO_PI * np.asarray(x, dtype=float)),
                     np.sin(TWO_PI * np.asarray(y, dtype=float))], axis=-1)


def _p1_divbeta(x, y):
    return TWO_PI * (np.cos(TWO_PI * y) - np.sin(TWO_PI * x))


def _p1_f(alpha, reaction):
    def f(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        s = np.sin(TWO_PI * x) * np.sin(TWO_PI * y)
        cc = np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
        g = _p1_grad(x, y)
        ux, uy = g[..., 0], g[..., 1]
        uxx = -(TWO_PI**2) * s + 20 * x**3
        uyy = -(TWO_PI**2) * s + 20 * y**3
        uxy = TWO_PI**2 * cc
        div_flux = alpha * (3 * x * ux + 3 * y * uy + (1 + x**2) * uxx + 2 * x * y * uxy
                            + (1 + y**2) * uyy)
        out = -div_flux + np.cos(TWO_PI * x) * ux + np.sin(TWO_PI * y) * uy
        if reaction:
            out = out + np.exp(x + y) * _p1_u(x, y)
        return out

    return f


def problem1(alpha: float = 1e-7, reaction: bool = True) -> BenchmarkProblem:
    """Smooth variable-coefficient accuracy test.

    ``K = alpha [[1+x^2, xy], [xy, 1+y^2]]``, ``beta = (cos 2 pi x, sin 2 pi y)``,
    ``gamma = exp(x+y)`` (zero when ``reaction`` is false), and exact solution
    ``sin(2 pi x) sin(2 pi y) + x^5 + y^5 + 1``.
    """
    K, gradK = _p1_K(alpha)
    gamma = (lambda x, y: np.exp(np.asarray(x) + np.asarray(y))) if reaction \
        else (lambda x, y: np.zeros(np.shape(x)))
    coeffs = CoefficientField(K=K, beta=_p1_beta, gamma=gamma, f=_p1_f(alpha, reaction),
                              gradK=gradK, divbeta=_p1_divbeta, u=_p1_u, grad_u=_p1_grad)
    return BenchmarkProblem(f"problem1(alpha={alpha:g}, reaction={reaction})", coeffs, _p1_u,
                            _p1_u, _p1_grad)


# ---------------------------------------------------------------- polynomial data


def monomial_problem(mu: int, nu: int, K=((1.0, 0.0), (0.0, 1.0)), beta=(1.0, 1.0),
                     gamma=1.0) -> BenchmarkProblem:
    """Constant coefficients with exact solution ``x^mu y^nu``."""
    K = np.asarray(K, dtype=float)
    bx, by = (float(b) for b in beta)

    def mono(a, b, ca=1.0):
        if a < 0 or b < 0:
            return lambda x, y: np.zeros(np.shape(x))
        return lambda x, y: ca * np.asarray(x, dtype=float) ** a * np.asarray(y, dtype=float) ** b

    u = mono(mu, nu)
    ux, uy = mono(mu - 1, nu, mu), mono(mu, nu - 1, nu)
    uxx, uyy = mono(mu - 2, nu, mu * (mu - 1)), mono(mu, nu - 2, nu * (nu - 1))
    uxy = mono(mu - 1, nu - 1, mu * nu)

    def f(x, y):
        lap = K[0, 0] * uxx(x, y) + (K[0, 1] + K[1, 0]) * uxy(x, y) + K[1, 1] * uyy(x, y)
        return -lap + bx * ux(x, y) + by * uy(x, y) + gamma * u(x, y)

    def grad(x, y):
        return np.stack([ux(x, y), uy(x, y)], axis=-1)

    coeffs = CoefficientField.constant(K, (bx, by), gamma, f, u=u, grad_u=grad)
    return BenchmarkProblem(f"monomial x^{mu} y^{nu}", coeffs, u, u, grad)


# ---------------------------------------------------------------- layer problem


def layer_dirichlet(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    tol = 1e-12
    on = (y <= tol) | ((x <= tol) & (y < LAYER_SPLIT))
    return on.astype(float)


def layer_problem(eps: float = 1e-6, theta: float = LAYER_THETA) -> BenchmarkProblem:
    """Constant diffusion ``eps``, unit transport at angle ``theta``, no reaction."""
    coeffs = CoefficientField.constant(((eps, 0.0), (0.0, eps)), (math.cos(theta), math.sin(theta)),
                                       0.0, 0.0)
    return BenchmarkProblem("layer", coeffs, layer_dirichlet,
                            domain="unit square; u=1 on {y=0} and {x=0, y<0.2}, u=0 elsewhere")


# ---------------------------------------------------------------- errors


@dataclass
class ErrorReport:
    h_max: float
    ndof: int
    err_l2: float = math.nan
    err_h1: float = math.nan
    err_energy: float = math.nan


@dataclass
class Solution:
    mesh: Mesh
    k: int
    dofs: np.ndarray
    system: object
    problem: BenchmarkProblem


def solve_problem(mesh: Mesh, k: int, problem: BenchmarkProblem,
                  options: AssemblyOptions | None = None,
                  solver: SolveOptions | None = None, workers: int | None = None) -> Solution:
    system = assemble(mesh, k, problem.coeffs, problem.dirichlet, options, workers)
    return Solution(mesh, k, solve(system, solver), system, problem)


def compute_errors(sol: Solution) -> ErrorReport:
    """Relative projection-based errors of a discrete solution.

    L2 uses ``Pi0_k u_h``; H1 the broken ``Pi0_{k-1} grad u_h``. The energy
    error combines ``K + tau beta beta^T`` on projected gradients, the
    stabilisation of the interpolation defect and the reaction term on
    ``Pi0_k u_h``.
    """
    mesh, k, uh, problem = sol.mesh, sol.k, sol.dofs, sol.problem
    system = sol.system
    report = ErrorReport(mesh.h_max, int(system.dofmap.n_dofs))
    if not problem.has_exact:
        return report
    coeffs = problem.coeffs
    n1 = dim_poly(k - 1)
    num = np.zeros(3)
    den = np.zeros(3)
    for ci, ops in enumerate(system.operators):
        params = system.params[ci]
        loc = uh[system.dofmap.cell(ci)]
        pts, w = ops.rule.points, ops.rule.weights
        x, y = pts[:, 0], pts[:, 1]
        M, _, _ = kernels.monomial_table(pts, np.asarray(ops.basis.center), ops.h, k)
        u = np.asarray(problem.u(x, y), dtype=float)
        gu = np.asarray(problem.grad_u(x, y), dtype=float)
        uk = M @ (ops.Pi0k @ loc)
        g = np.stack([M[:, :n1] @ (ops.Pi0grad[0] @ loc), M[:, :n1] @ (ops.Pi0grad[1] @ loc)], -1)
        eg = gu - g
        num[0] += w @ (u - uk) ** 2
        den[0] += w @ u**2
        num[1] += w @ (eg**2).sum(-1)
        den[1] += w @ (gu**2).sum(-1)
        Kb = params.K_beta(coeffs.K(x, y), coeffs.beta(x, y))
        gamma = np.abs(np.broadcast_to(np.asarray(coeffs.gamma(x, y), dtype=float), x.shape))
        defect = dof_functionals(mesh, ci, k, problem.u) - loc
        stab = (params.kappa_max + params.tau * params.beta_E**2) * defect @ stability_matrix(ops) @ defect
        num[2] += w @ np.einsum("qi,qij,qj->q", eg, Kb, eg) + stab + w @ (gamma * (u - uk) ** 2)
        den[2] += w @ np.einsum("qi,qij,qj->q", gu, Kb, gu) + w @ (gamma * u**2)
    err = np.sqrt(num / np.where(den > 0, den, 1.0))
    report.err_l2, report.err_h1, report.err_energy = (float(e) for e in err)
    return report


# ---------------------------------------------------------------- convergence


def _rate(a, b):
    if a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b):
        return math.log2(a / b)
    return math.nan


@dataclass
class ConvergenceTable:
    family: str
    k: int
    rows: list = field(default_factory=list)

    def rates(self, norm: str) -> list:
        """``log2(e_i / e_{i+1})`` between successive refinements."""
        vals = [getattr(r, f"err_{norm}") for r in self.rows]
        return [_rate(a, b) for a, b in zip(vals[:-1], vals[1:])]

    def records(self):
        rl2, rh1, ren = self.rates("l2"), self.rates("h1"), self.rates("energy")
        for i, r in enumerate(self.rows):
            yield {"family": self.family, "k": self.k, "refinement": i, "h_max": r.h_max,
                   "ndof": r.ndof, "err_l2": r.err_l2, "err_h1": r.err_h1,
                   "err_energy": r.err_energy,
                   "rate_l2": rl2[i - 1] if i else None,
                   "rate_h1": rh1[i - 1] if i else None,
                   "rate_energy": ren[i - 1] if i else None}


def run_convergence(family: str, k: int, refinements: int, problem: BenchmarkProblem,
                    base: int = 5, options: AssemblyOptions | None = None,
                    solver: SolveOptions | None = None, workers: int | None = None) -> ConvergenceTable:
    """Solve on ``base * 2^i`` partitions, ``i < refinements``.

    A solver failure leaves NaN errors in its row and the study continues.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if refinements < 1:
        raise ValueError("refinements must be >= 1")
    table = ConvergenceTable(family, k)
    for i in range(refinements):
        mesh = generate(family, base * 2**i)
        try:
            report = compute_errors(solve_problem(mesh, k, problem, options, solver, workers))
        except SolverError:
            report = ErrorReport(mesh.h_max, build_dof_map(mesh, k).n_dofs)
        table.rows.append(report)
    return table


def sweep_alpha(mesh: Mesh, k: int, alphas=ALPHA_SWEEP, reaction: bool = False,
                options: AssemblyOptions | None = None, solver: SolveOptions | None = None,
                workers: int | None = None) -> list:
    """Errors of problem 1 at fixed mesh over a range of diffusion scales."""
    return [(a, compute_errors(solve_problem(mesh, k, problem1(a, reaction), options, solver, workers)))
            for a in alphas]


# ---------------------------------------------------------------- layer report


@dataclass
class LayerReport:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    u_min: float
    u_max: float
    plateau_one: float
    plateau_zero: float
    n_one: int
    n_zero: int


def sample_grid(n: int = 200):
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c, indexing="xy")
    return X.ravel(), Y.ravel()


def sample_solution(sol: Solution, x, y) -> np.ndarray:
    """Evaluate ``Pi0_k u_h`` at points; each point goes to the first cell containing it."""
    mesh, k = sol.mesh, sol.k
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    out = np.full(x.shape, np.nan)
    owner = np.full(x.shape, -1)
    for ci in range(mesh.n_cells):
        xy = mesh.cell_xy(ci)
        lo, hi = xy.min(0), xy.max(0)
        cand = np.flatnonzero((owner < 0) & (x >= lo[0]) & (x <= hi[0]) & (y >= lo[1]) & (y <= hi[1]))
        if len(cand):
            inside = np.asarray(kernels.points_in_polygon(x[cand], y[cand], xy), dtype=bool)
            owner[cand[inside]] = ci
    lost = np.flatnonzero(owner < 0)
    if len(lost):
        # points on shared edges can slip through the parity test
        cent = np.array([c.centroid for c in mesh.cells])
        d = (x[lost, None] - cent[None, :, 0]) ** 2 + (y[lost, None] - cent[None, :, 1]) ** 2
        owner[lost] = np.argmin(d, axis=1)
    for ci in np.unique(owner):
        ops = sol.system.operators[ci]
        idx = np.flatnonzero(owner == ci)
        M, _, _ = kernels.monomial_table(np.ascontiguousarray(np.stack([x[idx], y[idx]], 1)),
                                         np.asarray(ops.basis.center), ops.h, k)
        out[idx] = M @ (ops.Pi0k @ sol.dofs[sol.system.dofmap.cell(ci)])
    return out


def layer_regions(x, y, margin: float, theta: float = LAYER_THETA):
    """Masks of the two plateaus, at distance > ``margin`` from every layer.

    Layers: the characteristic through ``(0, 0.2)`` and the outflow sides
    ``x = 1`` and ``y = 1``.
    """
    nx, ny = -math.sin(theta), math.cos(theta)
    dist = nx * x + ny * (y - LAYER_SPLIT)  # signed, positive above
    away = (1 - x > margin) & (1 - y > margin)
    return away & (dist < -margin), away & (dist > margin)


def layer_problem_report(mesh: Mesh, k: int, problem: BenchmarkProblem | None = None,
                         n_samples: int = 200, options: AssemblyOptions | None = None,
                         solver: SolveOptions | None = None, workers: int | None = None) -> LayerReport:
    problem = problem or layer_problem()
    sol = solve_problem(mesh, k, problem, options, solver, workers)
    x, y = sample_grid(n_samples)
    u = sample_solution(sol, x, y)
    one, zero = layer_regions(x, y, 5 * mesh.h_max)
    return LayerReport(x, y, u, float(np.nanmin(u)), float(np.nanmax(u)),
                       float(np.mean(np.abs(u[one] - 1))) if one.any() else math.nan,
                       float(np.mean(np.abs(u[zero]))) if zero.any() else math.nan,
                       int(one.sum()), int(zero.sum()))


def patch_errors(mesh: Mesh, k: int, **coeffs) -> list:
    """Relative L2 errors for every monomial of degree <= k."""
    out = []
    for a, b in exponents(k):
        sol = solve_problem(mesh, k, monomial_problem(a, b, **coeffs))
        out.append(((a, b), compute_errors(sol).err_l2))
    return out
