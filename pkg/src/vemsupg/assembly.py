"""Local SUPG-VEM forms and global sparse assembly."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from vemsupg import kernels
from vemsupg.mesh import Mesh
from vemsupg.poly import dim_poly, edge_rule_reference
from vemsupg.supg import CoefficientField, SupgParams, tau
from vemsupg.vemspace import (DofMap, ElementOperators, LocalEdge, build_dof_map,
                              build_element_operators, edge_moments)


@dataclass
class AssemblyOptions:
    """Switches of the discrete formulation.

    convection
        ``"consistent"`` writes the skew convective form for the piecewise
        polynomial ``Pi0_k u_h``: volume terms with ``grad Pi0_k`` plus the
        centred interface terms ``1/2 <beta.n, {w}[v] - [w]{v}>`` and the
        boundary term ``1/2 <beta.n w, v>``. It reproduces polynomials
        exactly. In this mode the reaction and load terms also act on
        ``Pi0_k``. ``"volume"`` keeps only the volume terms with
        ``Pi0_{k-1} grad`` on the gradient slots and ``Pi0_{k-1}`` in the
        reaction and load terms.
    function_projection
        Projection on the function slots of the ``"volume"`` form: ``"k"``
        (Pi0_k) or ``"k-1"`` (Pi0_{k-1}).
    divergence_correction
        Add ``-1/2 (div(beta) Pi w, Pi v)`` so the skew form stays consistent
        with ``beta . grad u`` when beta is not solenoidal (zero otherwise).
    tau_space
        Polynomial space of the inverse-inequality constant, see
        :func:`vemsupg.supg.inverse_constant`.
    """

    C_tau: float = 0.5
    convection: str = "consistent"
    function_projection: str = "k"
    divergence_correction: bool = True
    tau_space: str = "vector"
    quadrature_exactness: Optional[int] = None


@dataclass
class LocalSystem:
    A: np.ndarray
    F: np.ndarray
    a_h: np.ndarray
    b_h: np.ndarray
    c_h: np.ndarray
    d_h: np.ndarray
    S: np.ndarray
    b_div: np.ndarray
    params: SupgParams


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    dirichlet_values: np.ndarray
    operators: list = field(repr=False, default_factory=list)
    params: list = field(repr=False, default_factory=list)

    @property
    def boundary_mask(self):
        return self.dofmap.boundary_mask


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("VEMSUPG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"VEMSUPG_THREADS must be an integer, got {env!r}") from None
    return default or 1


def stability_matrix(ops: ElementOperators) -> np.ndarray:
    """Unscaled dofi-dofi stabilisation ``(I - D Pi)^T (I - D Pi)``."""
    R = np.eye(ops.n_dofs) - ops.D @ ops.PiNabla
    return R.T @ R


def local_forms(ops: ElementOperators, params: SupgParams, coeffs: CoefficientField,
                options: AssemblyOptions | None = None) -> LocalSystem:
    options = options or AssemblyOptions()
    k = ops.k
    n1 = dim_poly(k - 1)
    pts, w = ops.rule.points, ops.rule.weights
    x, y = pts[:, 0], pts[:, 1]
    M, Mx, My = kernels.monomial_table(pts, np.asarray(ops.basis.center), ops.h, k)
    M1, Mx1, My1 = M[:, :n1], Mx[:, :n1], My[:, :n1]
    Gx, Gy = ops.Pi0grad
    P1 = M1 @ ops.Pi0km1
    consistent = _check_convection(options)
    if consistent or options.function_projection == "k":
        P = M @ ops.Pi0k
    elif options.function_projection == "k-1":
        P = P1
    else:
        raise ValueError(f"unknown function_projection {options.function_projection!r}")
    gx, gy = M1 @ Gx, M1 @ Gy
    K = np.asarray(coeffs.K(x, y), dtype=float)
    beta = np.asarray(coeffs.beta(x, y), dtype=float)
    gamma = np.broadcast_to(np.asarray(coeffs.gamma(x, y), dtype=float), x.shape)
    f = np.broadcast_to(np.asarray(coeffs.f(x, y), dtype=float), x.shape)
    if k > 1 or not coeffs.constant_K:
        divK = np.ascontiguousarray(coeffs.div_K(x, y, ops.h), dtype=float)
    else:
        divK = np.zeros((len(x), 2))
    if options.divergence_correction:
        divbeta = np.ascontiguousarray(coeffs.div_beta(x, y, ops.h), dtype=float)
    else:
        divbeta = np.zeros(len(x))
    # function slots of the reaction and load terms
    Q = P if consistent else P1
    a_diff, a_stream, b_skew, b_div, c, d, F = kernels.element_matrices(
        w, P, Q, gx, gy, Mx1 @ Gx, My1 @ Gx, Mx1 @ Gy, My1 @ Gy,
        K, divK, beta, divbeta, gamma, f, params.tau)
    if consistent:
        bgP = beta[:, 0, None] * (Mx @ ops.Pi0k) + beta[:, 1, None] * (My @ ops.Pi0k)
        X = P.T @ (w[:, None] * bgP)
        b_skew = 0.5 * (X - X.T)
    S = (params.kappa_max + params.tau * params.beta_E**2) * stability_matrix(ops)
    a_h = a_diff + a_stream + S
    A = a_h + b_skew + b_div + c + d
    return LocalSystem(A, np.asarray(F), a_h, b_skew, c, d, S, b_div, params)


def _check_convection(options: AssemblyOptions) -> bool:
    if options.convection not in ("consistent", "volume"):
        raise ValueError(f"unknown convection form {options.convection!r}")
    return options.convection == "consistent"


def interface_terms(mesh: Mesh, operators: list, dofmap: DofMap, coeffs: CoefficientField,
                    g: Callable):
    """Edge contributions of the consistent convective form.

    Interior edges add the skew pair ``1/2 <beta.n, {w}[v] - [w]{v}>`` on
    ``Pi0_k`` of each side. The boundary term ``1/2 <beta.n u, v>`` is
    moved to the load vector with ``u = g``, which keeps the matrix skew.
    Returns COO triplets in edge order and the load contribution.
    """
    k = dofmap.k
    t, wt = edge_rule_reference(2 * k + 2)
    rows, cols, data = [], [], []
    load = np.zeros(dofmap.n_dofs)
    for e in range(mesh.n_edges):
        a, b = mesh.edge_vertices[e]
        p0, p1 = mesh.vertices[a], mesh.vertices[b]
        pts = 0.5 * (p0 + p1) + t[:, None] * (p1 - p0)
        bn = np.asarray(coeffs.beta(pts[:, 0], pts[:, 1]), dtype=float) @ mesh.edge_normals[e]
        wb = mesh.edge_lengths[e] * wt * bn
        sides = [int(c) for c in mesh.edge_cells[e] if c >= 0]
        T = []
        for c in sides:
            ops = operators[c]
            Mc, _, _ = kernels.monomial_table(np.ascontiguousarray(pts), np.asarray(ops.basis.center),
                                              ops.h, k)
            T.append(Mc @ ops.Pi0k)
        if len(sides) == 1:
            gv = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float)
            np.add.at(load, dofmap.cell(sides[0]), -0.5 * T[0].T @ (wb * gv))
            continue
        idx = np.concatenate([dofmap.cell(c) for c in sides])
        jump = np.hstack([T[0], -T[1]])
        avg = 0.5 * np.hstack([T[0], T[1]])
        Y = -avg.T @ (wb[:, None] * jump)  # test rows, trial columns
        n = len(idx)
        rows.append(np.repeat(idx, n))
        cols.append(np.tile(idx, n))
        data.append((0.5 * (Y - Y.T)).ravel())
    return rows, cols, data, load


def element_system(mesh: Mesh, ci: int, k: int, coeffs: CoefficientField,
                   options: AssemblyOptions | None = None):
    options = options or AssemblyOptions()
    ops = build_element_operators(mesh, ci, k, options.quadrature_exactness)
    params = tau(ops, coeffs, options.C_tau, options.tau_space)
    return ops, local_forms(ops, params, coeffs, options)


def boundary_values(mesh: Mesh, dofmap: DofMap, g: Callable, exactness: int | None = None) -> np.ndarray:
    """Edge moments of the Dirichlet datum on every boundary edge."""
    k = dofmap.k
    exactness = 2 * k + 2 if exactness is None else exactness
    vals = np.zeros(dofmap.n_dofs)
    for e in mesh.boundary_edges():
        a, b = mesh.edge_vertices[e]
        le = LocalEdge(int(e), mesh.vertices[a], mesh.vertices[b], float(mesh.edge_lengths[e]),
                       mesh.edge_normals[e])
        vals[dofmap.edge_dofs[e]] = edge_moments(le, k, g, exactness)
    return vals


def assemble(mesh: Mesh, k: int, coeffs: CoefficientField, dirichlet: Callable | None = None,
             options: AssemblyOptions | None = None, workers: int | None = None,
             keep_local: bool = False) -> GlobalSystem:
    """Assemble the global system with Dirichlet data imposed strongly.

    ``dirichlet`` defaults to zero. Local systems are computed by a thread
    pool of ``workers`` (default: ``VEMSUPG_THREADS`` or 1) and scattered in
    cell order, so the result does not depend on the worker count.
    """
    options = options or AssemblyOptions()
    dofmap = build_dof_map(mesh, k)
    nw = workers or worker_count()

    def job(ci):
        return element_system(mesh, ci, k, coeffs, options)

    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(job, range(mesh.n_cells)))
    else:
        results = [job(ci) for ci in range(mesh.n_cells)]

    rows, cols, data = [], [], []
    F = np.zeros(dofmap.n_dofs)
    for ci, (_, loc) in enumerate(results):
        idx = dofmap.cell(ci)
        n = len(idx)
        rows.append(np.repeat(idx, n))
        cols.append(np.tile(idx, n))
        data.append(loc.A.ravel())
        np.add.at(F, idx, loc.F)
    g = dirichlet if dirichlet is not None else (lambda x, y: np.zeros_like(x))
    if _check_convection(options):
        r, c, d, load = interface_terms(mesh, [res[0] for res in results], dofmap, coeffs, g)
        rows += r
        cols += c
        data += d
        F += load
    A = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dofmap.n_dofs, dofmap.n_dofs)).tocsr()
    A.sort_indices()

    xb = boundary_values(mesh, dofmap, g)
    A, b = _impose_dirichlet(A, F, dofmap.boundary_mask, xb)
    ops = [r[0] for r in results]
    params = [r[1].params for r in results]
    system = GlobalSystem(A, b, dofmap, xb, ops, params)
    if keep_local:
        system.local = [r[1] for r in results]
    return system


def _impose_dirichlet(A: sp.csr_matrix, F: np.ndarray, mask: np.ndarray, xb: np.ndarray):
    b = F - A @ np.where(mask, xb, 0.0)
    A = A.copy()
    row = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    col = A.indices
    drop = mask[row] | mask[col]
    A.data[drop] = 0.0
    A.data[drop & (row == col)] = 1.0
    b[mask] = xb[mask]
    return A, b
