"""Nonconforming virtual element space: dofs, dof numbering and projectors.

Local dofs of a cell with ``n_E`` edges, in this order:

* for every edge (cell order) the moments ``1/|e| int_e v t^j``, ``j < k``,
  where ``t`` is the scaled coordinate from the edge midpoint along the
  edge's global orientation;
* the interior moments ``1/|E| int_E v m_a``, ``|a| <= k-2``.

All projector matrices map a local dof vector to monomial coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vemsupg.mesh import Mesh
from vemsupg.poly import (MonomialBasis, QuadratureError, QuadratureRule, cell_quadrature,
                          derivative_maps, dim_poly, edge_rule_reference, laplacian_map)


class ElementError(ArithmeticError):
    def __init__(self, cell_id, message):
        self.cell_id = cell_id
        super().__init__(f"cell {cell_id}: {message}")


def n_local_dofs(n_edges: int, k: int) -> int:
    return n_edges * k + k * (k - 1) // 2


@dataclass(frozen=True)
class LocalEdge:
    edge_id: int
    p0: np.ndarray  # global orientation
    p1: np.ndarray
    length: float
    normal: np.ndarray  # outward from the cell

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (self.p0 + self.p1) + t[..., None] * (self.p1 - self.p0)


def local_edges(mesh: Mesh, ci: int) -> list[LocalEdge]:
    cell = mesh.cells[ci]
    out = []
    for e, sgn in zip(cell.edge_ids, cell.edge_signs):
        a, b = mesh.edge_vertices[e]
        out.append(LocalEdge(int(e), mesh.vertices[a], mesh.vertices[b],
                             float(mesh.edge_lengths[e]), sgn * mesh.edge_normals[e]))
    return out


@dataclass
class ElementOperators:
    """Dof-computable projections on one cell.

    Attributes
    ----------
    D : (N_E, n_k)
        Dofs of the monomials (column ``a`` = dofs of ``m_a``).
    PiNabla, Pi0k : (n_k, N_E)
    Pi0km1 : (n_{k-1}, N_E)
    Pi0grad : pair of (n_{k-1}, N_E)
        x and y components of the L2 projection of the gradient.
    H : (n_k, n_k)
        Monomial mass matrix; ``G`` the stiffness Gram matrix.
    """

    cell_id: int
    k: int
    basis: MonomialBasis
    rule: QuadratureRule
    area: float
    edges: list
    D: np.ndarray
    PiNabla: np.ndarray
    Pi0k: np.ndarray
    Pi0km1: np.ndarray
    Pi0grad: tuple
    H: np.ndarray
    G: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.D.shape[0]

    @property
    def h(self) -> float:
        return self.basis.h

    def edge_dof(self, local_edge: int, moment: int) -> int:
        return local_edge * self.k + moment

    def cell_dof(self, a: int) -> int:
        return len(self.edges) * self.k + a


def _edge_coefficients(k: int, values: np.ndarray) -> np.ndarray:
    """Coefficients in ``t^j`` (j < k) of polynomials sampled at the k Gauss nodes."""
    t, _ = edge_rule_reference(2 * k - 1)
    V = t[:, None] ** np.arange(k)
    return np.linalg.solve(V, values)


def build_element_operators(mesh: Mesh, ci: int, k: int, exactness: int | None = None) -> ElementOperators:
    if k < 1:
        raise ValueError("k must be >= 1")
    cell = mesh.cells[ci]
    xy = mesh.cell_xy(ci)
    xE, hE, area = cell.centroid, cell.diameter, cell.area
    basis = MonomialBasis(k, (float(xE[0]), float(xE[1])), hE)
    if exactness is None:
        exactness = 2 * k + 2
    try:
        rule = cell_quadrature(xy, exactness, center=xE)
    except QuadratureError as exc:
        raise ElementError(ci, str(exc)) from exc
    edges = local_edges(mesh, ci)
    nE = len(edges)
    nk, nk1, nk2 = dim_poly(k), dim_poly(k - 1), dim_poly(k - 2)
    N = n_local_dofs(nE, k)
    cdof0 = nE * k

    M, Mx, My = _tables(basis, rule.points)
    W = rule.weights
    H = M.T @ (W[:, None] * M)
    G = Mx.T @ (W[:, None] * Mx) + My.T @ (W[:, None] * My)

    tq, wq = edge_rule_reference(2 * k + 1)
    tn, _ = edge_rule_reference(2 * k - 1)  # k nodes, exact interpolation in P_{k-1}
    D = np.zeros((N, nk))
    B = np.zeros((nk, N))
    Ex = np.zeros((nk1, N))
    Ey = np.zeros((nk1, N))
    bnd_int = np.zeros(nk)
    for l, e in enumerate(edges):
        Me, _, _ = _tables(basis, e.point(tq))
        D[l * k:(l + 1) * k, :] = (tq[:, None] ** np.arange(k)).T @ (wq[:, None] * Me)
        bnd_int += e.length * (wq @ Me)
        Mn, Mnx, Mny = _tables(basis, e.point(tn))
        dn = e.normal[0] * Mnx + e.normal[1] * Mny
        B[:, l * k:(l + 1) * k] += e.length * _edge_coefficients(k, dn).T
        cm = _edge_coefficients(k, Mn[:, :nk1])
        Ex[:, l * k:(l + 1) * k] += e.length * e.normal[0] * cm.T
        Ey[:, l * k:(l + 1) * k] += e.length * e.normal[1] * cm.T
    if nk2:
        D[cdof0:, :] = H[:nk2, :] / area
        B[:, cdof0:] -= area * laplacian_map(k).T / hE**2
        dxm, dym = derivative_maps(k - 1)
        Ex[:, cdof0:] -= area * dxm.T / hE
        Ey[:, cdof0:] -= area * dym.T / hE

    Gc = G.copy()
    if k == 1:
        Gc[0, :] = bnd_int
        B[0, :] = 0.0
        for l, e in enumerate(edges):
            B[0, l * k] = e.length
    else:
        Gc[0, :] = H[0, :]
        B[0, :] = 0.0
        B[0, cdof0] = area
    _check_conditioning(Gc, ci, "elliptic projector")
    PiNabla = np.linalg.solve(Gc, B)

    C = H @ PiNabla
    if nk2:
        C[:nk2, :] = 0.0
        C[:nk2, cdof0:] = area * np.eye(nk2)
    _check_conditioning(H, ci, "mass matrix")
    Pi0k = np.linalg.solve(H, C)
    H1 = H[:nk1, :nk1]
    Pi0km1 = np.linalg.solve(H1, C[:nk1])
    Pi0grad = (np.linalg.solve(H1, Ex), np.linalg.solve(H1, Ey))
    return ElementOperators(ci, k, basis, rule, area, edges, D, PiNabla, Pi0k, Pi0km1,
                            Pi0grad, H, G)


def _tables(basis: MonomialBasis, points):
    from vemsupg import kernels

    return kernels.monomial_table(np.ascontiguousarray(points, dtype=float),
                                  np.asarray(basis.center, dtype=float), basis.h, basis.degree)


def _check_conditioning(A, ci, what):
    s = np.linalg.svd(A, compute_uv=False)
    if not np.all(np.isfinite(s)) or s[-1] <= 1e-14 * s[0]:
        raise ElementError(ci, f"singular {what} (degenerate geometry?)")


def dof_functionals(mesh: Mesh, ci: int, k: int, f, exactness: int | None = None) -> np.ndarray:
    """Local dof values of a field ``f(x, y)`` (vectorised) on cell ``ci``."""
    if exactness is None:
        exactness = 2 * k + 2
    cell = mesh.cells[ci]
    edges = local_edges(mesh, ci)
    t, w = edge_rule_reference(exactness + k)
    out = [((t[:, None] ** np.arange(k)) * w[:, None]).T @ _call(f, e.point(t)) for e in edges]
    nk2 = dim_poly(k - 2)
    if nk2:
        basis = MonomialBasis(k - 2, tuple(cell.centroid), cell.diameter)
        rule = cell_quadrature(mesh.cell_xy(ci), exactness + k, center=cell.centroid)
        vals = _call(f, rule.points)
        out.append(basis.eval(rule.points).T @ (rule.weights * vals) / cell.area)
    return np.concatenate(out)


def edge_moments(edge: LocalEdge, k: int, f, exactness: int) -> np.ndarray:
    t, w = edge_rule_reference(exactness + k)
    return ((t[:, None] ** np.arange(k)) * w[:, None]).T @ _call(f, edge.point(t))


def _call(f, pts):
    return np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float), pts.shape[:1])


@dataclass(frozen=True)
class DofMap:
    """Global numbering: interior-edge dofs, then boundary-edge dofs, then cell dofs."""

    k: int
    edge_dofs: np.ndarray  # (n_edges, k)
    cell_dofs: np.ndarray  # (n_cells, n_{k-2})
    n_dofs: int
    boundary_mask: np.ndarray
    local_to_global: tuple

    def cell(self, ci: int) -> np.ndarray:
        return self.local_to_global[ci]


def build_dof_map(mesh: Mesh, k: int) -> DofMap:
    if k < 1:
        raise ValueError("k must be >= 1")
    order = np.concatenate([np.flatnonzero(~mesh.is_boundary), np.flatnonzero(mesh.is_boundary)])
    edge_dofs = np.empty((mesh.n_edges, k), dtype=np.int64)
    edge_dofs[order] = np.arange(mesh.n_edges * k).reshape(-1, k)
    nk2 = dim_poly(k - 2)
    start = mesh.n_edges * k
    cell_dofs = start + np.arange(mesh.n_cells * nk2, dtype=np.int64).reshape(mesh.n_cells, nk2)
    n = start + mesh.n_cells * nk2
    mask = np.zeros(n, dtype=bool)
    mask[edge_dofs[mesh.is_boundary].ravel()] = True
    l2g = tuple(np.concatenate([edge_dofs[list(c.edge_ids)].ravel(), cell_dofs[ci]])
                for ci, c in enumerate(mesh.cells))
    return DofMap(k, edge_dofs, cell_dofs, n, mask, l2g)


def interpolate(mesh: Mesh, dofmap: DofMap, f, exactness: int | None = None) -> np.ndarray:
    """Global dof vector of a field; shared edge dofs are computed once."""
    k = dofmap.k
    if exactness is None:
        exactness = 2 * k + 2
    out = np.empty(dofmap.n_dofs)
    for e in range(mesh.n_edges):
        a, b = mesh.edge_vertices[e]
        le = LocalEdge(e, mesh.vertices[a], mesh.vertices[b], float(mesh.edge_lengths[e]),
                       mesh.edge_normals[e])
        out[dofmap.edge_dofs[e]] = edge_moments(le, k, f, exactness)
    if dofmap.cell_dofs.shape[1]:
        for ci in range(mesh.n_cells):
            vals = dof_functionals(mesh, ci, k, f, exactness)
            out[dofmap.cell_dofs[ci]] = vals[len(mesh.cells[ci].edge_ids) * k:]
    return out
