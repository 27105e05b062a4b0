"""Scaled monomial bases and quadrature on polygons and segments.

Cell monomials are ``m_a(x) = ((x - x_E) / h_E) ** a`` for multi-indices
``a = (a1, a2)``, ordered by total degree and, within one degree, by
decreasing power of ``x``::

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...

The ordering is nested, so the first ``dim_poly(j)`` entries of a degree-k
basis span P_j for every ``j <= k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from vemsupg import kernels


class QuadratureError(ValueError):
    pass


def dim_poly(k: int) -> int:
    """Dimension of P_k in two variables (0 for k < 0)."""
    if k < 0:
        return 0
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def exponents(k: int) -> tuple[tuple[int, int], ...]:
    return tuple((d - a2, a2) for d in range(k + 1) for a2 in range(d + 1))


def index_of(a1: int, a2: int) -> int:
    d = a1 + a2
    return dim_poly(d - 1) + a2


@lru_cache(maxsize=None)
def derivative_maps(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices mapping P_k coefficients to P_{k-1} coefficients of d/dx, d/dy.

    The maps act on the unscaled variable ``(x - x_E) / h_E``; divide by
    ``h_E`` for physical derivatives.
    """
    n_in, n_out = dim_poly(k), dim_poly(k - 1)
    dx = np.zeros((max(n_out, 0), n_in))
    dy = np.zeros_like(dx)
    for j, (a1, a2) in enumerate(exponents(k)):
        if a1 > 0:
            dx[index_of(a1 - 1, a2), j] = a1
        if a2 > 0:
            dy[index_of(a1, a2 - 1), j] = a2
    dx.setflags(write=False)
    dy.setflags(write=False)
    return dx, dy


@lru_cache(maxsize=None)
def laplacian_map(k: int) -> np.ndarray:
    """P_k -> P_{k-2} coefficient map of the (unscaled) Laplacian."""
    dx1, dy1 = derivative_maps(k)
    dx2, dy2 = derivative_maps(k - 1)
    if dim_poly(k - 2) == 0:
        out = np.zeros((0, dim_poly(k)))
    else:
        out = dx2 @ dx1 + dy2 @ dy1
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials of degree ``<= degree`` centred at ``center``."""

    degree: int
    center: tuple[float, float]
    h: float

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    @property
    def exponents(self):
        return exponents(self.degree)

    def _table(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return kernels.monomial_table(pts, np.asarray(self.center, dtype=float),
                                      float(self.h), self.degree)

    def eval(self, points) -> np.ndarray:
        """Values, shape ``(npoints, size)``."""
        return self._table(points)[0]

    def grad(self, points) -> np.ndarray:
        """Gradients, shape ``(npoints, size, 2)``."""
        _, vx, vy = self._table(points)
        return np.stack([vx, vy], axis=-1)

    def lap(self, points) -> np.ndarray:
        vals = MonomialBasis(self.degree, self.center, self.h).eval(points)
        if self.degree < 2:
            return np.zeros_like(vals)
        low = vals[:, : dim_poly(self.degree - 2)]
        return low @ laplacian_map(self.degree) / self.h**2


@dataclass(frozen=True)
class EdgeBasis:
    """Monomials ``((xi - xi_e) / h_e) ** j`` on a segment, j = 0..degree.

    The local coordinate runs from ``p0`` to ``p1``; flipping the segment
    flips the sign of the odd monomials.
    """

    degree: int
    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def size(self) -> int:
        return self.degree + 1

    def local_coordinate(self, points) -> np.ndarray:
        p0, p1 = np.asarray(self.p0, float), np.asarray(self.p1, float)
        d = p1 - p0
        mid = 0.5 * (p0 + p1)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - mid) @ d / (d @ d)

    def eval(self, points) -> np.ndarray:
        t = self.local_coordinate(points)
        return t[:, None] ** np.arange(self.degree + 1)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    t, w = roots_legendre(n)
    return 0.5 * t, 0.5 * w  # on [-1/2, 1/2]


@lru_cache(maxsize=None)
def reference_triangle_rule(exactness: int):
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    Returns barycentric-like coordinates ``(s, t)`` and weights summing to
    the reference area 1/2.
    """
    n = max(1, (exactness + 2) // 2)
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = roots_legendre(n)
    xi = 0.5 * (tj + 1.0)
    eta = 0.5 * (tl + 1.0)
    s = np.repeat(xi, n)
    t = np.outer(1.0 - xi, eta).ravel()
    w = np.outer(0.25 * wj, 0.5 * wl).ravel()
    return s, t, w


def signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _ear_clip(xy: np.ndarray) -> list[tuple[int, int, int]]:
    idx = list(range(len(xy)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(xy) ** 2:
            raise QuadratureError("ear clipping failed (non-simple polygon?)")
        m = len(idx)
        for c in range(m):
            i0, i1, i2 = idx[c - 1], idx[c], idx[(c + 1) % m]
            a, b, d = xy[i0], xy[i1], xy[i2]
            cross = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])
            if cross <= 0.0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if _in_triangle(xy[j], a, b, d):
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                del idx[c]
                break
        else:
            raise QuadratureError("no ear found (non-simple polygon?)")
    tris.append(tuple(idx))
    return tris


def _in_triangle(p, a, b, c) -> bool:
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1, d2, d3 = orient(a, b, p), orient(b, c, p), orient(c, a, p)
    return d1 >= 0 and d2 >= 0 and d3 >= 0


def triangulate(xy: np.ndarray, center=None) -> np.ndarray:
    """Split a CCW polygon into triangles, shape ``(ntri, 3, 2)``.

    Fans from ``center`` (default: area centroid) when every fan triangle is
    positively oriented, otherwise falls back to ear clipping.
    """
    xy = np.asarray(xy, dtype=float)
    area = signed_area(xy)
    if not area > 0.0:
        raise QuadratureError("polygon must be counterclockwise with positive area")
    if center is None:
        center = polygon_centroid(xy)
    c = np.asarray(center, dtype=float)
    nxt = np.roll(xy, -1, axis=0)
    fan_areas = 0.5 * ((xy[:, 0] - c[0]) * (nxt[:, 1] - c[1])
                       - (xy[:, 1] - c[1]) * (nxt[:, 0] - c[0]))
    if np.all(fan_areas > 1e-12 * area):
        return np.stack([np.broadcast_to(c, xy.shape), xy, nxt], axis=1)
    tris = _ear_clip(xy)
    return np.array([[xy[i], xy[j], xy[k]] for i, j, k in tris])


def polygon_centroid(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def triangles_quadrature(tris: np.ndarray, exactness: int) -> QuadratureRule:
    s, t, w = reference_triangle_rule(exactness)
    a = tris[:, 0, :]
    ab = tris[:, 1, :] - a
    ac = tris[:, 2, :] - a
    det = ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0]
    pts = (a[:, None, :] + s[None, :, None] * ab[:, None, :]
           + t[None, :, None] * ac[:, None, :])
    wts = det[:, None] * w[None, :]
    return QuadratureRule(pts.reshape(-1, 2), wts.ravel())


def cell_quadrature(xy, exactness: int, center=None) -> QuadratureRule:
    """Quadrature on a simple CCW polygon exact for total degree ``exactness``."""
    return triangles_quadrature(triangulate(xy, center), exactness)


def edge_quadrature(p0, p1, exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment ``p0 -> p1``."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    n = max(1, (exactness + 2) // 2)
    t, w = _gauss_legendre(n)
    mid = 0.5 * (p0 + p1)
    length = float(np.hypot(*(p1 - p0)))
    pts = mid[None, :] + t[:, None] * (p1 - p0)[None, :]
    return QuadratureRule(pts, w * length)


def edge_rule_reference(exactness: int):
    """Nodes in ``[-1/2, 1/2]`` and weights summing to 1."""
    n = max(1, (exactness + 2) // 2)
    return _gauss_legendre(n)
