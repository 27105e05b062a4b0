"""Pure NumPy versions of the hot per-element kernels.

Signatures and results match the compiled ``_ckernels`` module; the
selection between the two happens in :mod:`vemsupg.kernels`.
"""
import numpy as np


def monomial_table(points, center, h, degree):
    """Scaled monomials and their gradients at ``points``.

    Returns ``(V, Vx, Vy)``, each of shape ``(npoints, (degree+1)(degree+2)/2)``.
    """
    points = np.asarray(points, dtype=np.float64)
    npts = points.shape[0]
    nb = (degree + 1) * (degree + 2) // 2
    X = (points[:, 0] - center[0]) / h
    Y = (points[:, 1] - center[1]) / h
    px = np.ones((degree + 1, npts))
    py = np.ones((degree + 1, npts))
    for j in range(1, degree + 1):
        px[j] = px[j - 1] * X
        py[j] = py[j - 1] * Y
    V = np.empty((npts, nb))
    Vx = np.zeros((npts, nb))
    Vy = np.zeros((npts, nb))
    col = 0
    for d in range(degree + 1):
        for a2 in range(d + 1):
            a1 = d - a2
            V[:, col] = px[a1] * py[a2]
            if a1 > 0:
                Vx[:, col] = a1 * px[a1 - 1] * py[a2] / h
            if a2 > 0:
                Vy[:, col] = a2 * px[a1] * py[a2 - 1] / h
            col += 1
    return V, Vx, Vy


def element_matrices(w, P, P1, gx, gy, gxx, gxy, gyx, gyy,
                     K, divK, beta, divbeta, gamma, f, tau):
    """Quadrature sums of the local SUPG-VEM forms.

    Column ``j`` of each table is the trial dof, row ``i`` the test dof.
    ``gsr`` holds ``d(G_s)/dr`` for the projected gradient ``G``.

    Returns ``(a_diff, a_stream, b_skew, b_div, c, d, F)``.
    """
    wc = w[:, None]
    Kxx, Kxy = K[:, 0, 0, None], K[:, 0, 1, None]
    Kyx, Kyy = K[:, 1, 0, None], K[:, 1, 1, None]
    Kgx = Kxx * gx + Kxy * gy
    Kgy = Kyx * gx + Kyy * gy
    bg = beta[:, 0, None] * gx + beta[:, 1, None] * gy
    a_diff = gx.T @ (wc * Kgx) + gy.T @ (wc * Kgy)
    wbg = wc * bg
    a_stream = tau * (bg.T @ wbg)
    X = P.T @ wbg
    b_skew = 0.5 * (X - X.T)
    b_div = -0.5 * (P.T @ ((wc * divbeta[:, None]) * P))
    test = P1 + tau * bg
    c = test.T @ ((wc * gamma[:, None]) * P1)
    divKG = (divK[:, 0, None] * gx + divK[:, 1, None] * gy
             + Kxx * gxx + Kxy * gyx + Kyx * gxy + Kyy * gyy)
    d = -tau * (bg.T @ (wc * divKG))
    F = test.T @ (w * f)
    return a_diff, a_stream, b_skew, b_div, c, d, F


def points_in_polygon(px, py, poly):
    """Even-odd test of points against a closed polygon (vertices ``poly``)."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xint)
    return inside
