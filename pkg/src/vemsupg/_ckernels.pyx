# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the per-element kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def monomial_table(const double[:, ::1] points, center, double h, int degree):
    cdef Py_ssize_t npts = points.shape[0]
    cdef int nb = (degree + 1) * (degree + 2) // 2
    cdef double cx = center[0], cy = center[1]
    cdef double inv_h = 1.0 / h
    V_arr = np.empty((npts, nb))
    Vx_arr = np.zeros((npts, nb))
    Vy_arr = np.zeros((npts, nb))
    cdef double[:, ::1] V = V_arr
    cdef double[:, ::1] Vx = Vx_arr
    cdef double[:, ::1] Vy = Vy_arr
    cdef double px[16]
    cdef double py[16]
    cdef Py_ssize_t p
    cdef int d, a1, a2, col, j
    if degree > 14:
        raise ValueError("degree too large")
    for p in range(npts):
        px[0] = 1.0
        py[0] = 1.0
        for j in range(1, degree + 1):
            px[j] = px[j - 1] * (points[p, 0] - cx) * inv_h
            py[j] = py[j - 1] * (points[p, 1] - cy) * inv_h
        col = 0
        for d in range(degree + 1):
            for a2 in range(d + 1):
                a1 = d - a2
                V[p, col] = px[a1] * py[a2]
                if a1 > 0:
                    Vx[p, col] = a1 * px[a1 - 1] * py[a2] * inv_h
                if a2 > 0:
                    Vy[p, col] = a2 * px[a1] * py[a2 - 1] * inv_h
                col += 1
    return V_arr, Vx_arr, Vy_arr


cdef void _abt(double alpha, const double[:, ::1] L, const double[:, ::1] R, double beta,
               double[:, ::1] C) noexcept nogil:
    """``C = alpha L R^T + beta C`` for dof-major (n, nq) tables."""
    cdef int n = <int>L.shape[0]
    cdef int nq = <int>L.shape[1]
    cdef char tr = b'T'
    cdef char nt = b'N'
    # row-major C is the column-major transpose: C^T = R L^T
    dgemm(&tr, &nt, &n, &n, &nq, &alpha, <double*>&R[0, 0], &nq, <double*>&L[0, 0], &nq,
          &beta, &C[0, 0], &n)


def element_matrices(w, P, P1, gx, gy, gxx, gxy, gyx, gyy,
                     K, divK, beta, divbeta, gamma, f, double tau):
    cdef const double[::1] w_ = np.ascontiguousarray(w, dtype=np.float64)
    # dof-major copies so the quadrature loop is contiguous
    cdef const double[:, ::1] Pt = np.ascontiguousarray(np.asarray(P).T)
    cdef const double[:, ::1] P1t = np.ascontiguousarray(np.asarray(P1).T)
    cdef const double[:, ::1] gxt = np.ascontiguousarray(np.asarray(gx).T)
    cdef const double[:, ::1] gyt = np.ascontiguousarray(np.asarray(gy).T)
    cdef const double[:, ::1] gxxt = np.ascontiguousarray(np.asarray(gxx).T)
    cdef const double[:, ::1] gxyt = np.ascontiguousarray(np.asarray(gxy).T)
    cdef const double[:, ::1] gyxt = np.ascontiguousarray(np.asarray(gyx).T)
    cdef const double[:, ::1] gyyt = np.ascontiguousarray(np.asarray(gyy).T)
    cdef const double[:, :, ::1] K_ = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[:, ::1] divK_ = np.ascontiguousarray(divK, dtype=np.float64)
    cdef const double[:, ::1] beta_ = np.ascontiguousarray(beta, dtype=np.float64)
    cdef const double[::1] divbeta_ = np.ascontiguousarray(divbeta, dtype=np.float64)
    cdef const double[::1] gamma_ = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] f_ = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t nq = Pt.shape[1]
    cdef Py_ssize_t n = Pt.shape[0]
    cdef Py_ssize_t i, j, q
    cdef double wq, b

    shape = (n, nq)
    cdef double[:, ::1] kgx = np.empty(shape)
    cdef double[:, ::1] kgy = np.empty(shape)
    cdef double[:, ::1] bg = np.empty(shape)
    cdef double[:, ::1] wbg = np.empty(shape)
    cdef double[:, ::1] dkg = np.empty(shape)
    cdef double[:, ::1] test = np.empty(shape)
    cdef double[:, ::1] gP1 = np.empty(shape)
    cdef double[:, ::1] dP = np.empty(shape)

    a_diff_a = np.empty((n, n)); a_stream_a = np.empty((n, n))
    X_a = np.empty((n, n)); b_div_a = np.empty((n, n))
    c_a = np.empty((n, n)); d_a = np.empty((n, n)); F_a = np.empty(n)
    cdef double[:, ::1] a_diff = a_diff_a
    cdef double[:, ::1] a_stream = a_stream_a
    cdef double[:, ::1] X = X_a
    cdef double[:, ::1] b_div = b_div_a
    cdef double[:, ::1] c = c_a
    cdef double[:, ::1] d = d_a
    cdef double[::1] F = F_a
    with nogil:
        for i in range(n):
            F[i] = 0.0
            for q in range(nq):
                wq = w_[q]
                kgx[i, q] = wq * (K_[q, 0, 0] * gxt[i, q] + K_[q, 0, 1] * gyt[i, q])
                kgy[i, q] = wq * (K_[q, 1, 0] * gxt[i, q] + K_[q, 1, 1] * gyt[i, q])
                b = beta_[q, 0] * gxt[i, q] + beta_[q, 1] * gyt[i, q]
                bg[i, q] = b
                wbg[i, q] = wq * b
                dkg[i, q] = wq * (divK_[q, 0] * gxt[i, q] + divK_[q, 1] * gyt[i, q]
                                  + K_[q, 0, 0] * gxxt[i, q] + K_[q, 0, 1] * gyxt[i, q]
                                  + K_[q, 1, 0] * gxyt[i, q] + K_[q, 1, 1] * gyyt[i, q])
                test[i, q] = P1t[i, q] + tau * b
                gP1[i, q] = wq * gamma_[q] * P1t[i, q]
                dP[i, q] = wq * divbeta_[q] * Pt[i, q]
                F[i] += test[i, q] * wq * f_[q]
        _abt(1.0, gxt, kgx, 0.0, a_diff)
        _abt(1.0, gyt, kgy, 1.0, a_diff)
        _abt(tau, bg, wbg, 0.0, a_stream)
        _abt(1.0, Pt, wbg, 0.0, X)
        _abt(-0.5, Pt, dP, 0.0, b_div)
        _abt(1.0, test, gP1, 0.0, c)
        _abt(-tau, bg, dkg, 0.0, d)
    b_skew_a = 0.5 * (X_a - X_a.T)
    return a_diff_a, a_stream_a, b_skew_a, b_div_a, c_a, d_a, F_a


def points_in_polygon(px, py, poly):
    cdef const double[::1] x = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef const double[::1] y = np.ascontiguousarray(py, dtype=np.float64).ravel()
    cdef const double[:, ::1] v = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], n = v.shape[0], p, i
    out_a = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] out = out_a
    cdef double x0, y0, x1, y1
    cdef bint inside
    for p in range(m):
        inside = False
        for i in range(n):
            x0 = v[i, 0]; y0 = v[i, 1]
            x1 = v[(i + 1) % n, 0]; y1 = v[(i + 1) % n, 1]
            if (y0 > y[p]) != (y1 > y[p]):
                if x[p] < x0 + (y[p] - y0) * (x1 - x0) / (y1 - y0):
                    inside = not inside
        out[p] = inside
    return out_a.astype(bool).reshape(np.shape(px))
