"""Problem coefficients and the elementwise SUPG parameter tau_E."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from vemsupg.poly import derivative_maps, dim_poly

DIVERGENCE_FREE = "divergence-free"


class CoefficientError(ValueError):
    pass


def _const(value, shape=()):
    value = np.asarray(value, dtype=float)

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(value, x.shape + shape).copy()

    return fn


@dataclass
class CoefficientField:
    """Data of ``-div(K grad u) + beta . grad u + gamma u = f``.

    Every field takes coordinate arrays ``x, y`` of a common shape ``s`` and
    returns arrays of shape ``s + (2, 2)`` (K), ``s + (2,)`` (beta, gradients)
    or ``s`` (scalars).

    ``gradK`` returns ``s + (2, 2, 2)`` with entry ``[..., r, c, t] = d K_rc / d x_t``;
    when omitted, divergences of K are taken by central differences.
    """

    K: Callable
    beta: Callable
    gamma: Callable
    f: Callable
    gradK: Optional[Callable] = None
    divbeta: Optional[Callable] = None
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    constant_K: bool = False

    @classmethod
    def constant(cls, K=((1.0, 0.0), (0.0, 1.0)), beta=(0.0, 0.0), gamma=0.0, f=0.0, **kw):
        K = np.asarray(K, dtype=float)
        return cls(K=_const(K, (2, 2)), beta=_const(beta, (2,)), gamma=_const(gamma),
                   f=f if callable(f) else _const(f),
                   gradK=_const(np.zeros((2, 2, 2)), (2, 2, 2)), divbeta=_const(0.0),
                   constant_K=True, **kw)

    def div_K(self, x, y, h):
        """Row divergence ``(sum_r dK_r0/dx_r, sum_r dK_r1/dx_r)``."""
        if self.gradK is not None:
            g = np.asarray(self.gradK(x, y))
            return np.stack([g[..., 0, 0, 0] + g[..., 1, 0, 1],
                             g[..., 0, 1, 0] + g[..., 1, 1, 1]], axis=-1)
        step = 1e-6 * h
        dKx = (np.asarray(self.K(x + step, y)) - np.asarray(self.K(x - step, y))) / (2 * step)
        dKy = (np.asarray(self.K(x, y + step)) - np.asarray(self.K(x, y - step))) / (2 * step)
        return np.stack([dKx[..., 0, 0] + dKy[..., 1, 0], dKx[..., 0, 1] + dKy[..., 1, 1]], axis=-1)

    def div_beta(self, x, y, h):
        if self.divbeta is not None:
            return np.broadcast_to(np.asarray(self.divbeta(x, y), dtype=float), np.shape(x))
        step = 1e-6 * h
        bx = np.asarray(self.beta(x + step, y))[..., 0] - np.asarray(self.beta(x - step, y))[..., 0]
        by = np.asarray(self.beta(x, y + step))[..., 1] - np.asarray(self.beta(x, y - step))[..., 1]
        return (bx + by) / (2 * step)


@dataclass
class SupgParams:
    kappa_min: float
    kappa_max: float
    beta_E: float
    gamma_E: float
    h_E: float
    Ck: float
    m_k: float
    Pe: float
    Ka: float
    tau: float
    C_tau: float
    divergence_free: bool = False
    regime: str = field(default="")

    def K_beta(self, K, beta):
        """Effective tensor ``K + tau beta beta^T`` for sampled K and beta."""
        b = np.asarray(beta)
        return np.asarray(K) + self.tau * b[..., :, None] * b[..., None, :]


def local_bounds(points, coeffs: CoefficientField):
    """Eigenvalue extremes of K and sup-norms of beta, gamma over ``points``.

    Returns ``(kappa_min, kappa_max, beta_E, gamma_E)``.
    """
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    K = np.asarray(coeffs.K(x, y), dtype=float)
    if not np.allclose(K, np.swapaxes(K, -1, -2), rtol=1e-12, atol=0.0):
        i = int(np.argmax(np.abs(K - np.swapaxes(K, -1, -2)).reshape(len(x), -1).max(1)))
        raise CoefficientError(f"K is not symmetric at point ({x[i]:.6g}, {y[i]:.6g})")
    lam = np.linalg.eigvalsh(K)
    if np.any(lam[:, 0] <= 0):
        i = int(np.argmin(lam[:, 0]))
        raise CoefficientError(f"K is not positive definite at point ({x[i]:.6g}, {y[i]:.6g})")
    beta = np.asarray(coeffs.beta(x, y), dtype=float)
    gamma = np.asarray(coeffs.gamma(x, y), dtype=float)
    return (float(lam[:, 0].min()), float(lam[:, 1].max()),
            float(np.hypot(beta[..., 0], beta[..., 1]).max()), float(np.abs(gamma).max()))


def sample_points(ops):
    """Quadrature points plus vertices of the cell behind ``ops``."""
    verts = np.array([e.p0 for e in ops.edges] + [e.p1 for e in ops.edges])
    return np.vstack([ops.rule.points, verts])


def inverse_constant(ops, coeffs: CoefficientField, space: str = "vector"):
    """Largest C with ``C h^2 ||div(K q)||^2 <= ||K q||^2`` on a polynomial space.

    ``space="vector"`` uses q in [P_{k-1}]^2, which contains every projected
    gradient the discrete forms act on; ``space="gradients"`` restricts q to
    gradients of P_k. Returns :data:`DIVERGENCE_FREE` when ``div(K q)``
    vanishes identically on the space.
    """
    k, h = ops.k, ops.h
    pts, w = ops.rule.points, ops.rule.weights
    x, y = pts[:, 0], pts[:, 1]
    K = np.asarray(coeffs.K(x, y), dtype=float)
    divK = coeffs.div_K(x, y, h)
    n1 = dim_poly(k - 1)
    M = ops.basis.eval(pts)[:, :n1]
    dM = ops.basis.grad(pts)[:, :n1, :]
    zero = np.zeros_like(M)
    # columns: vector polynomials q_j, sampled as (nq, nbasis) per component
    qx = np.hstack([M, zero])
    qy = np.hstack([zero, M])
    dqx = np.concatenate([dM, np.zeros_like(dM)], axis=1)  # d(qx)/d(x, y)
    dqy = np.concatenate([np.zeros_like(dM), dM], axis=1)
    if space == "gradients":
        dx, dy = derivative_maps(k)
        T = np.vstack([dx, dy])[:, 1:] / h  # gradient coefficients of m_a, a != 0
        qx, qy = qx @ T, qy @ T
        dqx = np.einsum("qjt,jm->qmt", dqx, T)
        dqy = np.einsum("qjt,jm->qmt", dqy, T)
    elif space != "vector":
        raise ValueError(f"unknown space {space!r}")
    Kqx = K[:, 0, 0, None] * qx + K[:, 0, 1, None] * qy
    Kqy = K[:, 1, 0, None] * qx + K[:, 1, 1, None] * qy
    div = (divK[:, 0, None] * qx + divK[:, 1, None] * qy
           + K[:, 0, 0, None] * dqx[..., 0] + K[:, 0, 1, None] * dqy[..., 0]
           + K[:, 1, 0, None] * dqx[..., 1] + K[:, 1, 1, None] * dqy[..., 1])
    A = h**2 * (div.T @ (w[:, None] * div))
    B = Kqx.T @ (w[:, None] * Kqx) + Kqy.T @ (w[:, None] * Kqy)
    scale = np.abs(B).max()
    lam = scipy.linalg.eigh(A / scale, B / scale, eigvals_only=True)
    lam_max = float(lam[-1])
    if lam_max <= 1e-12:
        return DIVERGENCE_FREE
    return 1.0 / lam_max


def tau_from_bounds(kappa_max, beta_E, gamma_E, h_E, Ck, C_tau=0.5, kappa_min=None):
    """Fill :class:`SupgParams` from the elementwise bounds.

    ``Ck`` may be :data:`DIVERGENCE_FREE`, in which case ``m_k = 1/3`` and
    the diffusive branch uses ``m_k / 2``.
    """
    if not 0 < C_tau < 1:
        raise ValueError("C_tau must lie in (0, 1)")
    div_free = Ck == DIVERGENCE_FREE
    if div_free:
        m_k = 1.0 / 3.0
        Ck = m_k / 2.0
    else:
        m_k = 2.0 * Ck
    candidates = {"diffusive": Ck * h_E**2 / kappa_max}
    if beta_E > 0:
        candidates["convective"] = h_E / (2.0 * beta_E)
    if gamma_E > 0:
        candidates["reactive"] = C_tau / gamma_E
    regime = min(candidates, key=candidates.get)
    Pe = m_k * beta_E * h_E / (2.0 * kappa_max)
    Ka = 2.0 * beta_E * C_tau / (h_E * gamma_E) if gamma_E > 0 else math.inf
    return SupgParams(kappa_min=kappa_max if kappa_min is None else kappa_min,
                      kappa_max=kappa_max, beta_E=beta_E, gamma_E=gamma_E, h_E=h_E, Ck=Ck,
                      m_k=m_k, Pe=Pe, Ka=Ka, tau=candidates[regime], C_tau=C_tau,
                      divergence_free=div_free, regime=regime)


def tau(ops, coeffs: CoefficientField, C_tau: float = 0.5, space: str = "vector") -> SupgParams:
    kmin, kmax, bE, gE = local_bounds(sample_points(ops), coeffs)
    Ck = inverse_constant(ops, coeffs, space)
    return tau_from_bounds(kmax, bE, gE, ops.h, Ck, C_tau, kappa_min=kmin)
