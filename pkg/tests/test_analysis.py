import math

import numpy as np
import pytest
import sympy

from vemsupg.analysis import (ALPHA_SWEEP, BenchmarkProblem, ConvergenceTable, ErrorReport,
                              Solution, compute_errors, layer_dirichlet, layer_problem,
                              layer_regions, monomial_problem, patch_errors, problem1,
                              run_convergence, sample_grid, sample_solution, solve_problem,
                              sweep_alpha)
from vemsupg.assembly import assemble
from vemsupg.supg import CoefficientField
from vemsupg.vemspace import interpolate
from tests.conftest import cached_mesh, unit_square


def _symbolic_problem1(alpha, reaction):
    x, y = sympy.symbols("x y")
    u = sympy.sin(2 * sympy.pi * x) * sympy.sin(2 * sympy.pi * y) + x**5 + y**5 + 1
    K = alpha * sympy.Matrix([[1 + x**2, x * y], [x * y, 1 + y**2]])
    beta = sympy.Matrix([sympy.cos(2 * sympy.pi * x), sympy.sin(2 * sympy.pi * y)])
    grad = sympy.Matrix([sympy.diff(u, x), sympy.diff(u, y)])
    flux = K * grad
    f = -(sympy.diff(flux[0], x) + sympy.diff(flux[1], y)) + (beta.T * grad)[0]
    if reaction:
        f += sympy.exp(x + y) * u
    return (sympy.lambdify((x, y), f, "numpy"), sympy.lambdify((x, y), u, "numpy"),
            sympy.lambdify((x, y), list(grad), "numpy"))


@pytest.mark.parametrize("alpha", [1.0, 1e-7])
@pytest.mark.parametrize("reaction", [True, False])
def test_problem1_source_matches_symbolic(alpha, reaction):
    f_ref, u_ref, g_ref = _symbolic_problem1(alpha, reaction)
    prob = problem1(alpha, reaction)
    pts = np.random.default_rng(1).random((1000, 2))
    x, y = pts[:, 0], pts[:, 1]
    f = prob.coeffs.f(x, y)
    want = f_ref(x, y)
    assert np.abs(f - want).max() <= 1e-8 * max(1.0, np.abs(want).max())
    np.testing.assert_allclose(prob.u(x, y), u_ref(x, y), atol=1e-13)
    np.testing.assert_allclose(prob.grad_u(x, y), np.stack(g_ref(x, y), -1), atol=1e-12)


def test_problem1_exact_value():
    assert problem1().u(0.25, 0.25) == pytest.approx(2.001953125, abs=1e-15)


def test_problem1_divergence_of_beta():
    prob = problem1()
    pts = np.random.default_rng(2).random((50, 2))
    numeric = CoefficientField(K=prob.coeffs.K, beta=prob.coeffs.beta, gamma=prob.coeffs.gamma,
                               f=prob.coeffs.f)
    fd = numeric.div_beta(pts[:, 0], pts[:, 1], 1.0)
    np.testing.assert_allclose(prob.coeffs.div_beta(pts[:, 0], pts[:, 1], 1.0), fd, atol=1e-6)


def test_monomial_problem_source():
    prob = monomial_problem(2, 1, K=((2.0, 0.5), (0.5, 1.0)), beta=(1.0, -2.0), gamma=3.0)
    x, y = 0.3, 0.7
    # -div(K grad u) + beta.grad u + gamma u for u = x^2 y
    want = -(2.0 * 2 * y + 2 * 0.5 * 2 * x) + (2 * x * y - 2.0 * x**2) + 3.0 * x**2 * y
    assert float(prob.coeffs.f(np.array(x), np.array(y))) == pytest.approx(want)


@pytest.mark.parametrize("family", ["m1", "m2", "m3", "m4"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_interpolant_of_polynomial_has_no_error(family, k):
    mesh = cached_mesh(family, 5)
    prob = monomial_problem(k - 1, 1)
    system = assemble(mesh, k, prob.coeffs, prob.dirichlet)
    uh = interpolate(mesh, system.dofmap, prob.u)
    rep = compute_errors(Solution(mesh, k, uh, system, prob))
    assert rep.err_l2 <= 1e-10 and rep.err_h1 <= 1e-10 and rep.err_energy <= 1e-10
    assert rep.ndof == system.dofmap.n_dofs and rep.h_max == mesh.h_max


def test_errors_without_exact_solution():
    mesh = cached_mesh("m1", 5)
    sol = solve_problem(mesh, 1, layer_problem())
    rep = compute_errors(sol)
    assert math.isnan(rep.err_l2) and rep.ndof == sol.system.dofmap.n_dofs


@pytest.mark.parametrize("k", [1, 2])
def test_patch_errors_small(k):
    for _, err in patch_errors(unit_square(), k):
        assert err <= 1e-12


def test_rates_on_m1_k1():
    table = run_convergence("m1", 1, 4, problem1())
    assert len(table.rows) == 4
    h1, l2 = table.rates("h1"), table.rates("l2")
    # the coarsest pair is still pre-asymptotic
    assert all(0.8 <= r <= 1.3 for r in h1[1:])
    assert 1.7 <= l2[-1] <= 2.5
    hs = [r.h_max for r in table.rows]
    np.testing.assert_allclose(np.array(hs[:-1]) / np.array(hs[1:]), 2.0, rtol=1e-12)


def test_convergence_table_records():
    rows = [ErrorReport(0.2, 10, 4.0, 2.0, 2.0), ErrorReport(0.1, 40, 1.0, 1.0, 0.5)]
    table = ConvergenceTable("m1", 1, rows)
    rec = list(table.records())
    assert rec[0]["rate_l2"] is None and rec[1]["rate_l2"] == pytest.approx(2.0)
    assert rec[1]["rate_h1"] == pytest.approx(1.0) and rec[1]["refinement"] == 1


def test_run_convergence_validates():
    with pytest.raises(ValueError):
        run_convergence("m1", 4, 2, problem1())
    with pytest.raises(ValueError):
        run_convergence("m1", 1, 0, problem1())


def test_alpha_sweep_values():
    assert len(ALPHA_SWEEP) == 8
    assert ALPHA_SWEEP[0] == 1e-4 and ALPHA_SWEEP[-1] == pytest.approx(1e-11)
    out = sweep_alpha(cached_mesh("m4", 5), 1, alphas=(1e-4, 1e-11))
    errs = [r.err_h1 for _, r in out]
    assert all(np.isfinite(errs)) and max(errs) / min(errs) <= 10


def test_layer_dirichlet_data():
    x = np.array([0.5, 0.0, 0.0, 1.0, 0.3])
    y = np.array([0.0, 0.1, 0.5, 0.5, 1.0])
    np.testing.assert_array_equal(layer_dirichlet(x, y), [1, 1, 0, 0, 0])


def test_layer_regions_geometry():
    x, y = sample_grid(200)
    assert len(x) == 40000 and x.min() == pytest.approx(0.0025)
    one, zero = layer_regions(x, y, 0.1)
    assert not (one & zero).any()
    assert (y[one] < x[one] + 0.2).all() and (y[zero] > x[zero] + 0.2).all()
    assert (x[one | zero] < 0.9).all() and (y[one | zero] < 0.9).all()


def test_sampling_reproduces_polynomial():
    mesh = cached_mesh("m2", 5)
    prob = monomial_problem(1, 2)
    system = assemble(mesh, 3, prob.coeffs, prob.dirichlet)
    uh = interpolate(mesh, system.dofmap, prob.u)
    x, y = sample_grid(40)
    # include points on cell edges and vertices
    x = np.concatenate([x, mesh.vertices[:, 0]])
    y = np.concatenate([y, mesh.vertices[:, 1]])
    u = sample_solution(Solution(mesh, 3, uh, system, prob), x, y)
    np.testing.assert_allclose(u, prob.u(x, y), atol=1e-10)


def test_benchmark_problem_flags():
    assert problem1().has_exact
    assert not layer_problem().has_exact
    assert isinstance(layer_problem(), BenchmarkProblem)
