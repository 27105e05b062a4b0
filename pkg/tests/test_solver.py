import numpy as np
import pytest
import scipy.sparse as sp

from vemsupg.analysis import layer_problem, monomial_problem
from vemsupg.assembly import assemble
from vemsupg.solver import SolveOptions, SolverError, relative_residual, solve
from vemsupg.vemspace import interpolate
from tests.conftest import cached_mesh


@pytest.mark.parametrize("method", ["direct", "krylov"])
def test_identity(method):
    b = np.arange(1.0, 6.0)
    np.testing.assert_allclose(solve((sp.identity(5, format="csr"), b), SolveOptions(method)), b)


@pytest.mark.parametrize("method", ["direct", "krylov"])
def test_two_by_two(method):
    A = sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(solve((A, np.array([3.0, 3.0])), SolveOptions(method)), [1, 1],
                               atol=1e-12)


@pytest.mark.parametrize("method", ["direct", "krylov"])
def test_patch_system(method):
    mesh = cached_mesh("m4", 5)
    prob = monomial_problem(2, 1)
    system = assemble(mesh, 3, prob.coeffs, prob.dirichlet)
    x = solve(system, SolveOptions(method, tolerance=1e-13))
    want = interpolate(mesh, system.dofmap, prob.u)
    assert np.linalg.norm(x - want) <= 1e-9 * np.linalg.norm(want)


def test_direct_residual_on_layer_system():
    system = assemble(cached_mesh("m2", 10), 3, layer_problem().coeffs, layer_problem().dirichlet)
    x = solve(system)
    assert relative_residual(system.matrix, x, system.rhs) <= 1e-10


def test_singular_matrix_raises():
    A = sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SolverError):
        solve((A, np.ones(2)))


def test_krylov_non_convergence_carries_residual():
    system = assemble(cached_mesh("m3", 10), 3, layer_problem().coeffs, layer_problem().dirichlet)
    opts = SolveOptions("krylov", tolerance=1e-15, max_iterations=1, restart=2)
    with pytest.raises(SolverError, match="GMRES") as info:
        solve(system, opts)
    assert info.value.residual > 1e-15


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(method="cg")
    with pytest.raises(ValueError):
        SolveOptions(tolerance=0.0)
