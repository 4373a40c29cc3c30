import numpy as np
import pytest
import scipy.sparse as sp

from conftest import W5, W7, column_problem
from emqs.formulations import assemble
from emqs.solvers import (
    MaxIterations,
    NotBlockTriangular,
    SingularMatrix,
    block_back_substitute,
    cocg,
    equilibrate,
    solve,
    solve_direct,
    solve_iterative,
)


def _asm(p, ident, w=W7, **kw):
    return assemble(ident, p.ops, p.mat, p.exc, w, **kw)


@pytest.fixture(scope="module")
def moderate():
    return column_problem(3, kappa=1e3)


@pytest.fixture(scope="module")
def mild():
    # low contrast keeps the condition number near 1e6, so a 1e-10 residual
    # bounds the forward error well below 10*tol
    return column_problem(3, kappa=10.0)


def test_identity_solve():
    b = np.arange(1.0, 6.0)
    x, rep = solve_direct(sp.identity(5, format="csr"), b)
    assert np.array_equal(x, b)
    assert rep.residual == 0.0 and rep.rcond == pytest.approx(1.0)


def test_empty_system():
    x, rep = solve_direct(sp.csr_matrix((0, 0)), np.zeros(0))
    assert x.size == 0 and rep.residual == 0.0


def test_regularized_residual(copper2):
    x, rep = solve_direct(_asm(copper2, "regularized"))
    assert rep.residual <= 1e-10
    assert rep.fill > 0 and 0 < rep.rcond <= 1


def test_monolithic_is_reported_singular(copper2):
    with pytest.raises(SingularMatrix, match="singular"):
        solve_direct(_asm(copper2, "monolithic"))


def test_explicitly_singular_matrix():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrix):
        solve_direct(A, np.ones(2))


def test_equilibration_symmetric():
    rng = np.random.default_rng(0)
    M = rng.random((6, 6)) * 10.0 ** rng.integers(-8, 8, (6, 6))
    M = M + M.T
    dr, dc = equilibrate(sp.csr_matrix(M))
    assert np.allclose(dr, dc)
    S = dr[:, None] * M * dc[None, :]
    assert np.allclose(np.abs(S).max(axis=1), 1, atol=1e-2)


def test_cocg_matches_direct(mild):
    s = _asm(mild, "symmetric", W7)
    tol = 1e-10
    xi, rep = solve_iterative(s, tol=tol)
    xd, _ = solve_direct(s)
    assert rep.method == "cocg" and rep.converged
    assert rep.residual <= tol
    assert np.linalg.norm(xi - xd) <= 10 * tol * np.linalg.norm(xd)


def test_cocg_residual_is_honest(moderate):
    s = _asm(moderate, "symmetric", W5)
    x, rep = solve_iterative(s, tol=1e-10)
    assert np.linalg.norm(s.rhs - s.matrix @ x) / np.linalg.norm(s.rhs) == pytest.approx(rep.residual)
    assert rep.residual <= 1e-10


def test_gmres_for_nonsymmetric(moderate):
    s = _asm(moderate, "regularized", W5)
    x, rep = solve_iterative(s, tol=1e-9)
    assert rep.method == "gmres" and rep.residual <= 1e-9


def test_max_iterations_carries_best_iterate(copper2):
    s = _asm(copper2, "symmetric")
    with pytest.raises(MaxIterations) as info:
        solve_iterative(s, tol=1e-30, maxiter=5)
    err = info.value
    assert err.x is not None and err.x.shape == (s.partition.n_dofs,)
    assert err.report.iterations <= 5 and not err.report.converged


def test_iterative_argument_checks(copper2):
    s = _asm(copper2, "symmetric")
    with pytest.raises(ValueError):
        solve_iterative(s, tol=0)
    with pytest.raises(ValueError):
        solve_iterative(s, preconditioner="ilu")
    with pytest.raises(ValueError):
        solve(s, "magic")


def test_cocg_on_complex_symmetric():
    rng = np.random.default_rng(1)
    n = 30
    R = rng.standard_normal((n, n))
    A = R @ R.T + n * np.eye(n) + 1j * np.diag(rng.random(n))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x, info = cocg(A, b, tol=1e-12)
    assert info["converged"]
    assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)
    z, info = cocg(A, np.zeros(n))
    assert np.all(z == 0) and info["iterations"] == 0


@pytest.mark.parametrize("ident", ["eqs-gauge", "tsm"])
def test_block_back_substitution_equals_monolithic_solve(copper2, ident):
    s = _asm(copper2, ident)
    xb, rep = block_back_substitute(s)
    xm, _ = solve_direct(s)
    assert np.linalg.norm(xb - xm) <= 1e-12 * np.linalg.norm(xm)
    assert rep.method == "block-direct" and rep.residual <= 1e-12


def test_block_back_substitution_iterative_inner(moderate):
    s = _asm(moderate, "tsm", W5)
    x, rep = block_back_substitute(s, "iterative", tol=1e-12)
    xd, _ = block_back_substitute(s)
    assert np.linalg.norm(x - xd) <= 1e-8 * np.linalg.norm(xd)


def test_solve_dispatch_uses_triangular_structure(copper2):
    _, rep = solve(_asm(copper2, "tsm"))
    assert rep.method == "block-direct"
    _, rep = solve(_asm(copper2, "symmetric"))
    assert rep.method == "direct"


def test_not_block_triangular(copper2):
    with pytest.raises(NotBlockTriangular):
        block_back_substitute(_asm(copper2, "symmetric"))
    with pytest.raises(ValueError):
        block_back_substitute(_asm(copper2, "tsm"), inner="magic")
