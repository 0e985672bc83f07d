import numpy as np
import pytest
import scipy.sparse as sp

from hybridfem.solvers import (
    KrylovConfig,
    LinearOperator,
    apply_bcs,
    dense_factor_solve,
    exact_preconditioner,
    jacobi_preconditioner,
    krylov_solve,
    sparse_direct_solve,
)


def random_spd(n, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return Q @ Q.T + n * np.eye(n)


def test_identity_solve():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(dense_factor_solve(np.eye(3), b), b)


def test_dense_lu_vs_inverse_oracle():
    A = random_spd(5, seed=3)
    B = np.random.default_rng(4).standard_normal((5, 2))
    X = dense_factor_solve(A, B, kind="lu")
    np.testing.assert_allclose(X, np.linalg.inv(A) @ B, atol=1e-10)
    Xc = dense_factor_solve(A, B, kind="cholesky")
    np.testing.assert_allclose(Xc, X, atol=1e-10)


def test_singular_matrix_pivot_breakdown():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])  # rank 1
    with pytest.raises(RuntimeError):
        dense_factor_solve(A, np.ones(2))


def test_cholesky_requires_symmetry():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    with pytest.raises(ValueError):
        dense_factor_solve(A, np.ones(2), kind="cholesky")


@pytest.mark.parametrize("method", ["cg", "gmres", "fgmres"])
def test_identity_converges_in_one_iteration(method):
    b = np.arange(1.0, 6.0)
    x, rep = krylov_solve(sp.eye(5).tocsr(), b, KrylovConfig(method=method))
    np.testing.assert_allclose(x, b, atol=1e-12)
    assert rep.converged
    assert rep.iterations == 1


@pytest.mark.parametrize("method", ["cg", "gmres", "fgmres"])
def test_spd_system_matches_direct(method):
    A = sp.csr_matrix(random_spd(40, seed=7))
    b = np.random.default_rng(1).standard_normal(40)
    cfg = KrylovConfig(method=method, rtol=1e-10, maxiter=500)
    x, rep = krylov_solve(A, b, cfg)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-7)


@pytest.mark.parametrize("method", ["cg", "fgmres"])
def test_exact_preconditioner_single_iteration(method):
    A = sp.csr_matrix(random_spd(30, seed=2))
    b = np.random.default_rng(5).standard_normal(30)
    cfg = KrylovConfig(method=method, rtol=1e-8,
                       preconditioner=exact_preconditioner(A))
    x, rep = krylov_solve(A, b, cfg)
    assert rep.converged
    assert rep.iterations == 1


def test_jacobi_accelerates_cg():
    rng = np.random.default_rng(11)
    d = np.concatenate([np.ones(20), 1e3 * np.ones(20)])
    A = sp.diags(d).tocsr()
    b = rng.standard_normal(40)
    plain = krylov_solve(A, b, KrylovConfig(method="cg", rtol=1e-10, maxiter=400))[1]
    prec = krylov_solve(
        A, b, KrylovConfig(method="cg", rtol=1e-10, maxiter=400,
                           preconditioner=jacobi_preconditioner(A))
    )[1]
    assert prec.converged
    assert prec.iterations <= plain.iterations
    assert prec.iterations == 1  # diagonal system: Jacobi is exact


def test_cg_residual_history_reaches_tolerance():
    A = sp.csr_matrix(random_spd(25, seed=9))
    b = np.ones(25)
    x, rep = krylov_solve(A, b, KrylovConfig(method="cg", rtol=1e-9, maxiter=200))
    assert rep.converged
    true_res = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert true_res <= 1e-9
    assert abs(true_res - rep.residual) < 1e-12


def test_nonconvergence_reported_not_raised():
    A = sp.csr_matrix(random_spd(50, seed=13))
    b = np.ones(50)
    x, rep = krylov_solve(A, b, KrylovConfig(method="cg", rtol=1e-14, maxiter=2))
    assert not rep.converged
    assert rep.iterations == 2


def test_gmres_restart_on_nonsymmetric():
    # mild nonnormal perturbation keeps the field of values positive, so
    # restarted GMRES must converge
    rng = np.random.default_rng(21)
    A = sp.csr_matrix(np.eye(30) + 0.1 * rng.standard_normal((30, 30)))
    b = rng.standard_normal(30)
    cfg = KrylovConfig(method="gmres", rtol=1e-10, restart=10, maxiter=400)
    x, rep = krylov_solve(A, b, cfg)
    assert rep.converged
    assert rep.iterations > 10  # at least one restart happened
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-6)


def test_matrix_free_operator():
    A = random_spd(20, seed=17)
    op = LinearOperator((20, 20), lambda v: A @ v)
    b = np.ones(20)
    x, rep = krylov_solve(op, b, KrylovConfig(method="cg", rtol=1e-10, maxiter=200))
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-7)


def test_initial_guess_respected():
    A = sp.csr_matrix(random_spd(15, seed=23))
    xexact = np.random.default_rng(3).standard_normal(15)
    b = A @ xexact
    x, rep = krylov_solve(A, b, KrylovConfig(method="fgmres", rtol=1e-12), x0=xexact)
    assert rep.iterations == 0
    np.testing.assert_allclose(x, xexact)


def test_sparse_direct_solve_oracle():
    A = sp.csr_matrix(random_spd(50, seed=29))
    b = np.random.default_rng(30).standard_normal(50)
    x = sparse_direct_solve(A, b)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-10)
    # diagonal matrix: entrywise division
    D = sp.diags(np.arange(1.0, 6.0)).tocsr()
    np.testing.assert_allclose(sparse_direct_solve(D, np.ones(5)),
                               1.0 / np.arange(1.0, 6.0))


def test_sparse_direct_singular_detected():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(RuntimeError):
        sparse_direct_solve(A, np.ones(2))


def test_apply_bcs_with_lift():
    A = sp.csr_matrix(random_spd(10, seed=31))
    b = np.random.default_rng(32).standard_normal(10)
    bcs = [(2, 1.5), (7, -0.5)]
    Ab, bb = apply_bcs(A, b, bcs)
    x = sparse_direct_solve(Ab, bb)
    assert abs(x[2] - 1.5) < 1e-12 and abs(x[7] + 0.5) < 1e-12
    # free equations are satisfied against the original operator
    r = b - A @ x
    free = [i for i in range(10) if i not in (2, 7)]
    assert np.abs(r[free]).max() < 1e-10


def test_dimension_mismatch():
    A = sp.eye(4).tocsr()
    with pytest.raises(ValueError):
        krylov_solve(A, np.ones(5), KrylovConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(rtol=2.0)
    with pytest.raises(ValueError):
        KrylovConfig(maxiter=0)
    with pytest.raises(ValueError):
        KrylovConfig(method="sor")


def test_cg_error_anorm_monotone():
    """The A-norm of the CG error never increases with the iteration count."""
    A = random_spd(20, seed=41)
    As = sp.csr_matrix(A)
    xexact = np.random.default_rng(42).standard_normal(20)
    b = A @ xexact
    prev = np.inf
    for its in range(1, 12):
        x, _ = krylov_solve(As, b, KrylovConfig(method="cg", rtol=1e-15,
                                                maxiter=its))
        e = x - xexact
        anorm = float(e @ (A @ e))
        assert anorm <= prev * (1 + 1e-12)
        prev = anorm


def test_gmres_residual_monotone_within_cycle():
    rng = np.random.default_rng(43)
    A = np.eye(25) + 0.2 * rng.standard_normal((25, 25))
    As = sp.csr_matrix(A)
    b = rng.standard_normal(25)
    prev = np.inf
    for its in range(1, 15):  # restart=50 > n: a single Arnoldi cycle
        x, rep = krylov_solve(As, b, KrylovConfig(method="gmres", rtol=1e-15,
                                                  maxiter=its))
        res = np.linalg.norm(b - A @ x)
        assert res <= prev * (1 + 1e-10)
        prev = res


def test_iteration_counts_deterministic():
    A = sp.csr_matrix(random_spd(30, seed=44))
    b = np.random.default_rng(45).standard_normal(30)
    cfg = KrylovConfig(method="cg", rtol=1e-9, maxiter=200)
    reps = [krylov_solve(A, b, cfg)[1].iterations for _ in range(3)]
    assert reps[0] == reps[1] == reps[2]
