import numpy as np
import pytest

from hybridfem import DIRICHLET, NEUMANN, build_unit_square, mark_boundary
from hybridfem.condensation import (
    FieldSplit,
    hybridization_apply,
    hybridization_setup,
    scpc_apply,
    scpc_setup,
)
from hybridfem.expressions import Tensor, assemble_global
from hybridfem.problems import (
    conforming_mixed_system,
    hybridized_mixed_system,
    ldgh_system,
    manufactured,
)
from hybridfem.solvers import (
    KrylovConfig,
    apply_bcs,
    bc_lift_vector,
    exact_preconditioner,
    krylov_solve,
    sparse_direct_solve,
)

PROB = manufactured("sinsin")


def exact_inner(S):
    return KrylovConfig(method="cg", rtol=1e-12, maxiter=500,
                        preconditioner=exact_preconditioner(S))


def test_field_split_validation():
    FieldSplit((0, 1), (2,))
    with pytest.raises(ValueError):
        FieldSplit((0, 1), ())
    with pytest.raises(ValueError):
        FieldSplit((0, 2), (1,))
    with pytest.raises(ValueError):
        FieldSplit((0,), (0, 1))


def test_conforming_field_elimination_rejected():
    mesh = build_unit_square(2)
    ms = conforming_mixed_system(mesh, PROB, 1)
    with pytest.raises(ValueError, match="not cell-local"):
        scpc_setup(ms.a, FieldSplit((0,), (1,)))


def test_schur_matches_dense_global_oracle():
    """S equals condensing the dense global 3-field matrix block-wise."""
    mesh = build_unit_square(2)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)))
    A = assemble_global(Tensor(hs.a)).toarray()
    W = hs.space
    ne = int(W.offsets[2])
    Aee, Aec = A[:ne, :ne], A[:ne, ne:]
    Ace, Acc = A[ne:, :ne], A[ne:, ne:]
    S_oracle = Acc - Ace @ np.linalg.solve(Aee, Aec)
    S = cs.S_raw.toarray()
    scale = np.abs(S_oracle).max()
    assert np.abs(S - S_oracle).max() < 1e-12 * scale


@pytest.mark.parametrize("n", [2, 4, 8])
def test_trace_operator_spd(n):
    mesh = build_unit_square(n)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    S = cs.S.toarray()
    assert np.abs(S - S.T).max() <= 1e-10 * np.abs(S).max()
    np.linalg.cholesky(S)  # raises if not positive definite


def test_trivial_block_diagonal_schur():
    """With zero couplings the condensed operator is just A_cc."""
    from hybridfem import DG, MixedSpace, Trace, create_space
    from hybridfem.forms import CELL, EXTERIOR, INTERIOR, FormIR, IntegralTerm, dot
    from hybridfem.forms import test as tfn, trial

    mesh = build_unit_square(2)
    U = create_space(mesh, DG(0))
    M = create_space(mesh, Trace(0))
    W = MixedSpace((U, M))
    a = FormIR(W, W, [
        IntegralTerm(CELL, dot(tfn(0), trial(0))),
        IntegralTerm(INTERIOR, dot(tfn(1), trial(1))),
        IntegralTerm(EXTERIOR, dot(tfn(1), trial(1))),
    ])
    cs = scpc_setup(a, FieldSplit((0,), (1,)))
    Acc = assemble_global(Tensor(a).blocks[1, 1])
    np.testing.assert_allclose(cs.S_raw.toarray(), Acc.toarray(), atol=1e-14)


@pytest.mark.parametrize("method,degree", [("mixed-hybrid", 1), ("mixed-hybrid", 2),
                                           ("ldgh", 1), ("ldgh", 2)])
def test_condensed_solve_matches_direct(method, degree):
    mesh = build_unit_square(3)
    if method == "mixed-hybrid":
        hs = hybridized_mixed_system(mesh, PROB, degree)
    else:
        hs = ldgh_system(mesh, PROB, degree, tau=1.0)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    rhs = assemble_global(Tensor(hs.rhs))
    x, rep, stages = scpc_apply(cs, rhs, exact_inner(cs.S))
    off = int(hs.space.offsets[2])
    A = assemble_global(Tensor(hs.a))
    Ab, bb = apply_bcs(A, rhs, [(d + off, v) for d, v in hs.trace_bcs])
    xd = sparse_direct_solve(Ab, bb)
    scale = np.abs(xd).max()
    assert np.abs(x - xd).max() < 1e-9 * scale
    assert rep.converged
    assert stages.total() > 0.0


def test_zero_residual_zero_correction():
    mesh = build_unit_square(2)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    x, rep, _ = scpc_apply(cs, np.zeros(hs.space.ndof_global),
                           exact_inner(cs.S), homogeneous_bcs=True)
    assert np.abs(x).max() == 0.0
    assert rep.iterations == 0


def test_backsubstitution_satisfies_eliminated_rows():
    """Recovered fields solve the eliminated block equations."""
    mesh = build_unit_square(2)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    rng = np.random.default_rng(6)
    r = rng.standard_normal(hs.space.ndof_global)
    x, _, _ = scpc_apply(cs, r, exact_inner(cs.S), homogeneous_bcs=True)
    A = assemble_global(Tensor(hs.a)).toarray()
    ne = int(hs.space.offsets[2])
    resid = r[:ne] - A[:ne] @ x
    assert np.abs(resid).max() < 1e-9 * max(np.abs(r).max(), 1.0)


def test_scpc_one_iteration_outer():
    """Exact inner solves make SCPC an exact inverse: one outer iteration."""
    mesh = build_unit_square(3)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    off = int(hs.space.offsets[2])
    gbcs = [(d + off, v) for d, v in hs.trace_bcs]
    A = assemble_global(Tensor(hs.a))
    b = assemble_global(Tensor(hs.rhs))
    Ab, bb = apply_bcs(A, b, gbcs)

    def pc(r):
        return scpc_apply(cs, r, exact_inner(cs.S), homogeneous_bcs=True)[0]

    cfg = KrylovConfig(method="fgmres", rtol=1e-8, preconditioner=pc)
    x, rep = krylov_solve(Ab, bb, cfg)
    assert rep.converged
    assert rep.iterations == 1


# ---------------------------------------------------------------------------
# hybridization


def neumann_left(x, y):
    return NEUMANN if x < 1e-12 else DIRICHLET


@pytest.mark.parametrize("degree", [1, 2])
@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("labeling", [None, neumann_left])
def test_hybridized_equals_direct_mixed(degree, n, labeling):
    mesh = build_unit_square(n)
    if labeling is not None:
        mesh = mark_boundary(mesh, labeling)
    ms = conforming_mixed_system(mesh, PROB, degree)
    hm = hybridization_setup(ms.a, neumann_flux=PROB.u)
    b = assemble_global(Tensor(ms.rhs))
    x, rep, _ = hybridization_apply(hm, b, exact_inner(hm.cs.S),
                                    include_boundary_data=True)
    A = assemble_global(Tensor(ms.a))
    Ab, bb = apply_bcs(A, b, ms.flux_bcs)
    xd = sparse_direct_solve(Ab, bb)
    assert np.abs(x - xd).max() < 1e-8


def test_hybridization_one_iteration_outer():
    mesh = mark_boundary(build_unit_square(4), neumann_left)
    ms = conforming_mixed_system(mesh, PROB, 1)
    hm = hybridization_setup(ms.a, neumann_flux=PROB.u)
    A = assemble_global(Tensor(ms.a))
    b = assemble_global(Tensor(ms.rhs))
    Ab, bb = apply_bcs(A, b, ms.flux_bcs)
    x0 = bc_lift_vector(len(bb), ms.flux_bcs)

    def pc(r):
        return hybridization_apply(hm, r, exact_inner(hm.cs.S))[0]

    cfg = KrylovConfig(method="fgmres", rtol=1e-8, preconditioner=pc)
    x, rep = krylov_solve(Ab, bb, cfg, x0=x0)
    assert rep.converged
    assert rep.iterations == 1
    xd = sparse_direct_solve(Ab, bb)
    assert np.abs(x - xd).max() < 1e-8


def test_hybridization_zero_residual():
    mesh = build_unit_square(2)
    ms = conforming_mixed_system(mesh, PROB, 1)
    hm = hybridization_setup(ms.a)
    x, rep, _ = hybridization_apply(
        hm, np.zeros(ms.space.ndof_global), exact_inner(hm.cs.S)
    )
    assert np.abs(x).max() == 0.0


def test_hybridization_rejects_wrong_system():
    mesh = build_unit_square(1)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    with pytest.raises(ValueError):
        hybridization_setup(hs.a)


def test_ldgh_trace_block_sign_convention():
    """Transmission rows are assembled sign-flipped: the trace-trace
    block on an interior facet carries +tau |e| per side (the flip keeps
    the condensed operator positive definite)."""
    from hybridfem.expressions import Tensor, assemble_global

    mesh = build_unit_square(1)
    ls = ldgh_system(mesh, PROB, 0, tau=1.0)
    A22 = assemble_global(Tensor(ls.a).blocks[2, 2]).toarray()
    f = mesh.interior_facets[0]
    d = ls.trace_space.facet_dofs[f, 0]
    length = np.sqrt(2.0)
    assert abs(A22[d, d] - 2.0 * length) < 1e-12  # both sides contribute +tau|e|


def test_hybridization_zero_neumann_data():
    """With g = 0 the Neumann surface terms leave the trace rhs at zero."""
    mesh = mark_boundary(build_unit_square(2), lambda x, y: NEUMANN)
    ms = conforming_mixed_system(mesh, PROB, 1)
    zero_flux = lambda x, y: np.zeros(np.shape(x) + (2,))
    hm = hybridization_setup(ms.a, neumann_flux=zero_flux)
    assert np.abs(hm.trace_data).max() == 0.0
    hm2 = hybridization_setup(ms.a, neumann_flux=PROB.u)
    assert np.abs(hm2.trace_data).max() > 0.0


def test_manufactured_solution_accuracy():
    """The hybridized-mixed solution tracks the exact fields on refinement."""
    from hybridfem.forms import CELL, FormIR, IntegralTerm
    mesh = build_unit_square(8)
    hs = hybridized_mixed_system(mesh, PROB, 1)
    cs = scpc_setup(hs.a, FieldSplit((0, 1), (2,)), hs.trace_bcs)
    rhs = assemble_global(Tensor(hs.rhs))
    x, _, _ = scpc_apply(cs, rhs, exact_inner(cs.S))
    _, p, _ = hs.space.split(x)
    # cellwise-constant pressure vs exact solution at centroids
    geo = mesh.geometry()
    cent = geo.origins + np.einsum("cij,j->ci", geo.jacobians,
                                   np.array([1 / 3, 1 / 3]))
    err = np.abs(p - PROB.p(cent[:, 0], cent[:, 1]))
    assert err.max() < 0.05
