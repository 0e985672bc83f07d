import numpy as np
import pytest

from hybridfem import (
    DG,
    RT,
    Trace,
    Function,
    MixedSpace,
    break_space,
    build_unit_square,
    create_space,
)
from hybridfem.expressions import (
    AssembledVector,
    Tensor,
    assemble_global,
    compile_expr,
    evaluate_cell,
    naive_evaluate,
)
from hybridfem.forms import (
    CELL,
    INTERIOR,
    FormIR,
    IntegralTerm,
    ScalarField,
    div,
    dot,
    fld,
    jump,
    test as tfn,
    trial,
)


def mass(V):
    return FormIR(V, V, [IntegralTerm(CELL, dot(tfn(), trial()))])


def three_field_system(n=2, k=1):
    """Hybridized-mixed style 3-field operator and right-hand side."""
    mesh = build_unit_square(n)
    U = break_space(create_space(mesh, RT(k)))
    P = create_space(mesh, DG(k - 1))
    M = create_space(mesh, Trace(k - 1))
    W = MixedSpace((U, P, M))
    one = ScalarField.constant(1.0)
    a = FormIR(W, W, [
        IntegralTerm(CELL, dot(tfn(0), trial(0))),
        IntegralTerm(CELL, -dot(div(tfn(0)), trial(1))),
        IntegralTerm(CELL, dot(tfn(1), div(trial(0)))),
        IntegralTerm(CELL, dot(tfn(1), trial(1))),
        IntegralTerm(INTERIOR, dot(jump(tfn(0)), trial(2))),
        IntegralTerm(INTERIOR, -dot(tfn(2), jump(trial(0)))),
    ])
    f = FormIR(W, None, [IntegralTerm(CELL, dot(tfn(1), fld(one)))])
    return mesh, W, a, f


def test_inverse_of_dg0_mass():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(0))
    expr = Tensor(mass(V)).inv
    plan = compile_expr(expr)
    assert len(plan.kernels) == 2
    np.testing.assert_allclose(evaluate_cell(plan, 0), [[2.0]], atol=1e-13)


def test_cse_shared_subtree():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(1))
    A = Tensor(mass(V))
    plan = compile_expr(A * A)
    ops = [k.op for k in plan.kernels]
    assert ops == ["assemble", "mul"]
    np.testing.assert_allclose(
        evaluate_cell(plan, 1), naive_evaluate(A * A, 1), atol=1e-14
    )


def test_inverse_times_self_is_identity():
    mesh = build_unit_square(2)
    V = create_space(mesh, DG(2))
    A = Tensor(mass(V))
    plan = compile_expr(A.inv * A)
    for c in range(mesh.n_cells):
        np.testing.assert_allclose(evaluate_cell(plan, c), np.eye(6), atol=1e-13)


def test_transpose_of_product():
    mesh, W, a, _ = three_field_system()
    A = Tensor(a)
    B = A.blocks[0, 1]
    C = A.blocks[1, 2]
    left = (B * C).T
    right = C.T * B.T
    rng = np.random.default_rng(2)
    for c in rng.integers(0, mesh.n_cells, 4):
        np.testing.assert_allclose(
            evaluate_cell(compile_expr(left), int(c)),
            evaluate_cell(compile_expr(right), int(c)),
            atol=1e-13,
        )


def test_blocks_match_submatrix():
    mesh, W, a, _ = three_field_system()
    A = Tensor(a)
    full_plan = compile_expr(A)
    off = W.local_offsets
    rng = np.random.default_rng(0)
    for c in rng.integers(0, mesh.n_cells, 3):
        full = evaluate_cell(full_plan, int(c))
        for i in range(3):
            for j in range(3):
                block = evaluate_cell(compile_expr(A.blocks[i, j]), int(c))
                np.testing.assert_allclose(
                    block, full[off[i]:off[i + 1], off[j]:off[j + 1]], atol=1e-14
                )


def test_schur_expression_matches_naive_oracle():
    """Compiled evaluation equals naive recursion on random cells."""
    mesh, W, a, f = three_field_system(n=2, k=1)
    A = Tensor(a)
    F = Tensor(f)
    S = A.blocks[2, 2] - A.blocks[2, :2] * A.blocks[:2, :2].inv * A.blocks[:2, 2]
    E = F.blocks[2] - A.blocks[2, :2] * A.blocks[:2, :2].inv * F.blocks[:2]
    rng = np.random.default_rng(42)
    for expr in (S, E):
        plan = compile_expr(expr)
        for c in rng.integers(0, mesh.n_cells, 20):
            got = evaluate_cell(plan, int(c))
            want = naive_evaluate(expr, int(c))
            scale = max(np.abs(want).max(), 1.0)
            assert np.abs(got - want).max() < 1e-12 * scale


def test_solve_matches_inverse_multiply():
    mesh, W, a, f = three_field_system()
    A = Tensor(a)
    F = Tensor(f)
    Aee = A.blocks[:2, :2]
    rhs = F.blocks[:2]
    s1 = Aee.solve(rhs, decomposition="lu")
    s2 = Aee.inv * rhs
    for c in (0, 3, 5):
        v1 = evaluate_cell(compile_expr(s1), c)
        v2 = evaluate_cell(compile_expr(s2), c)
        np.testing.assert_allclose(v1, v2, atol=1e-10)


def test_cholesky_solve_and_symmetry_guard():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(1))
    A = Tensor(mass(V))
    b = Function(V, np.arange(V.ndof_global, dtype=float))
    good = A.solve(AssembledVector(b), decomposition="cholesky")
    np.testing.assert_allclose(
        evaluate_cell(compile_expr(good), 0), naive_evaluate(good, 0), atol=1e-12
    )
    # asymmetric operand rejected
    mesh2, W, a, _ = three_field_system()
    Aee = Tensor(a).blocks[:2, :2]
    bad = Aee.solve(Tensor(a).blocks[:2, 2], decomposition="cholesky")
    with pytest.raises(ValueError):
        evaluate_cell(compile_expr(bad), 0)


def test_assembled_vector_contraction():
    mesh = build_unit_square(2)
    V = create_space(mesh, DG(1))
    rng = np.random.default_rng(8)
    u = Function(V, rng.standard_normal(V.ndof_global))
    expr = Tensor(mass(V)) * AssembledVector(u)
    for c in (0, 5):
        np.testing.assert_allclose(
            evaluate_cell(compile_expr(expr), c), naive_evaluate(expr, c), atol=1e-14
        )


def test_shape_errors():
    mesh, W, a, f = three_field_system()
    A = Tensor(a)
    with pytest.raises(ValueError):
        A.blocks[0, 0] + A.blocks[0, 1]
    with pytest.raises(ValueError):
        A.blocks[0, 1] * A.blocks[0, 1]
    with pytest.raises(ValueError):
        A.blocks[0, 1].inv
    with pytest.raises(ValueError):
        A.blocks[0, 1].T.blocks[5, 0]


def test_singular_local_solve_reports_cell():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(0))
    zero = ScalarField.constant(0.0)
    degenerate = FormIR(V, V, [
        IntegralTerm(CELL, dot(fld(zero), dot(tfn(), trial())))
    ])
    expr = Tensor(degenerate).inv
    with pytest.raises(RuntimeError, match="cell 0"):
        evaluate_cell(compile_expr(expr), 0)


def test_global_dg0_mass_diagonal():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(0))
    A = assemble_global(Tensor(mass(V)))
    np.testing.assert_allclose(A.toarray(), np.diag([0.5, 0.5]), atol=1e-15)


def test_global_trace_operator_symmetric():
    mesh, W, a, f = three_field_system(n=1, k=1)
    A = Tensor(a)
    S = A.blocks[2, 2] - A.blocks[2, :2] * A.blocks[:2, :2].inv * A.blocks[:2, 2]
    Smat = assemble_global(S)
    assert Smat.shape == (5, 5)
    dense = Smat.toarray()
    assert np.abs(dense - dense.T).max() < 1e-11


def test_global_assembly_matches_reference_scatter():
    """assemble_global equals a direct python-loop global assembly."""
    mesh, W, a, f = three_field_system(n=2, k=1)
    A = assemble_global(Tensor(a)).toarray()
    from hybridfem.forms import assemble_local

    n = W.ndof_global
    ref = np.zeros((n, n))
    gdofs = W.cell_dofs_global()
    for c in range(mesh.n_cells):
        loc = assemble_local(a, c)
        for i, gi in enumerate(gdofs[c]):
            for j, gj in enumerate(gdofs[c]):
                ref[gi, gj] += loc[i, j]
    np.testing.assert_allclose(A, ref, atol=1e-12)

    b = assemble_global(Tensor(f))
    refb = np.zeros(n)
    for c in range(mesh.n_cells):
        loc = assemble_local(f, c)
        for i, gi in enumerate(gdofs[c]):
            refb[gi] += loc[i]
    np.testing.assert_allclose(b, refb, atol=1e-13)


def test_rank1_scatter_additivity():
    mesh = build_unit_square(1)
    M = create_space(mesh, Trace(0))
    one = ScalarField.constant(1.0)
    form = FormIR(M, None, [IntegralTerm(INTERIOR, dot(tfn(), fld(one)))])
    vec = assemble_global(Tensor(form))
    f = mesh.interior_facets[0]
    dof = M.facet_dofs[f, 0]
    # both incident cells contribute length * 1
    assert abs(vec[dof] - 2.0 * np.sqrt(2.0)) < 1e-13
    assert abs(vec.sum() - vec[dof]) < 1e-14


def test_plan_describe_golden():
    mesh = build_unit_square(1)
    V = create_space(mesh, DG(0))
    A = Tensor(mass(V))
    plan = compile_expr(A.inv * A)
    expected = (
        "r0 = assemble(T0)  # 1x1\n"
        "r1 = inverse(r0)  # 1x1\n"
        "r2 = mul(r1, r0)  # 1x1\n"
        "return r2"
    )
    assert plan.describe() == expected


def test_constrained_global_matrix():
    mesh, W, a, f = three_field_system(n=1, k=1)
    A = Tensor(a)
    S = A.blocks[2, 2] - A.blocks[2, :2] * A.blocks[:2, :2].inv * A.blocks[:2, 2]
    M = W.fields[2]
    bc_dofs = sorted(M.facet_dofs[mesh.exterior_facets].ravel())
    Smat = assemble_global(S, bcs=[(d, 0.0) for d in bc_dofs])
    dense = Smat.toarray()
    for d in bc_dofs:
        row = np.zeros(5)
        row[d] = 1.0
        np.testing.assert_allclose(dense[d], row, atol=1e-15)
        np.testing.assert_allclose(dense[:, d], row, atol=1e-15)
