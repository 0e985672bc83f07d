import numpy as np
import pytest

from hybridfem import DIRICHLET, NEUMANN, build_unit_square, mark_boundary
from hybridfem.problems import (
    cg_boundary_dofs,
    conforming_mixed_system,
    hybridized_mixed_system,
    ldgh_system,
    manufactured,
    model_problem_forms,
    primal_cg_system,
)


@pytest.mark.parametrize("name", ["sinsin", "expsin"])
def test_forcing_consistent_with_solution(name):
    """f must equal -div(kappa grad p) + c p; checked by finite differences."""
    prob = manufactured(name)
    rng = np.random.default_rng(1)
    pts = 0.1 + 0.8 * rng.random((50, 2))
    # step balances truncation against cancellation in the second difference
    h = 2e-4
    x, y = pts[:, 0], pts[:, 1]
    lap = (
        prob.p(x + h, y) + prob.p(x - h, y) + prob.p(x, y + h) + prob.p(x, y - h)
        - 4.0 * prob.p(x, y)
    ) / h**2
    f_fd = -lap + prob.p(x, y)
    np.testing.assert_allclose(prob.f(x, y), f_fd, atol=1e-5)


def test_sinsin_forcing_closed_form():
    prob = manufactured("sinsin")
    rng = np.random.default_rng(2)
    x, y = rng.random(20), rng.random(20)
    expected = (2.0 * np.pi**2 + 1.0) * np.sin(np.pi * x) * np.sin(np.pi * y)
    np.testing.assert_allclose(prob.f(x, y), expected, atol=1e-12)


def test_flux_consistent_with_gradient():
    prob = manufactured("expsin")
    rng = np.random.default_rng(3)
    x, y = 0.2 + 0.6 * rng.random(20), 0.2 + 0.6 * rng.random(20)
    h = 1e-6
    gx = (prob.p(x + h, y) - prob.p(x - h, y)) / (2 * h)
    gy = (prob.p(x, y + h) - prob.p(x, y - h)) / (2 * h)
    u = prob.u(x, y)
    np.testing.assert_allclose(u[..., 0], -gx, atol=1e-6)
    np.testing.assert_allclose(u[..., 1], -gy, atol=1e-6)


def test_unknown_problem_rejected():
    with pytest.raises(ValueError):
        manufactured("cubic")


def test_system_shapes():
    mesh = build_unit_square(2)
    prob = manufactured("sinsin")
    hs = hybridized_mixed_system(mesh, prob, 1)
    assert hs.flux_space.ndof_global == 8 * 3
    assert hs.scalar_space.ndof_global == 8
    assert hs.trace_space.ndof_global == 16
    ls = ldgh_system(mesh, prob, 1, tau=1.0)
    assert ls.flux_space.ndof_global == 8 * 6
    assert ls.trace_space.ndof_global == 32
    with pytest.raises(ValueError):
        ldgh_system(mesh, prob, 1, tau=-1.0)


def test_trace_bcs_cover_dirichlet_facets():
    mesh = mark_boundary(
        build_unit_square(2), lambda x, y: NEUMANN if y < 1e-12 else DIRICHLET
    )
    prob = manufactured("sinsin")
    hs = hybridized_mixed_system(mesh, prob, 2)
    n_dir = len(mesh.facets_with_label(DIRICHLET))
    assert len(hs.trace_bcs) == 2 * n_dir
    assert all(v == 0.0 for _, v in hs.trace_bcs)
    ls = ldgh_system(mesh, prob, 1)
    # LDG-H constrains traces to the facet projection of p0 (nonzero in general)
    assert len(ls.trace_bcs) == 2 * n_dir


def test_neumann_flux_bcs_match_exact_flux():
    mesh = mark_boundary(
        build_unit_square(2), lambda x, y: NEUMANN if x < 1e-12 else DIRICHLET
    )
    prob = manufactured("expsin")
    ms = conforming_mixed_system(mesh, prob, 2)
    from hybridfem.spaces import interpolate

    exact = interpolate(ms.space.fields[0], prob.u)
    for d, v in ms.flux_bcs:
        assert abs(v - exact.coeffs[d]) < 1e-12


def test_model_problem_forms_dispatch():
    mesh = build_unit_square(2)
    prob = manufactured("sinsin")
    assert model_problem_forms(mesh, prob, "mixed-hybrid", 1).method == "mixed-hybrid"
    assert model_problem_forms(mesh, prob, "ldgh", 1, tau=2.0).tau == 2.0
    with pytest.raises(ValueError):
        model_problem_forms(mesh, prob, "primal", 1)


def test_cg_boundary_dofs():
    mesh = build_unit_square(2)
    prob = manufactured("sinsin")
    ps = primal_cg_system(mesh, prob, 3)
    boundary = cg_boundary_dofs(ps.space, mesh.exterior_facets)
    # 8 boundary vertices + 2 dofs per boundary facet
    assert len(boundary) == 8 + 2 * len(mesh.exterior_facets)
    assert len(ps.dirichlet_bcs) == len(boundary)
