"""Manufactured elliptic problems and their discrete form sets.

The model problem is -div(kappa grad p) + c p = f on the unit square
with Dirichlet data p0 and Neumann flux data g = u . n, written in mixed
form as mu u + grad p = 0, div u + c p = f (mu = 1/kappa).  Closed-form
solutions are differentiated symbolically once and lambdified, so the
forcing term is exact by construction.

Form builders return the three-field hybridizable systems (hybridized
mixed and LDG-H), the conforming two-field mixed system, and the primal
continuous Galerkin system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .mesh import DIRICHLET, NEUMANN, Mesh
from .spaces import (
    CG,
    DG,
    RT,
    Trace,
    VectorDG,
    FunctionSpace,
    MixedSpace,
    break_space,
    create_space,
    global_edge_moments,
    project_onto_facets,
)
from .forms import (
    CELL,
    EXTERIOR,
    INTERIOR,
    FormIR,
    IntegralTerm,
    Normal,
    ScalarField,
    div,
    dot,
    fld,
    grad,
    jump,
    test,
    trial,
    vfld,
)

FIELD_DEGREE = 6  # quadrature degree surrogate for smooth manufactured data


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution bundle with coefficients and derived data."""

    name: str
    kappa: ScalarField
    c: ScalarField
    mu: ScalarField
    f: ScalarField
    p0: ScalarField
    p: Callable
    u: Callable          # exact flux, shape (..., 2)
    div_u: Callable

    def flux_expr(self):
        """Integrand factor g = u . n for Neumann surface terms."""
        return dot(vfld(self.u, FIELD_DEGREE), Normal())


def _lambdify_pair(px):
    x, y = sp.symbols("x y")
    kappa, c = sp.Integer(1), sp.Integer(1)
    ux = -kappa * sp.diff(px, x)
    uy = -kappa * sp.diff(px, y)
    f = sp.diff(ux, x) + sp.diff(uy, y) + c * px
    divu = sp.simplify(sp.diff(ux, x) + sp.diff(uy, y))
    fp = sp.lambdify((x, y), px, modules="numpy")
    fux = sp.lambdify((x, y), ux, modules="numpy")
    fuy = sp.lambdify((x, y), uy, modules="numpy")
    ff = sp.lambdify((x, y), f, modules="numpy")
    fdiv = sp.lambdify((x, y), divu, modules="numpy")

    def u_fn(xv, yv):
        xv = np.asarray(xv, dtype=float)
        out = np.empty(xv.shape + (2,))
        out[..., 0] = fux(xv, np.asarray(yv, dtype=float))
        out[..., 1] = fuy(xv, np.asarray(yv, dtype=float))
        return out

    return fp, u_fn, ff, fdiv


def manufactured(name: str = "sinsin") -> ManufacturedProblem:
    """Closed-form problems: ``sinsin`` (default) or ``expsin``."""
    x, y = sp.symbols("x y")
    if name == "sinsin":
        px = sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    elif name == "expsin":
        px = sp.exp(sp.sin(sp.pi * x) * sp.sin(sp.pi * y))
    else:
        raise ValueError(f"unknown manufactured problem {name!r}")
    fp, fu, ff, fdiv = _lambdify_pair(px)
    one = ScalarField.constant(1.0, name="1")
    return ManufacturedProblem(
        name=name,
        kappa=one,
        c=one,
        mu=one,
        f=ScalarField(ff, degree=FIELD_DEGREE, name="f"),
        p0=ScalarField(fp, degree=FIELD_DEGREE, name="p0"),
        p=fp,
        u=fu,
        div_u=fdiv,
    )


# ---------------------------------------------------------------------------
# discrete systems
#
# The transmission-constraint row (continuity of normal flux) is
# assembled with a flipped sign relative to the textbook statement, so
# the condensed trace operator A_cc - A_ce A_ee^{-1} A_ec comes out
# symmetric positive definite rather than negative definite.


@dataclass
class HybridizableSystem:
    """Three-field operator/right-hand side with trace boundary data."""

    method: str
    degree: int
    space: MixedSpace                  # (flux, scalar, trace)
    a: FormIR
    rhs: FormIR
    trace_bcs: list[tuple[int, float]]
    tau: float | None = None

    @property
    def flux_space(self) -> FunctionSpace:
        return self.space.fields[0]

    @property
    def scalar_space(self) -> FunctionSpace:
        return self.space.fields[1]

    @property
    def trace_space(self) -> FunctionSpace:
        return self.space.fields[2]


def _facet_coupling_terms(tau_field: ScalarField | None):
    """Jump couplings of the flux/trace pair on non-Dirichlet facets."""
    domains = [(INTERIOR, None), (EXTERIOR, NEUMANN)]
    terms = []
    for dom, label in domains:
        terms.append(IntegralTerm(dom, dot(jump(test(0)), trial(2)), label))
        terms.append(IntegralTerm(dom, -dot(test(2), jump(trial(0))), label))
        if tau_field is not None:
            terms.append(IntegralTerm(dom, -dot(fld(tau_field), dot(test(2), trial(1))), label))
            terms.append(IntegralTerm(dom, dot(fld(tau_field), dot(test(2), trial(2))), label))
    return terms


def hybridized_mixed_system(mesh: Mesh, prob: ManufacturedProblem,
                            degree: int) -> HybridizableSystem:
    """Hybridized RT(k) x DG(k-1) x Trace(k-1) system."""
    U = break_space(create_space(mesh, RT(degree)))
    P = create_space(mesh, DG(degree - 1))
    M = create_space(mesh, Trace(degree - 1))
    W = MixedSpace((U, P, M))
    a = FormIR(W, W, [
        IntegralTerm(CELL, dot(fld(prob.mu), dot(test(0), trial(0)))),
        IntegralTerm(CELL, -dot(div(test(0)), trial(1))),
        IntegralTerm(CELL, dot(test(1), div(trial(0)))),
        IntegralTerm(CELL, dot(fld(prob.c), dot(test(1), trial(1)))),
        *_facet_coupling_terms(None),
    ])
    rhs = FormIR(W, None, [
        IntegralTerm(CELL, dot(test(1), fld(prob.f))),
        IntegralTerm(EXTERIOR, -dot(jump(test(0)), fld(prob.p0)), DIRICHLET),
        IntegralTerm(EXTERIOR, -dot(test(2), prob.flux_expr()), NEUMANN),
    ])
    bcs = [(int(d), 0.0) for d in
           np.sort(M.facet_dofs[mesh.facets_with_label(DIRICHLET)].ravel())]
    return HybridizableSystem("mixed-hybrid", degree, W, a, rhs, bcs)


def ldgh_system(mesh: Mesh, prob: ManufacturedProblem, degree: int,
                tau: float = 1.0) -> HybridizableSystem:
    """LDG-H system of equal degree k with flux u + tau (p - lambda) n.

    Dirichlet data enters through strong trace constraints (the facet
    L2 projection of p0); the stabilized flux couplings carry tau.
    """
    if tau <= 0.0:
        raise ValueError("the LDG-H stabilization parameter must be positive")
    U = create_space(mesh, VectorDG(degree))
    P = create_space(mesh, DG(degree))
    M = create_space(mesh, Trace(degree))
    W = MixedSpace((U, P, M))
    tau_field = ScalarField.constant(tau, name="tau")
    all_facets = [(INTERIOR, None), (EXTERIOR, None)]
    flux_terms = []
    for dom, label in all_facets:
        flux_terms.append(IntegralTerm(dom, dot(jump(test(0)), trial(2)), label))
        flux_terms.append(IntegralTerm(dom, dot(test(1), jump(trial(0))), label))
        flux_terms.append(IntegralTerm(dom, dot(fld(tau_field), dot(test(1), trial(1))), label))
        flux_terms.append(IntegralTerm(dom, -dot(fld(tau_field), dot(test(1), trial(2))), label))
    a = FormIR(W, W, [
        IntegralTerm(CELL, dot(fld(prob.mu), dot(test(0), trial(0)))),
        IntegralTerm(CELL, -dot(div(test(0)), trial(1))),
        IntegralTerm(CELL, -dot(grad(test(1)), trial(0))),
        IntegralTerm(CELL, dot(fld(prob.c), dot(test(1), trial(1)))),
        *flux_terms,
        # transmission rows on non-Dirichlet facets, sign-flipped
        IntegralTerm(INTERIOR, -dot(test(2), jump(trial(0)))),
        IntegralTerm(EXTERIOR, -dot(test(2), jump(trial(0))), NEUMANN),
        IntegralTerm(INTERIOR, -dot(fld(tau_field), dot(test(2), trial(1)))),
        IntegralTerm(EXTERIOR, -dot(fld(tau_field), dot(test(2), trial(1))), NEUMANN),
        IntegralTerm(INTERIOR, dot(fld(tau_field), dot(test(2), trial(2)))),
        IntegralTerm(EXTERIOR, dot(fld(tau_field), dot(test(2), trial(2))), NEUMANN),
    ])
    rhs = FormIR(W, None, [
        IntegralTerm(CELL, dot(test(1), fld(prob.f))),
        IntegralTerm(EXTERIOR, -dot(test(2), prob.flux_expr()), NEUMANN),
    ])
    dir_facets = mesh.facets_with_label(DIRICHLET)
    bcs: list[tuple[int, float]] = []
    if len(dir_facets):
        vals = project_onto_facets(M, dir_facets, prob.p0.fn)
        for row, f in enumerate(dir_facets):
            for j, d in enumerate(M.facet_dofs[f]):
                bcs.append((int(d), float(vals[row, j])))
    bcs.sort()
    return HybridizableSystem("ldgh", degree, W, a, rhs, bcs, tau=tau)


def model_problem_forms(mesh: Mesh, prob: ManufacturedProblem, method: str,
                        degree: int, tau: float = 1.0) -> HybridizableSystem:
    """Three-field operator and right-hand side for the chosen method."""
    if method == "mixed-hybrid":
        return hybridized_mixed_system(mesh, prob, degree)
    if method == "ldgh":
        return ldgh_system(mesh, prob, degree, tau)
    raise ValueError(f"unsupported method {method!r}")


@dataclass
class MixedSystem:
    """Conforming RT x DG saddle-point system with strong flux conditions."""

    degree: int
    space: MixedSpace   # (RT conforming, DG)
    a: FormIR
    rhs: FormIR
    flux_bcs: list[tuple[int, float]]


def conforming_mixed_system(mesh: Mesh, prob: ManufacturedProblem,
                            degree: int) -> MixedSystem:
    U = create_space(mesh, RT(degree))
    P = create_space(mesh, DG(degree - 1))
    W = MixedSpace((U, P))
    a = FormIR(W, W, [
        IntegralTerm(CELL, dot(fld(prob.mu), dot(test(0), trial(0)))),
        IntegralTerm(CELL, -dot(div(test(0)), trial(1))),
        IntegralTerm(CELL, dot(test(1), div(trial(0)))),
        IntegralTerm(CELL, dot(fld(prob.c), dot(test(1), trial(1)))),
    ])
    rhs = FormIR(W, None, [
        IntegralTerm(CELL, dot(test(1), fld(prob.f))),
        IntegralTerm(EXTERIOR, -dot(jump(test(0)), fld(prob.p0)), DIRICHLET),
    ])
    bcs: list[tuple[int, float]] = []
    neu = mesh.facets_with_label(NEUMANN)
    if len(neu):
        vals = global_edge_moments(U, neu, prob.u)
        for row, f in enumerate(neu):
            for j, d in enumerate(U.facet_dofs[f]):
                bcs.append((int(d), float(vals[row, j])))
    bcs.sort()
    return MixedSystem(degree, W, a, rhs, bcs)


@dataclass
class PrimalSystem:
    degree: int
    space: FunctionSpace
    a: FormIR
    rhs: FormIR
    dirichlet_bcs: list[tuple[int, float]]


def primal_cg_system(mesh: Mesh, prob: ManufacturedProblem,
                     degree: int) -> PrimalSystem:
    V = create_space(mesh, CG(degree))
    a = FormIR(V, V, [
        IntegralTerm(CELL, dot(fld(prob.kappa), dot(grad(test()), grad(trial())))),
        IntegralTerm(CELL, dot(fld(prob.c), dot(test(), trial()))),
    ])
    rhs = FormIR(V, None, [
        IntegralTerm(CELL, dot(test(), fld(prob.f))),
        IntegralTerm(EXTERIOR, -dot(test(), prob.flux_expr()), NEUMANN),
    ])
    dofs = cg_boundary_dofs(V, mesh.facets_with_label(DIRICHLET))
    from .spaces import interpolate

    vals = interpolate(V, prob.p0.fn).coeffs
    bcs = sorted((int(d), float(vals[d])) for d in dofs)
    return PrimalSystem(degree, V, a, rhs, bcs)


def cg_boundary_dofs(V: FunctionSpace, facets: np.ndarray) -> np.ndarray:
    """Global CG dofs supported on the given facets (vertex + edge dofs)."""
    if V.family.kind != "CG":
        raise ValueError("boundary dof lookup requires a CG space")
    mesh = V.mesh
    k = V.family.degree
    nv = mesh.n_vertices
    out: set[int] = set()
    for f in facets:
        out.update(int(v) for v in mesh.facet_vertices[f])
        out.update(range(nv + int(f) * (k - 1), nv + int(f) * (k - 1) + (k - 1)))
    return np.array(sorted(out), dtype=int)
