"""Static condensation and hybridization of multi-field systems.

Two composable solver building blocks:

* :func:`scpc_setup` / :func:`scpc_apply` — generic cell-local static
  condensation of a multi-field system whose leading fields are
  discontinuous.  The condensed (trace) operator is assembled once from
  the Schur-complement expression ``A_cc - A_ce A_ee^{-1} A_ec``; each
  application forward-eliminates the residual, solves the condensed
  system with an inner Krylov method, and recovers the eliminated
  fields cell by cell (scalar reduction first, then the flux).

* :func:`hybridization_setup` / :func:`hybridization_apply` — takes a
  conforming H(div) x L2 mixed system, rebuilds it on the broken flux
  space augmented with facet multipliers enforcing normal continuity,
  and wraps the static condensation path with the conforming/broken
  residual transfer and the facet-averaging projection back to H(div).

Both applications report per-stage timings (condensation, forward
elimination, trace solve, back substitution).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .expressions import AssembledVector, Tensor, assemble_global
from .forms import (
    EXTERIOR,
    INTERIOR,
    FormIR,
    IntegralTerm,
    dot,
    jump,
    test,
    trial,
)
from .mesh import DIRICHLET, NEUMANN
from .solvers import KrylovConfig, SolveReport, krylov_solve
from .spaces import (
    BrokenTransfer,
    Function,
    MixedSpace,
    Trace,
    break_space,
    broken_transfer,
    create_space,
    project_div,
    transfer_residual,
)


@dataclass(frozen=True)
class FieldSplit:
    """Partition of field indices into eliminated and condensed sets.

    The eliminated fields must form a leading contiguous range so the
    block structure maps onto sub-block extraction.
    """

    eliminate: tuple[int, ...]
    condensed: tuple[int, ...]

    def __post_init__(self):
        e, c = set(self.eliminate), set(self.condensed)
        if not c:
            raise ValueError("the condensed field set must be nonempty")
        if e & c:
            raise ValueError("eliminated and condensed fields overlap")
        n = len(e) + len(c)
        if e | c != set(range(n)):
            raise ValueError("field split must cover all fields exactly once")
        if sorted(e) != list(range(len(e))):
            raise ValueError("eliminated fields must be the leading fields")


@dataclass
class Stages:
    """Wall-clock seconds per solver stage."""

    condensation: float = 0.0
    forward: float = 0.0
    trace_solve: float = 0.0
    backsub: float = 0.0
    postprocess: float = 0.0

    def total(self) -> float:
        return (self.condensation + self.forward + self.trace_solve
                + self.backsub + self.postprocess)


@dataclass
class CondensedSystem:
    space: MixedSpace
    split: FieldSplit
    operator: Tensor                 # the full multi-field element operator
    S: sp.csr_matrix                 # condensed operator, constraints applied
    S_raw: sp.csr_matrix             # before constraints (for lifting)
    bc_dofs: np.ndarray
    bc_values: np.ndarray
    condensed_offset: int            # global offset of the condensed fields
    setup_time: float


def _check_eliminable(space: MixedSpace, split: FieldSplit) -> None:
    for i in split.eliminate:
        s = space.fields[i]
        if not s.broken:
            raise ValueError(
                f"field {i} ({s.family.kind}({s.family.degree})) is not "
                "cell-local; eliminating it would couple neighbouring cells"
            )


def scpc_setup(a: FormIR, split: FieldSplit,
               bcs: list[tuple[int, float]] | None = None) -> CondensedSystem:
    """Assemble the condensed operator of a multi-field system.

    ``bcs`` lists (dof, value) constraints in the condensed fields'
    local numbering; rows and columns are eliminated symmetrically and
    the known values are lifted during :func:`scpc_apply`.
    """
    if not isinstance(a.test, MixedSpace) or a.rank != 2:
        raise ValueError("static condensation expects a mixed bilinear form")
    W = a.test
    _check_eliminable(W, split)
    t0 = time.perf_counter()
    ne = len(split.eliminate)
    nf = W.n_fields
    A = Tensor(a)
    S_expr = (A.blocks[ne:nf, ne:nf]
              - A.blocks[ne:nf, :ne] * A.blocks[:ne, :ne].inv * A.blocks[:ne, ne:nf])
    S_raw = assemble_global(S_expr)
    bc_dofs = np.array([d for d, _ in (bcs or [])], dtype=int)
    bc_values = np.array([v for _, v in (bcs or [])], dtype=float)
    if len(bc_dofs):
        from .expressions import constrain_matrix

        S = constrain_matrix(S_raw, bc_dofs)
    else:
        S = S_raw
    dt = time.perf_counter() - t0
    return CondensedSystem(
        space=W,
        split=split,
        operator=A,
        S=S,
        S_raw=S_raw,
        bc_dofs=bc_dofs,
        bc_values=bc_values,
        condensed_offset=int(W.offsets[ne]),
        setup_time=dt,
    )


def _condensed_rhs(cs: CondensedSystem, E: np.ndarray,
                   homogeneous: bool) -> np.ndarray:
    values = np.zeros_like(cs.bc_values) if homogeneous else cs.bc_values
    if len(cs.bc_dofs) == 0:
        return E
    lift = np.zeros(len(E))
    lift[cs.bc_dofs] = values
    out = E - cs.S_raw @ lift
    out[cs.bc_dofs] = values
    return out


def scpc_apply(cs: CondensedSystem, residual: np.ndarray, inner: KrylovConfig,
               homogeneous_bcs: bool = False
               ) -> tuple[np.ndarray, SolveReport, Stages]:
    """Apply the condensation factorization to a multi-field residual.

    Forward-eliminates the eliminated-field residual into the condensed
    right-hand side, solves the condensed system, and reconstructs the
    eliminated fields cell-wise.  With ``homogeneous_bcs`` the stored
    constraint values are replaced by zero (residual-correction mode).
    """
    W, split = cs.space, cs.split
    ne = len(split.eliminate)
    nf = W.n_fields
    A = cs.operator
    stages = Stages(condensation=cs.setup_time)
    residual = np.asarray(residual, dtype=float)
    if residual.shape != (W.ndof_global,):
        raise ValueError("residual does not match the mixed space")

    t0 = time.perf_counter()
    F = AssembledVector((W, residual))
    E_expr = (F.blocks[ne:nf]
              - A.blocks[ne:nf, :ne] * A.blocks[:ne, :ne].inv * F.blocks[:ne])
    E = _condensed_rhs(cs, assemble_global(E_expr), homogeneous_bcs)
    stages.forward = time.perf_counter() - t0

    t0 = time.perf_counter()
    lam, report = krylov_solve(cs.S, E, inner)
    stages.trace_solve = time.perf_counter() - t0

    t0 = time.perf_counter()
    condensed_fields = [W.fields[i] for i in range(ne, nf)]
    lam_vec = _as_multifield_vector(condensed_fields, lam)
    parts = _backsubstitute(A, F, lam_vec, ne)
    out = np.zeros(W.ndof_global)
    off = W.offsets
    for i, part in enumerate(parts):
        out[off[i]:off[i + 1]] = part
    out[cs.condensed_offset:] = lam
    stages.backsub = time.perf_counter() - t0
    return out, report, stages


def _as_multifield_vector(fields, vec):
    if len(fields) == 1:
        return AssembledVector(Function(fields[0], vec))
    return AssembledVector((MixedSpace(tuple(fields)), vec))


def _backsubstitute(A: Tensor, F: AssembledVector, lam: AssembledVector,
                    ne: int) -> list[np.ndarray]:
    """Cell-wise recovery of the eliminated fields.

    For the two-field elimination the scalar reduction is solved first
    and the flux recovered from it; a single block solve covers the
    general case.
    """
    nf = len(A.axes[0])
    if ne == 2:
        A00, A01, A02 = A.blocks[0, 0], A.blocks[0, 1], A.blocks[0, 2:nf]
        A10, A11, A12 = A.blocks[1, 0], A.blocks[1, 1], A.blocks[1, 2:nf]
        F0, F1 = F.blocks[0], F.blocks[1]
        Sd = A11 - A10 * A00.inv * A01
        Sl = A12 - A10 * A00.inv * A02
        p_expr = Sd.solve(F1 - A10 * A00.inv * F0 - Sl * lam, "lu")
        p_vec = assemble_global(p_expr)
        p_fn = AssembledVector(Function(A.axes[0][1], p_vec))
        u_expr = A00.solve(F0 - A01 * p_fn - A02 * lam, "lu")
        u_vec = assemble_global(u_expr)
        return [u_vec, p_vec]
    x_expr = A.blocks[:ne, :ne].solve(
        F.blocks[:ne] - A.blocks[:ne, ne:nf] * lam, "lu"
    )
    x_vec = assemble_global(x_expr)
    fields = A.axes[0][:ne]
    if ne == 1:
        return [x_vec]
    offs = np.concatenate([[0], np.cumsum([s.ndof_global for s in fields])])
    return [x_vec[offs[i]:offs[i + 1]] for i in range(ne)]


# ---------------------------------------------------------------------------
# hybridization of conforming mixed systems


@dataclass
class HybridizedMixed:
    conforming: MixedSpace           # (RT conforming, DG)
    hybrid: MixedSpace               # (broken RT, DG, Trace)
    transfer: BrokenTransfer
    cs: CondensedSystem
    trace_data: np.ndarray           # Neumann surface data for the trace rhs


def hybridization_setup(a_mixed: FormIR, neumann_flux=None) -> HybridizedMixed:
    """Hybridize a conforming H(div) x L2 bilinear form.

    The flux space is broken, trace multipliers of matching degree are
    introduced on the facets, and jump couplings enforce normal
    continuity on interior facets and the flux condition on Neumann
    facets.  ``neumann_flux`` is an optional vector callable giving the
    exact flux on the Neumann boundary; its surface integrals against
    the trace tests form the transmission right-hand side used in
    full-solve mode.
    """
    fields = a_mixed.test_fields
    if (a_mixed.rank != 2 or len(fields) != 2
            or fields[0].family.kind != "RT" or fields[0].broken
            or fields[1].family.kind != "DG"):
        raise ValueError(
            "hybridization expects a conforming RT x DG bilinear form")
    U, P = fields
    mesh = U.mesh
    Ud = break_space(U)
    bt = broken_transfer(U, Ud)
    M = create_space(mesh, Trace(U.family.degree - 1))
    W = MixedSpace((Ud, P, M))

    terms = [IntegralTerm(t.domain, t.integrand, t.label) for t in a_mixed.terms]
    for dom, label in ((INTERIOR, None), (EXTERIOR, NEUMANN)):
        terms.append(IntegralTerm(dom, dot(jump(test(0)), trial(2)), label))
        terms.append(IntegralTerm(dom, -dot(test(2), jump(trial(0))), label))
    a_hat = FormIR(W, W, terms)

    bcs = [(int(d), 0.0) for d in
           np.sort(M.facet_dofs[mesh.facets_with_label(DIRICHLET)].ravel())]
    cs = scpc_setup(a_hat, FieldSplit((0, 1), (2,)), bcs)

    trace_data = np.zeros(M.ndof_global)
    if neumann_flux is not None and len(mesh.facets_with_label(NEUMANN)):
        from .forms import Normal, vfld

        data_form = FormIR(M, None, [IntegralTerm(
            EXTERIOR, -dot(test(), dot(vfld(neumann_flux), Normal())), NEUMANN
        )])
        trace_data = assemble_global(Tensor(data_form))
    return HybridizedMixed(MixedSpace((U, P)), W, bt, cs, trace_data)


def hybridization_apply(hm: HybridizedMixed, residual: np.ndarray,
                        inner: KrylovConfig, include_boundary_data: bool = False
                        ) -> tuple[np.ndarray, SolveReport, Stages]:
    """Solve the hybridized problem for a conforming mixed residual.

    The conforming flux residual is split onto the broken space, the
    condensed trace system is solved, eliminated fields are recovered,
    and the broken flux is averaged back to H(div).  In residual
    correction mode (the default) the transmission right-hand side is
    zero; ``include_boundary_data`` adds the Neumann surface data and
    the stored trace constraint values, turning the application into a
    full solve from the problem's natural right-hand side.
    """
    Wc, W = hm.conforming, hm.hybrid
    residual = np.asarray(residual, dtype=float)
    if residual.shape != (Wc.ndof_global,):
        raise ValueError("residual does not match the conforming mixed space")
    r_u, r_p = Wc.split(residual)
    t0 = time.perf_counter()
    r_hat = np.concatenate([
        transfer_residual(hm.transfer, r_u),
        r_p,
        hm.trace_data if include_boundary_data else np.zeros_like(hm.trace_data),
    ])
    transfer_time = time.perf_counter() - t0
    x3, report, stages = scpc_apply(
        hm.cs, r_hat, inner, homogeneous_bcs=not include_boundary_data
    )
    stages.forward += transfer_time
    t0 = time.perf_counter()
    ud, p, _lam = W.split(x3)
    u = project_div(hm.transfer, Function(hm.transfer.broken, ud))
    out = np.concatenate([u.coeffs, p])
    stages.backsub += time.perf_counter() - t0
    return out, report, stages
