"""Declarative multilinear forms and element-local assembly.

A :class:`FormIR` lists its arguments (test/trial spaces, possibly
mixed), and a set of integral terms over cells, interior facets, or
labelled exterior facets.  Integrands are built from a small closed
vocabulary: argument values, gradients, divergences, facet normals,
per-side normal jumps, finite element coefficients, analytic scalar
fields, and pointwise algebra.

Interior facet terms are assembled cell-wise: each incident cell
contributes the restriction of the integrand to its own side, with
``jump`` of a vector argument meaning the normal component against the
cell's outward normal.  Summing both sides reproduces the facet jump.

Two assembly routes are provided: :func:`assemble_form` evaluates all
cells at once with batched numpy, while :func:`assemble_local` is an
independent single-cell reference implementation used as a testing
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import reference
from .mesh import DIRICHLET, NEUMANN, Mesh
from .spaces import Function, FunctionSpace, MixedSpace

QUADRATURE_MARGIN = 2  # safety margin added to estimated integrand degree


# ---------------------------------------------------------------------------
# scalar coefficient fields


@dataclass(frozen=True)
class ScalarField:
    """Analytic scalar coefficient with a polynomial degree surrogate.

    ``degree`` feeds quadrature selection; smooth non-polynomial data
    should keep the default.
    """

    fn: Callable
    degree: int = 6
    name: str = ""

    @staticmethod
    def constant(value: float, name: str = "") -> "ScalarField":
        v = float(value)
        return ScalarField(lambda x, y: np.full(np.shape(x), v), degree=0,
                           name=name or repr(v))

    def __call__(self, x, y):
        return np.asarray(self.fn(x, y), dtype=float)


# ---------------------------------------------------------------------------
# integrand expression nodes


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Sum(self, other)

    def __sub__(self, other):
        return Sum(self, Scale(-1.0, other))

    def __neg__(self):
        return Scale(-1.0, self)

    def __rmul__(self, c):
        if isinstance(c, (int, float)):
            return Scale(float(c), self)
        return NotImplemented


@dataclass(frozen=True)
class Arg(Expr):
    """Basis of one field of the test or trial argument."""

    role: str  # "test" | "trial"
    field: int = 0
    deriv: str = "value"  # "value" | "grad" | "div"


@dataclass(frozen=True)
class Coef(Expr):
    fn: Function
    __hash__ = object.__hash__
    __eq__ = object.__eq__


@dataclass(frozen=True)
class Fld(Expr):
    sf: ScalarField


@dataclass(frozen=True)
class VFld(Expr):
    """Analytic vector field (boundary flux data and the like)."""

    fn: Callable
    degree: int = 6
    __hash__ = object.__hash__
    __eq__ = object.__eq__


@dataclass(frozen=True)
class Normal(Expr):
    pass


@dataclass(frozen=True)
class Dot(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sum(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Scale(Expr):
    c: float
    x: Expr


def test(fld: int = 0) -> Arg:
    return Arg("test", fld)


def trial(fld: int = 0) -> Arg:
    return Arg("trial", fld)


def grad(a: Arg) -> Arg:
    if not isinstance(a, Arg) or a.deriv != "value":
        raise ValueError("grad applies to plain test/trial arguments")
    return Arg(a.role, a.field, "grad")


def div(a: Arg) -> Arg:
    if not isinstance(a, Arg) or a.deriv != "value":
        raise ValueError("div applies to plain test/trial arguments")
    return Arg(a.role, a.field, "div")


def dot(a: Expr, b: Expr) -> Dot:
    return Dot(a, b)


def jump(a: Expr) -> Dot:
    """Per-side normal component of a vector quantity on a facet.

    Both incident cells of an interior facet contribute their own
    restriction, so the assembled sum carries the full normal jump.
    """
    return Dot(a, Normal())


def coef(fn: Function) -> Coef:
    return Coef(fn)


def fld(sf: ScalarField) -> Fld:
    return Fld(sf)


def vfld(fn: Callable, degree: int = 6) -> VFld:
    return VFld(fn, degree)


# ---------------------------------------------------------------------------
# terms and forms

CELL = "cell"
INTERIOR = "interior_facet"
EXTERIOR = "exterior_facet"


@dataclass(frozen=True)
class IntegralTerm:
    domain: str
    integrand: Expr
    label: str | None = None  # exterior facets only; None means all

    def __post_init__(self):
        if self.domain not in (CELL, INTERIOR, EXTERIOR):
            raise ValueError(f"unknown integration domain {self.domain!r}")
        if self.label is not None and self.domain != EXTERIOR:
            raise ValueError("labels apply to exterior facet terms only")
        if self.label not in (None, DIRICHLET, NEUMANN):
            raise ValueError(f"unknown facet label {self.label!r}")


SpaceLike = Union[FunctionSpace, MixedSpace, None]


def _as_fields(space: SpaceLike) -> tuple[FunctionSpace, ...]:
    if space is None:
        return ()
    if isinstance(space, MixedSpace):
        return space.fields
    return (space,)


@dataclass
class FormIR:
    """A multilinear form over (possibly mixed) argument spaces."""

    test: SpaceLike
    trial: SpaceLike
    terms: list[IntegralTerm]

    def __post_init__(self):
        if self.trial is not None and self.test is None:
            raise ValueError("a form with a trial argument needs a test argument")
        for t in self.terms:
            self._validate_term(t)

    @property
    def rank(self) -> int:
        return (self.test is not None) + (self.trial is not None)

    @property
    def test_fields(self) -> tuple[FunctionSpace, ...]:
        return _as_fields(self.test)

    @property
    def trial_fields(self) -> tuple[FunctionSpace, ...]:
        return _as_fields(self.trial)

    @property
    def mesh(self) -> Mesh:
        for s in self.test_fields + self.trial_fields:
            return s.mesh
        for t in self.terms:
            for c in _collect(t.integrand, Coef):
                return c.fn.space.mesh
        raise ValueError("form has no arguments or coefficients")

    @property
    def coefficients(self) -> list[Function]:
        out: list[Function] = []
        for t in self.terms:
            for c in _collect(t.integrand, Coef):
                if all(c.fn is not f for f in out):
                    out.append(c.fn)
        return out

    def _validate_term(self, term: IntegralTerm) -> None:
        roles = {"test": set(), "trial": set()}
        for a in _collect(term.integrand, Arg):
            roles[a.role].add(a.field)
            fields = self.test_fields if a.role == "test" else self.trial_fields
            if not fields:
                raise ValueError(f"term references an absent {a.role} argument")
            if not 0 <= a.field < len(fields):
                raise ValueError(f"{a.role} field {a.field} out of range")
            space = fields[a.field]
            if a.deriv == "div" and not space.family.is_vector:
                raise ValueError("div applies to vector-valued arguments only")
            if a.deriv == "grad" and space.family.is_vector:
                raise ValueError("grad applies to scalar arguments only")
            if space.family.kind == "Trace" and term.domain == CELL:
                raise ValueError("trace arguments appear in facet terms only")
            if a.deriv != "value" and space.family.kind == "Trace":
                raise ValueError("trace arguments support values only")
        if self.rank >= 1 and len(roles["test"]) != 1:
            raise ValueError("each term must reference exactly one test field")
        if self.rank == 2 and len(roles["trial"]) != 1:
            raise ValueError("each term must reference exactly one trial field")
        if term.domain == CELL and _contains_normal(term.integrand):
            raise ValueError("facet normals appear in facet terms only")

    def term_blocks(self, term: IntegralTerm) -> tuple[int, int]:
        ti = tj = -1
        for a in _collect(term.integrand, Arg):
            if a.role == "test":
                ti = a.field
            else:
                tj = a.field
        return ti, tj


def _collect(node: Expr, kind) -> list:
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, kind):
            out.append(n)
        if isinstance(n, Dot) or isinstance(n, Sum):
            stack.extend((n.a, n.b))
        elif isinstance(n, Scale):
            stack.append(n.x)
    return out


def _contains_normal(node: Expr) -> bool:
    return bool(_collect(node, Normal))


# ---------------------------------------------------------------------------
# degree estimation


def _node_degree(node: Expr, form: FormIR) -> int:
    if isinstance(node, Arg):
        fields = form.test_fields if node.role == "test" else form.trial_fields
        deg = fields[node.field].family.poly_degree
        return max(deg - 1, 0) if node.deriv in ("grad", "div") else deg
    if isinstance(node, Coef):
        return node.fn.space.family.poly_degree
    if isinstance(node, Fld):
        return node.sf.degree
    if isinstance(node, VFld):
        return node.degree
    if isinstance(node, Normal):
        return 0
    if isinstance(node, Dot):
        return _node_degree(node.a, form) + _node_degree(node.b, form)
    if isinstance(node, Sum):
        return max(_node_degree(node.a, form), _node_degree(node.b, form))
    if isinstance(node, Scale):
        return _node_degree(node.x, form)
    raise TypeError(f"unknown integrand node {node!r}")


def estimate_degree(form: FormIR) -> int:
    """Conservative polynomial degree bound over all terms."""
    if not form.terms:
        return 0
    return max(_node_degree(t.integrand, form) for t in form.terms)


def _term_exactness(term: IntegralTerm, form: FormIR) -> int:
    need = _node_degree(term.integrand, form) + QUADRATURE_MARGIN
    if need > reference.MAX_EXACTNESS:
        raise ValueError(
            f"required quadrature exactness {need} exceeds the supported "
            f"maximum {reference.MAX_EXACTNESS}"
        )
    return need


# ---------------------------------------------------------------------------
# batched evaluation contexts

class _CellCtx:
    """Quadrature data for a batch of cells on cell interiors."""

    def __init__(self, mesh: Mesh, rule):
        geo = mesh.geometry()
        self.mesh = mesh
        self.cells = np.arange(mesh.n_cells)
        self.nq = len(rule.weights)
        self.rule = rule
        self.geo = geo
        self.phys = geo.origins[:, None, :] + np.einsum(
            "cij,qj->cqi", geo.jacobians, rule.points
        )
        self.scale = geo.det_j  # integration measure factor

    def basis(self, space: FunctionSpace, deriv: str) -> tuple[np.ndarray, bool]:
        """Return (values, is_vector); values (nc|1, nq, nd[, 2])."""
        fam = space.family
        el = space.element()
        geo = self.geo
        if fam.kind in ("DG", "CG"):
            if deriv == "value":
                return el.tabulate(self.rule.points)[None], False
            ref = el.tabulate_grad(self.rule.points)  # (nq, nd, 2)
            phys = np.einsum("cij,qnj->cqni", geo.inv_jt, ref)
            return phys, True
        if fam.kind == "VectorDG":
            sval = el.tabulate(self.rule.points)
            nq, ns = sval.shape
            if deriv == "value":
                vals = np.zeros((1, nq, 2 * ns, 2))
                vals[0, :, :ns, 0] = sval
                vals[0, :, ns:, 1] = sval
                return vals, True
            if deriv == "div":
                sgrad = el.tabulate_grad(self.rule.points)  # (nq, ns, 2)
                phys = np.einsum("cij,qnj->cqni", geo.inv_jt, sgrad)
                out = np.concatenate([phys[..., 0], phys[..., 1]], axis=2)
                return out, False
        if fam.kind == "RT":
            signs = space.cell_signs
            if deriv == "value":
                ref = el.tabulate(self.rule.points)  # (nq, nd, 2)
                piola = np.einsum("cij,qnj->cqni", geo.jacobians, ref)
                piola /= geo.det_j[:, None, None, None]
                return piola * signs[:, None, :, None], True
            if deriv == "div":
                ref = el.tabulate_div(self.rule.points)  # (nq, nd)
                out = ref[None] / geo.det_j[:, None, None]
                return out * signs[:, None, :], False
        raise ValueError(f"unsupported tabulation {fam.kind}/{deriv} on cells")

    def eval_field(self, sf: ScalarField) -> np.ndarray:
        return sf(self.phys[..., 0], self.phys[..., 1])

    def normal(self):
        raise ValueError("facet normal is undefined on cell interiors")

    def local_coeffs(self, fn: Function) -> np.ndarray:
        # basis values are sign-corrected, so the gather is plain indexing
        return fn.coeffs[fn.space.cell_dofs]


class _FacetCtx:
    """Quadrature data for one local edge over a batch of cells."""

    def __init__(self, mesh: Mesh, cells: np.ndarray, local_edge: int, rule):
        geo = mesh.geometry()
        self.mesh = mesh
        self.cells = cells
        self.local_edge = local_edge
        self.nq = len(rule.weights)
        self.rule = rule
        self.geo = geo
        self.ref_pts = reference.edge_points(local_edge, rule.points)
        jac = geo.jacobians[cells]
        self.phys = geo.origins[cells, None, :] + np.einsum(
            "cij,qj->cqi", jac, self.ref_pts
        )
        self.scale = geo.edge_lengths[cells, local_edge]
        self.normals = geo.edge_normals[cells, local_edge]  # (ncs, 2)
        self.dir_match = geo.dir_match[cells, local_edge]

    def basis(self, space: FunctionSpace, deriv: str) -> tuple[np.ndarray, bool]:
        fam = space.family
        el = space.element()
        geo = self.geo
        cells = self.cells
        if fam.kind in ("DG", "CG"):
            if deriv == "value":
                return el.tabulate(self.ref_pts)[None], False
            ref = el.tabulate_grad(self.ref_pts)
            return np.einsum("cij,qnj->cqni", geo.inv_jt[cells], ref), True
        if fam.kind == "VectorDG" and deriv == "value":
            sval = el.tabulate(self.ref_pts)
            nq, ns = sval.shape
            vals = np.zeros((1, nq, 2 * ns, 2))
            vals[0, :, :ns, 0] = sval
            vals[0, :, ns:, 1] = sval
            return vals, True
        if fam.kind == "RT" and deriv == "value":
            ref = el.tabulate(self.ref_pts)
            piola = np.einsum("cij,qnj->cqni", geo.jacobians[cells], ref)
            piola /= geo.det_j[cells, None, None, None]
            return piola * space.cell_signs[cells][:, None, :, None], True
        if fam.kind == "Trace" and deriv == "value":
            per = fam.degree + 1
            fwd = el.tabulate(self.rule.points)        # (nq, per)
            rev = el.tabulate(1.0 - self.rule.points)  # reversed parameter
            vals = np.zeros((len(cells), self.nq, 3 * per))
            sel = self.dir_match
            block = slice(self.local_edge * per, (self.local_edge + 1) * per)
            vals[sel, :, block] = fwd
            vals[~sel, :, block] = rev
            return vals, False
        raise ValueError(f"unsupported tabulation {fam.kind}/{deriv} on facets")

    def eval_field(self, sf: ScalarField) -> np.ndarray:
        return sf(self.phys[..., 0], self.phys[..., 1])

    def normal(self) -> np.ndarray:
        return self.normals

    def local_coeffs(self, fn: Function) -> np.ndarray:
        return fn.coeffs[fn.space.cell_dofs[self.cells]]


# ---------------------------------------------------------------------------
# batched integrand evaluation
#
# Arrays are shaped (ncells, nq, n_test, n_trial) with a trailing
# component axis for vector quantities; absent axes have extent 1.


def _eval_expr(node: Expr, ctx, form: FormIR):
    if isinstance(node, Arg):
        fields = form.test_fields if node.role == "test" else form.trial_fields
        vals, is_vec = ctx.basis(fields[node.field], node.deriv)
        if node.role == "test":
            return vals[:, :, :, None, ...], is_vec
        return vals[:, :, None, :, ...], is_vec
    if isinstance(node, Coef):
        vals, is_vec = ctx.basis(node.fn.space, "value")
        local = ctx.local_coeffs(node.fn)  # (nc, nd)
        if is_vec:
            out = np.einsum("cqnd,cn->cqd", _bcast_cells(vals, local.shape[0]), local)
            return out[:, :, None, None, :], True
        out = np.einsum("cqn,cn->cq", _bcast_cells(vals, local.shape[0]), local)
        return out[:, :, None, None], False
    if isinstance(node, Fld):
        return ctx.eval_field(node.sf)[:, :, None, None], False
    if isinstance(node, VFld):
        vals = np.asarray(node.fn(ctx.phys[..., 0], ctx.phys[..., 1]), dtype=float)
        return vals[:, :, None, None, :], True
    if isinstance(node, Normal):
        n = ctx.normal()
        return n[:, None, None, None, :], True
    if isinstance(node, Dot):
        a, av = _eval_expr(node.a, ctx, form)
        b, bv = _eval_expr(node.b, ctx, form)
        if av != bv:
            raise ValueError("dot requires operands of equal rank")
        _check_bilinear(a, b)
        if av:
            return (a * b).sum(axis=-1), False
        return a * b, False
    if isinstance(node, Sum):
        a, av = _eval_expr(node.a, ctx, form)
        b, bv = _eval_expr(node.b, ctx, form)
        if av != bv:
            raise ValueError("sum requires operands of equal rank")
        return a + b, av
    if isinstance(node, Scale):
        a, av = _eval_expr(node.x, ctx, form)
        return node.c * a, av
    raise TypeError(f"unknown integrand node {node!r}")


def _bcast_cells(vals: np.ndarray, nc: int) -> np.ndarray:
    return np.broadcast_to(vals, (nc,) + vals.shape[1:])


def _check_bilinear(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[2] > 1 and b.shape[2] > 1:
        raise ValueError("integrand is nonlinear in the test argument")
    if a.shape[3] > 1 and b.shape[3] > 1:
        raise ValueError("integrand is nonlinear in the trial argument")


def _integrate(arr: np.ndarray, ctx) -> np.ndarray:
    return np.einsum("q,cqij->cij", ctx.rule.weights,
                     arr * ctx.scale[:, None, None, None])


# ---------------------------------------------------------------------------
# assembly drivers


def _facet_selections(mesh: Mesh, term: IntegralTerm, local_edge: int) -> np.ndarray:
    facets = mesh.cell_facets[:, local_edge]
    kind = mesh.facet_kind[facets]
    if term.domain == INTERIOR:
        return np.flatnonzero(kind == "interior")
    sel = kind == "exterior"
    if term.label is not None:
        sel &= mesh.exterior_label[facets] == term.label
    return np.flatnonzero(sel)


def assemble_form(form: FormIR) -> np.ndarray:
    """Element tensors of all cells: (nc, NT, NTR), (nc, NT), or (nc,)."""
    mesh = form.mesh
    nc = mesh.n_cells
    t_off = _local_offsets(form.test_fields)
    u_off = _local_offsets(form.trial_fields)
    nt, ntr = t_off[-1], u_off[-1]
    out = np.zeros((nc, max(nt, 1), max(ntr, 1)))

    for term in form.terms:
        exact = _term_exactness(term, form)
        ti, tj = form.term_blocks(term)
        if term.domain == CELL:
            ctx = _CellCtx(mesh, reference.triangle_quadrature(exact))
            arr, is_vec = _eval_expr(term.integrand, ctx, form)
            if is_vec:
                raise ValueError("integrand must be scalar-valued")
            local = _integrate(_bcast_cells(arr, nc), ctx)
            _scatter_block(out, local, ctx.cells, ti, tj, t_off, u_off)
        else:
            rule = reference.edge_quadrature(exact)
            for loc in range(3):
                cells = _facet_selections(mesh, term, loc)
                if len(cells) == 0:
                    continue
                ctx = _FacetCtx(mesh, cells, loc, rule)
                arr, is_vec = _eval_expr(term.integrand, ctx, form)
                if is_vec:
                    raise ValueError("integrand must be scalar-valued")
                local = _integrate(_bcast_cells(arr, len(cells)), ctx)
                _scatter_block(out, local, cells, ti, tj, t_off, u_off)

    if form.rank == 2:
        return out
    if form.rank == 1:
        return out[:, :, 0]
    return out[:, 0, 0]


def _local_offsets(fields) -> np.ndarray:
    if not fields:
        return np.array([0])
    return np.concatenate([[0], np.cumsum([s.local_dim for s in fields])]).astype(int)


def _scatter_block(out, local, cells, ti, tj, t_off, u_off):
    r0 = t_off[ti] if ti >= 0 else 0
    r1 = t_off[ti + 1] if ti >= 0 else 1
    c0 = u_off[tj] if tj >= 0 else 0
    c1 = u_off[tj + 1] if tj >= 0 else 1
    out[cells, r0:r1, c0:c1] += local


# ---------------------------------------------------------------------------
# single-cell reference assembly (testing oracle for the batched path)


def assemble_local(form: FormIR, cell: int) -> np.ndarray:
    """Element tensor of one cell by plain quadrature loops.

    Kept independent of the batched evaluator so the two can check each
    other; exact for polynomial integrands within the selected rule.
    """
    mesh = form.mesh
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    t_off = _local_offsets(form.test_fields)
    u_off = _local_offsets(form.trial_fields)
    out = np.zeros((max(t_off[-1], 1), max(u_off[-1], 1)))

    for term in form.terms:
        exact = _term_exactness(term, form)
        ti, tj = form.term_blocks(term)
        if term.domain == CELL:
            rule = reference.triangle_quadrature(exact)
            ctx = _CellCtx(mesh, rule)
            acc = _local_term(term, form, ctx, cell_pos=cell)
            scale = mesh.geometry().det_j[cell]
        else:
            rule = reference.edge_quadrature(exact)
            acc = None
            for loc in range(3):
                cells = _facet_selections(mesh, term, loc)
                if cell not in cells:
                    continue
                ctx = _FacetCtx(mesh, np.array([cell]), loc, rule)
                part = _local_term(term, form, ctx, cell_pos=0)
                part *= mesh.geometry().edge_lengths[cell, loc]
                acc = part if acc is None else acc + part
            scale = 1.0
            if acc is None:
                continue
        block = acc * scale
        r0, r1 = (t_off[ti], t_off[ti + 1]) if ti >= 0 else (0, 1)
        c0, c1 = (u_off[tj], u_off[tj + 1]) if tj >= 0 else (0, 1)
        out[r0:r1, c0:c1] += block

    if form.rank == 2:
        return out
    if form.rank == 1:
        return out[:, 0]
    return out[0, 0]


def _local_term(term, form, ctx, cell_pos: int) -> np.ndarray:
    """Quadrature-point loop for one cell; returns the unscaled block.

    Point values are uniformly shaped (nt, ntr, ncomp) with extent-1
    axes where a role or the component is absent.
    """
    acc = None
    for q in range(ctx.nq):
        val = _eval_point(term.integrand, ctx, form, cell_pos, q)
        if val.shape[-1] != 1:
            raise ValueError("integrand must be scalar-valued")
        contrib = ctx.rule.weights[q] * val[:, :, 0]
        acc = contrib if acc is None else acc + contrib
    return acc


def _eval_point(node, ctx, form, c, q) -> np.ndarray:
    if isinstance(node, Arg):
        fields = form.test_fields if node.role == "test" else form.trial_fields
        vals, is_vec = ctx.basis(fields[node.field], node.deriv)
        v = vals[c if vals.shape[0] > 1 else 0, q]  # (nd,) or (nd, 2)
        if not is_vec:
            v = v[:, None]
        return v[:, None, :] if node.role == "test" else v[None, :, :]
    if isinstance(node, Coef):
        vals, is_vec = ctx.basis(node.fn.space, "value")
        v = vals[c if vals.shape[0] > 1 else 0, q]
        local = ctx.local_coeffs(node.fn)[c]
        out = np.tensordot(local, v, axes=(0, 0))  # scalar or (2,)
        out = np.atleast_1d(out)
        return out[None, None, :]
    if isinstance(node, Fld):
        return np.array(ctx.eval_field(node.sf)[c, q]).reshape(1, 1, 1)
    if isinstance(node, VFld):
        x, y = ctx.phys[c, q]
        return np.asarray(node.fn(np.array(x), np.array(y)), dtype=float)[None, None, :]
    if isinstance(node, Normal):
        return ctx.normal()[c][None, None, :]
    if isinstance(node, Dot):
        a = _eval_point(node.a, ctx, form, c, q)
        b = _eval_point(node.b, ctx, form, c, q)
        if a.shape[-1] != b.shape[-1]:
            raise ValueError("dot requires operands of equal rank")
        return (a * b).sum(axis=-1, keepdims=True)
    if isinstance(node, Sum):
        a = _eval_point(node.a, ctx, form, c, q)
        b = _eval_point(node.b, ctx, form, c, q)
        return a + b
    if isinstance(node, Scale):
        return node.c * _eval_point(node.x, ctx, form, c, q)
    raise TypeError(f"unknown integrand node {node!r}")
