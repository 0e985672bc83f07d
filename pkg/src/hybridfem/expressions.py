"""Expression language over element tensors with a plan compiler.

Expressions compose terminal tensors (forms and coefficient vectors)
with dense linear algebra: addition, contraction, negation, transpose,
inverse, factorized solve, and sub-block extraction.  :func:`compile_expr`
lowers an expression to an :class:`ExecPlan`, a deduplicated kernel
sequence over virtual registers that is evaluated per cell (or for all
cells at once, batched over the leading cell axis).  A deliberately
naive recursive evaluator, :func:`naive_evaluate`, serves as the
semantics oracle for the compiled plans.

Global assembly scatters evaluated element tensors into scipy CSR
matrices or numpy vectors through the spaces' cell-to-global maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .forms import FormIR, assemble_form, assemble_local
from .spaces import Function, FunctionSpace, MixedSpace

Axis = tuple[FunctionSpace, ...]

PIVOT_RTOL = 1e-12  # relative pivot threshold declaring a local factorization singular


def _axis_extent(axis: Axis) -> int:
    return sum(s.local_dim for s in axis)


def _axis_offsets(axis: Axis) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([s.local_dim for s in axis])]).astype(int)


class TensorExpr:
    """Base class; subclasses set ``axes`` (tuple of per-axis field lists)."""

    axes: tuple[Axis, ...]

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(_axis_extent(a) for a in self.axes)

    def __add__(self, other):
        return Add(self, other)

    def __sub__(self, other):
        return Add(self, Negate(other))

    def __mul__(self, other):
        return Mul(self, other)

    def __neg__(self):
        return Negate(self)

    @property
    def T(self):
        return Transpose(self)

    @property
    def inv(self):
        return Inverse(self)

    def solve(self, rhs, decomposition: str = "lu"):
        return Solve(self, rhs, decomposition)

    @property
    def blocks(self):
        return _BlocksAccessor(self)

    def children(self) -> tuple["TensorExpr", ...]:
        return ()

    def key(self):
        raise NotImplementedError


class Tensor(TensorExpr):
    """Element tensors of a multilinear form."""

    def __init__(self, form: FormIR):
        if form.rank == 0:
            raise ValueError("rank-0 forms are not supported in expressions")
        self.form = form
        axes = []
        if form.test is not None:
            axes.append(tuple(form.test_fields))
        if form.trial is not None:
            axes.append(tuple(form.trial_fields))
        self.axes = tuple(axes)

    def key(self):
        return ("tensor", id(self.form))


class AssembledVector(TensorExpr):
    """Per-cell coefficient vector of a function (or mixed data)."""

    def __init__(self, fn: Union[Function, tuple]):
        if isinstance(fn, Function):
            self.fields: Axis = (fn.space,)
            self.coeffs = fn.coeffs
        else:
            space, coeffs = fn
            if not isinstance(space, MixedSpace):
                raise ValueError("expected a Function or (MixedSpace, vector) pair")
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (space.ndof_global,):
                raise ValueError("vector length does not match the mixed space")
            self.fields = tuple(space.fields)
            self.coeffs = coeffs
            self._mixed = space
        self.axes = (self.fields,)

    def cell_gather(self) -> np.ndarray:
        if len(self.fields) == 1:
            return self.coeffs[self.fields[0].cell_dofs]
        return self.coeffs[self._mixed.cell_dofs_global()]

    def key(self):
        return ("vector", id(self))


class Add(TensorExpr):
    def __init__(self, a: TensorExpr, b: TensorExpr):
        if a.shape != b.shape:
            raise ValueError(f"addition of unequal shapes {a.shape} and {b.shape}")
        self.a, self.b = a, b
        self.axes = a.axes

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("add",)


class Mul(TensorExpr):
    """Contraction over the last axis of ``a`` and the first of ``b``."""

    def __init__(self, a: TensorExpr, b: TensorExpr):
        if a.rank == 0 or b.rank == 0:
            raise ValueError("multiplication requires operands of rank >= 1")
        if a.shape[-1] != b.shape[0]:
            raise ValueError(
                f"contraction mismatch: {a.shape} cannot multiply {b.shape}"
            )
        rank = a.rank + b.rank - 2
        if rank > 2:
            raise ValueError("expressions of rank > 2 are not supported")
        if rank == 0:
            raise ValueError("full contraction to a scalar is not supported")
        self.a, self.b = a, b
        self.axes = a.axes[:-1] + b.axes[1:]

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("mul",)


class Negate(TensorExpr):
    def __init__(self, x: TensorExpr):
        self.x = x
        self.axes = x.axes

    def children(self):
        return (self.x,)

    def key(self):
        return ("neg",)


class Transpose(TensorExpr):
    def __init__(self, x: TensorExpr):
        if x.rank != 2:
            raise ValueError("transpose requires a rank-2 operand")
        self.x = x
        self.axes = (x.axes[1], x.axes[0])

    def children(self):
        return (self.x,)

    def key(self):
        return ("transpose",)


class Inverse(TensorExpr):
    def __init__(self, x: TensorExpr):
        if x.rank != 2 or x.shape[0] != x.shape[1]:
            raise ValueError("inverse requires a square rank-2 operand")
        self.x = x
        self.axes = x.axes

    def children(self):
        return (self.x,)

    def key(self):
        return ("inverse",)


class Solve(TensorExpr):
    def __init__(self, a: TensorExpr, b: TensorExpr, decomposition: str = "lu"):
        if a.rank != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("solve requires a square rank-2 operator")
        if b.shape[0] != a.shape[0]:
            raise ValueError("solve right-hand side has mismatched extent")
        if decomposition not in ("lu", "cholesky"):
            raise ValueError(f"unknown decomposition {decomposition!r}")
        self.a, self.b, self.decomposition = a, b, decomposition
        self.axes = (a.axes[1],) + b.axes[1:]

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("solve", self.decomposition)


class Blocks(TensorExpr):
    def __init__(self, x: TensorExpr, ranges: tuple[tuple[int, int], ...]):
        if len(ranges) != x.rank:
            raise ValueError("block indices must match the operand rank")
        axes = []
        for (lo, hi), axis in zip(ranges, x.axes):
            if not 0 <= lo < hi <= len(axis):
                raise ValueError(f"block range {lo}:{hi} outside {len(axis)} fields")
            axes.append(axis[lo:hi])
        self.x = x
        self.ranges = ranges
        self.axes = tuple(axes)

    def children(self):
        return (self.x,)

    def key(self):
        return ("blocks", self.ranges)


class _BlocksAccessor:
    def __init__(self, expr: TensorExpr):
        self.expr = expr

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        ranges = []
        for i, axis in zip(idx, self.expr.axes):
            if isinstance(i, int):
                ranges.append((i, i + 1))
            elif isinstance(i, slice):
                lo, hi, step = i.indices(len(axis))
                if step != 1:
                    raise ValueError("block slices must be contiguous")
                ranges.append((lo, hi))
            else:
                raise TypeError(f"invalid block index {i!r}")
        if len(ranges) != self.expr.rank:
            raise ValueError("block indices must match the operand rank")
        return Blocks(self.expr, tuple(ranges))


# ---------------------------------------------------------------------------
# compilation


@dataclass(frozen=True)
class Kernel:
    op: str
    out: int
    ins: tuple[int, ...]
    payload: object = None  # FormIR / AssembledVector / block ranges / decomposition


@dataclass
class ExecPlan:
    """Deduplicated kernel sequence evaluating one expression per cell."""

    kernels: list[Kernel]
    output: int
    shapes: dict[int, tuple[int, ...]]
    mesh: object
    root: TensorExpr

    def describe(self) -> str:
        """Stable human-readable kernel listing (for golden tests)."""
        lines = []
        forms: dict[int, int] = {}
        vectors: dict[int, int] = {}
        for k in self.kernels:
            shape = "x".join(str(s) for s in self.shapes[k.out])
            if k.op == "assemble":
                label = forms.setdefault(id(k.payload), len(forms))
                rhs = f"assemble(T{label})"
            elif k.op == "gather":
                label = vectors.setdefault(id(k.payload), len(vectors))
                rhs = f"gather(V{label})"
            elif k.op == "blocks":
                spans = ",".join(f"{lo}:{hi}" for lo, hi in k.payload[0])
                rhs = f"blocks[{spans}](r{k.ins[0]})"
            elif k.op == "solve":
                rhs = f"solve[{k.payload}](" + ", ".join(f"r{i}" for i in k.ins) + ")"
            else:
                rhs = f"{k.op}(" + ", ".join(f"r{i}" for i in k.ins) + ")"
            lines.append(f"r{k.out} = {rhs}  # {shape}")
        lines.append(f"return r{self.output}")
        return "\n".join(lines)


def _structural_key(expr: TensorExpr, child_keys: tuple) -> tuple:
    return expr.key() + child_keys


def compile_expr(expr: TensorExpr) -> ExecPlan:
    """Lower an expression to a plan; identical subtrees are computed once."""
    kernels: list[Kernel] = []
    shapes: dict[int, tuple[int, ...]] = {}
    seen: dict[tuple, int] = {}

    def visit(node: TensorExpr) -> int:
        child_regs = tuple(visit(c) for c in node.children())
        key = _structural_key(node, child_regs)
        if key in seen:
            return seen[key]
        reg = len(kernels)
        if isinstance(node, Tensor):
            kernels.append(Kernel("assemble", reg, (), node.form))
        elif isinstance(node, AssembledVector):
            kernels.append(Kernel("gather", reg, (), node))
        elif isinstance(node, Add):
            kernels.append(Kernel("add", reg, child_regs))
        elif isinstance(node, Mul):
            kernels.append(Kernel("mul", reg, child_regs))
        elif isinstance(node, Negate):
            kernels.append(Kernel("neg", reg, child_regs))
        elif isinstance(node, Transpose):
            kernels.append(Kernel("transpose", reg, child_regs))
        elif isinstance(node, Inverse):
            kernels.append(Kernel("inverse", reg, child_regs))
        elif isinstance(node, Solve):
            kernels.append(Kernel("solve", reg, child_regs, node.decomposition))
        elif isinstance(node, Blocks):
            slices = _block_slices(node.x.axes, node.ranges)
            kernels.append(Kernel("blocks", reg, child_regs, (node.ranges, slices)))
        else:
            raise TypeError(f"unknown expression node {node!r}")
        shapes[reg] = node.shape
        seen[key] = reg
        return reg

    out = visit(expr)
    mesh = _expr_mesh(expr)
    return ExecPlan(kernels, out, shapes, mesh, expr)


def _expr_mesh(expr: TensorExpr):
    if isinstance(expr, Tensor):
        return expr.form.mesh
    if isinstance(expr, AssembledVector):
        return expr.fields[0].mesh
    for c in expr.children():
        m = _expr_mesh(c)
        if m is not None:
            return m
    return None


# ---------------------------------------------------------------------------
# evaluation


def _block_slices(expr_axes, ranges):
    out = []
    for (lo, hi), axis in zip(ranges, expr_axes):
        off = _axis_offsets(axis)
        out.append(slice(off[lo], off[hi]))
    return tuple(out)


def _check_symmetric(A: np.ndarray) -> None:
    scale = np.abs(A).max()
    if scale and np.abs(A - np.swapaxes(A, -1, -2)).max() > 1e-10 * scale:
        raise ValueError("cholesky solve requires a symmetric operand")


def evaluate_all(plan: ExecPlan) -> np.ndarray:
    """Evaluate the plan for every cell; leading axis is the cell index."""
    regs: dict[int, np.ndarray] = {}
    for k in plan.kernels:
        if k.op == "assemble":
            regs[k.out] = assemble_form(k.payload)
        elif k.op == "gather":
            regs[k.out] = k.payload.cell_gather()
        elif k.op == "add":
            regs[k.out] = regs[k.ins[0]] + regs[k.ins[1]]
        elif k.op == "neg":
            regs[k.out] = -regs[k.ins[0]]
        elif k.op == "transpose":
            regs[k.out] = np.swapaxes(regs[k.ins[0]], 1, 2)
        elif k.op == "mul":
            a, b = regs[k.ins[0]], regs[k.ins[1]]
            if a.ndim == 3 and b.ndim == 3:
                regs[k.out] = a @ b
            elif a.ndim == 3 and b.ndim == 2:
                regs[k.out] = np.einsum("cij,cj->ci", a, b)
            elif a.ndim == 2 and b.ndim == 3:
                regs[k.out] = np.einsum("ci,cij->cj", a, b)
            else:
                raise ValueError("unsupported contraction ranks")
        elif k.op == "inverse":
            regs[k.out] = _batched_inverse(regs[k.ins[0]])
        elif k.op == "solve":
            regs[k.out] = _batched_solve(regs[k.ins[0]], regs[k.ins[1]], k.payload)
        elif k.op == "blocks":
            regs[k.out] = regs[k.ins[0]][(slice(None),) + k.payload[1]]
        else:
            raise AssertionError(k.op)
    return regs[plan.output]


def _batched_inverse(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cell = _first_singular(a)
        raise RuntimeError(f"singular local tensor in cell {cell}") from None


def _batched_solve(a: np.ndarray, b: np.ndarray, decomposition: str) -> np.ndarray:
    vector_rhs = b.ndim == 2
    rhs = b[:, :, None] if vector_rhs else b
    if decomposition == "cholesky":
        _check_symmetric(a)
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            cell = _first_singular(a)
            raise RuntimeError(
                f"cholesky breakdown in local solve (cell {cell})") from None
        y = np.linalg.solve(chol, rhs)
        x = np.linalg.solve(np.swapaxes(chol, 1, 2), y)
    else:
        try:
            x = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError:
            cell = _first_singular(a)
            raise RuntimeError(f"singular local system in cell {cell}") from None
    return x[:, :, 0] if vector_rhs else x


def _first_singular(a: np.ndarray) -> int:
    for c in range(a.shape[0]):
        piv = _min_relative_pivot(a[c])
        if piv < PIVOT_RTOL:
            return c
    return -1


def _min_relative_pivot(a: np.ndarray) -> float:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.abs(a).max(), 1e-300)
    return float(diag.min() / scale)


def evaluate_cell(plan: ExecPlan, cell: int) -> np.ndarray:
    """Evaluate the plan on one cell using pivot-checked dense kernels."""
    regs: dict[int, np.ndarray] = {}
    for k in plan.kernels:
        if k.op == "assemble":
            regs[k.out] = assemble_local(k.payload, cell)
        elif k.op == "gather":
            regs[k.out] = k.payload.cell_gather()[cell]
        elif k.op == "add":
            regs[k.out] = regs[k.ins[0]] + regs[k.ins[1]]
        elif k.op == "neg":
            regs[k.out] = -regs[k.ins[0]]
        elif k.op == "transpose":
            regs[k.out] = regs[k.ins[0]].T
        elif k.op == "mul":
            regs[k.out] = regs[k.ins[0]] @ regs[k.ins[1]]
        elif k.op == "inverse":
            a = regs[k.ins[0]]
            if _min_relative_pivot(a) < PIVOT_RTOL:
                raise RuntimeError(f"singular local tensor in cell {cell}")
            regs[k.out] = np.linalg.inv(a)
        elif k.op == "solve":
            a, b = regs[k.ins[0]], regs[k.ins[1]]
            if k.payload == "cholesky":
                _check_symmetric(a)
                try:
                    cho = scipy.linalg.cho_factor(a)
                except scipy.linalg.LinAlgError:
                    raise RuntimeError(
                        f"cholesky breakdown in local solve (cell {cell})") from None
                regs[k.out] = scipy.linalg.cho_solve(cho, b)
            else:
                if _min_relative_pivot(a) < PIVOT_RTOL:
                    raise RuntimeError(f"singular local system in cell {cell}")
                regs[k.out] = np.linalg.solve(a, b)
        elif k.op == "blocks":
            regs[k.out] = regs[k.ins[0]][k.payload[1]]
        else:
            raise AssertionError(k.op)
    return regs[plan.output]


def naive_evaluate(expr: TensorExpr, cell: int) -> np.ndarray:
    """Recursive tree-walking evaluation; the oracle for compiled plans."""
    if isinstance(expr, Tensor):
        return assemble_local(expr.form, cell)
    if isinstance(expr, AssembledVector):
        return expr.cell_gather()[cell]
    if isinstance(expr, Add):
        return naive_evaluate(expr.a, cell) + naive_evaluate(expr.b, cell)
    if isinstance(expr, Mul):
        return naive_evaluate(expr.a, cell) @ naive_evaluate(expr.b, cell)
    if isinstance(expr, Negate):
        return -naive_evaluate(expr.x, cell)
    if isinstance(expr, Transpose):
        return naive_evaluate(expr.x, cell).T
    if isinstance(expr, Inverse):
        return np.linalg.inv(naive_evaluate(expr.x, cell))
    if isinstance(expr, Solve):
        a = naive_evaluate(expr.a, cell)
        b = naive_evaluate(expr.b, cell)
        if expr.decomposition == "cholesky":
            return scipy.linalg.cho_solve(scipy.linalg.cho_factor(a), b)
        return np.linalg.solve(a, b)
    if isinstance(expr, Blocks):
        src = naive_evaluate(expr.x, cell)
        sl = _block_slices(expr.x.axes, expr.ranges)
        return src[sl]
    raise TypeError(f"unknown expression node {expr!r}")


# ---------------------------------------------------------------------------
# global assembly


def assemble_global(expr: TensorExpr, bcs=None):
    """Gather per-cell expression values into a CSR matrix or vector.

    ``bcs`` is a list of (dof, value) pairs on the row space: constrained
    matrix rows and columns are zeroed with a unit diagonal; constrained
    vector entries are overwritten with the boundary value.
    """
    plan = compile_expr(expr)
    vals = evaluate_all(plan)
    if expr.rank == 2:
        rows = _global_maps(expr.axes[0])
        cols = _global_maps(expr.axes[1])
        nrow = sum(s.ndof_global for s in expr.axes[0])
        ncol = sum(s.ndof_global for s in expr.axes[1])
        nc, r, c = vals.shape
        i = np.repeat(rows, c, axis=1).ravel()
        j = np.tile(cols, (1, r)).ravel()
        A = sp.coo_matrix((vals.ravel(), (i, j)), shape=(nrow, ncol)).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        if bcs:
            A = constrain_matrix(A, np.asarray([d for d, _ in bcs], dtype=int))
        return A
    if expr.rank == 1:
        rows = _global_maps(expr.axes[0])
        n = sum(s.ndof_global for s in expr.axes[0])
        out = np.zeros(n)
        np.add.at(out, rows.ravel(), vals.ravel())
        if bcs:
            for d, v in bcs:
                out[d] = v
        return out
    raise ValueError("global assembly requires a rank-1 or rank-2 expression")


def _global_maps(axis: Axis) -> np.ndarray:
    offsets = np.concatenate([[0], np.cumsum([s.ndof_global for s in axis])])
    return np.concatenate(
        [s.cell_dofs + offsets[i] for i, s in enumerate(axis)], axis=1
    )


def constrain_matrix(A: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    """Zero constrained rows and columns and place a unit diagonal."""
    n = A.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    out = (D @ A @ D).tolil()
    out[dofs, dofs] = 1.0
    out = out.tocsr()
    out.sort_indices()
    return out
