"""Dense factorizations and global Krylov solvers.

CG, GMRES, and flexible GMRES are implemented here directly: flexible
preconditioning (inner Krylov solves inside the preconditioner) and
deterministic iteration reports are needed, and runs are serial.
Sparse direct solves and dense factorizations are delegated to scipy.

Convergence is declared on the true relative residual of the solved
system; non-convergence is reported, not raised.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

Operator = Union[sp.spmatrix, np.ndarray, "LinearOperator"]

PIVOT_RTOL = 1e-12


class LinearOperator:
    """Minimal matrix-free operator: a shape and a matvec."""

    def __init__(self, shape: tuple[int, int], matvec: Callable[[np.ndarray], np.ndarray]):
        self.shape = shape
        self._matvec = matvec

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self._matvec(x)


def _as_matvec(A: Operator) -> tuple[Callable, tuple[int, int]]:
    if isinstance(A, LinearOperator):
        return A._matvec, A.shape
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return (lambda x: A @ x), A.shape
    raise TypeError(f"unsupported operator type {type(A)!r}")


@dataclass
class KrylovConfig:
    method: str = "cg"  # "cg" | "gmres" | "fgmres"
    rtol: float = 1e-8
    atol: float = 0.0
    maxiter: int = 2000
    restart: int = 50
    preconditioner: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 0.0 < self.rtol < 1.0:
            raise ValueError("rtol must lie in (0, 1)")
        if self.maxiter < 1:
            raise ValueError("maxiter must be at least 1")
        if self.method not in ("cg", "gmres", "fgmres"):
            raise ValueError(f"unknown Krylov method {self.method!r}")


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float  # final true relative residual
    converged: bool
    setup_time: float = 0.0
    solve_time: float = 0.0

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": int(self.converged),
        }


# ---------------------------------------------------------------------------
# dense factorized solves


def dense_factor_solve(A: np.ndarray, B: np.ndarray, kind: str = "lu") -> np.ndarray:
    """Solve A X = B by LU or Cholesky with an explicit pivot guard."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("dense solve requires a square matrix")
    if kind == "cholesky":
        scale = np.abs(A).max()
        if scale and np.abs(A - A.T).max() > 1e-10 * scale:
            raise ValueError("cholesky requires a symmetric matrix")
        try:
            c = scipy.linalg.cho_factor(A)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"cholesky factorization failed: {exc}") from None
        return scipy.linalg.cho_solve(c, B)
    if kind != "lu":
        raise ValueError(f"unknown factorization kind {kind!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_RTOL * max(np.abs(A).max(), 1e-300):
        raise RuntimeError("pivot breakdown: matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), B)


# ---------------------------------------------------------------------------
# Krylov methods


def krylov_solve(A: Operator, b: np.ndarray, cfg: KrylovConfig,
                 x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Iterate to a true relative residual below ``cfg.rtol``.

    Returns the approximate solution together with a report;
    non-convergence is recorded in the report rather than raised.
    """
    matvec, shape = _as_matvec(A)
    b = np.asarray(b, dtype=float)
    if b.shape != (shape[0],):
        raise ValueError("right-hand side does not match the operator")
    t0 = time.perf_counter()
    if cfg.method == "cg":
        x, its, res = _cg(matvec, b, cfg, x0)
    else:
        x, its, res = _fgmres(matvec, b, cfg, x0)
    dt = time.perf_counter() - t0
    tol = max(cfg.rtol, cfg.atol / max(np.linalg.norm(b), 1e-300))
    report = SolveReport(cfg.method, its, res, res <= tol, solve_time=dt)
    return x, report


def _true_relres(matvec, b, x, bnorm):
    return np.linalg.norm(b - matvec(x)) / bnorm


def _cg(matvec, b, cfg, x0):
    n = len(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    M = cfg.preconditioner or (lambda v: v)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    r = b - matvec(x)
    z = M(r)
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    if res <= cfg.rtol:
        return x, 0, res
    for it in range(1, cfg.maxiter + 1):
        Ap = matvec(p)
        denom = p @ Ap
        if denom <= 0.0:
            # loss of positive definiteness; report current state
            return x, it - 1, res
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= cfg.rtol:
            return x, it, res
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, cfg.maxiter, res


def _fgmres(matvec, b, cfg, x0):
    """Right-preconditioned flexible GMRES with restarts.

    The monitored residual is the true residual of the original system,
    so convergence reports need no un-preconditioning.
    """
    n = len(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    M = cfg.preconditioner or (lambda v: v)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    total_its = 0
    res = _true_relres(matvec, b, x, bnorm)
    if res <= cfg.rtol:
        return x, 0, res
    m = cfg.restart
    while total_its < cfg.maxiter:
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j = -1
        for j in range(m):
            if total_its >= cfg.maxiter:
                j -= 1
                break
            Z[j] = M(V[j])
            w = matvec(Z[j])
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 1e-14 * beta:
                V[j + 1] = w / H[j + 1, j]
            # apply stored Givens rotations, then a new one
            for i in range(j):
                h0 = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = h0
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total_its += 1
            res_est = abs(g[j + 1]) / bnorm
            if res_est <= cfg.rtol:
                break
        if j < 0:
            break
        y = scipy.linalg.solve_triangular(H[: j + 1, : j + 1], g[: j + 1])
        x = x + Z[: j + 1].T @ y
        res = _true_relres(matvec, b, x, bnorm)
        if res <= cfg.rtol or total_its >= cfg.maxiter:
            break
    return x, total_its, res


# ---------------------------------------------------------------------------
# direct solve and boundary conditions


def sparse_direct_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """LU-based direct solve; the oracle for iterative paths."""
    A = A.tocsc()
    if A.shape[0] != A.shape[1]:
        raise ValueError("direct solve requires a square matrix")
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise RuntimeError(f"sparse factorization failed: {exc}") from None
    x = lu.solve(b)
    resid = np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300)
    if not np.isfinite(x).all() or resid > 1e-6:
        raise RuntimeError("sparse direct solve is numerically singular")
    return x


def apply_bcs(A: sp.spmatrix, b: np.ndarray, bcs) -> tuple[sp.csr_matrix, np.ndarray]:
    """Symmetric elimination of constrained dofs with right-hand-side lift.

    ``bcs`` is a list of (dof, value).  Rows and columns are zeroed with
    a unit diagonal; known values are lifted off the free equations.
    """
    if not bcs:
        return A.tocsr(), np.asarray(b, dtype=float).copy()
    dofs = np.asarray([d for d, _ in bcs], dtype=int)
    values = np.asarray([v for _, v in bcs], dtype=float)
    n = A.shape[0]
    xbc = np.zeros(n)
    xbc[dofs] = values
    out_b = np.asarray(b, dtype=float) - A @ xbc
    out_b[dofs] = values
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    out_A = (D @ A @ D).tolil()
    out_A[dofs, dofs] = 1.0
    out_A = out_A.tocsr()
    out_A.sort_indices()
    return out_A, out_b


def bc_lift_vector(n: int, bcs) -> np.ndarray:
    x = np.zeros(n)
    for d, v in bcs:
        x[d] = v
    return x


# ---------------------------------------------------------------------------
# preconditioner factories


def jacobi_preconditioner(A: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    d = A.diagonal().copy()
    if np.any(d == 0.0):
        raise ValueError("zero diagonal entry; Jacobi preconditioner unavailable")
    dinv = 1.0 / d
    return lambda r: dinv * r


def exact_preconditioner(A: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    lu = spla.splu(A.tocsc())
    return lambda r: lu.solve(r)


def make_preconditioner(A: sp.spmatrix, name: str | None):
    """Resolve a named inner preconditioner: none, jacobi, or exact."""
    if name in (None, "none"):
        return None
    if name == "jacobi":
        return jacobi_preconditioner(A)
    if name == "exact":
        return exact_preconditioner(A)
    raise ValueError(f"unknown preconditioner {name!r}")
