"""Reference elements and quadrature on the unit triangle and unit edge.

Basis polynomials are constructed once per (family, degree) in exact
rational arithmetic (sympy) and cached as monomial coefficient arrays;
numeric tabulation is then plain floating-point polynomial evaluation.
The reference triangle has vertices (0,0), (1,0), (0,1).

Raviart-Thomas degrees of freedom are edge moments against shifted
Legendre polynomials plus interior moments against [P_{k-2}]^2.  Shifted
Legendre moments flip by (-1)^j under reversal of the edge parameter,
which reduces all inter-cell orientation handling to diagonal signs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

MAX_EXACTNESS = 12

_x, _y, _t = sp.symbols("x y t")


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule exact for polynomials up to ``exactness``."""

    kind: str            # "cell" or "edge"
    points: np.ndarray   # (nq, 2) reference coords, or (nq,) edge params
    weights: np.ndarray  # (nq,)
    exactness: int


def _gauss01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def edge_quadrature(exactness: int) -> QuadratureRule:
    if not 0 <= exactness <= MAX_EXACTNESS:
        raise ValueError(f"unsupported edge quadrature exactness {exactness}")
    npts = (exactness + 2) // 2
    t, w = _gauss01(max(npts, 1))
    return QuadratureRule("edge", t, w, exactness)


@lru_cache(maxsize=None)
def triangle_quadrature(exactness: int) -> QuadratureRule:
    """Duffy (collapsed Gauss) rule on the reference triangle."""
    if not 0 <= exactness <= MAX_EXACTNESS:
        raise ValueError(f"unsupported cell quadrature exactness {exactness}")
    # x = u*(1-v), y = v with Jacobian (1-v): u needs degree d, v degree d+1
    mu = max((exactness + 2) // 2, 1)
    mv = max((exactness + 3) // 2, 1)
    u, wu = _gauss01(mu)
    v, wv = _gauss01(mv)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), vv.ravel()])
    wts = (np.outer(wu, wv) * (1.0 - vv)).ravel()
    return QuadratureRule("cell", pts, wts, exactness)


def quadrature(kind: str, exactness: int) -> QuadratureRule:
    """Quadrature rule of the requested kind and polynomial exactness."""
    if kind == "cell":
        return triangle_quadrature(exactness)
    if kind == "edge":
        return edge_quadrature(exactness)
    raise ValueError(f"unknown quadrature kind {kind!r}")


# ---------------------------------------------------------------------------
# monomial machinery


def monomial_exponents(degree: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, d - i) for d in range(degree + 1) for i in range(d, -1, -1))


def _eval_monomials(exps, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    cols = [x**i * y**j for (i, j) in exps]
    return np.stack(cols, axis=-1)


def _eval_monomials_dx(exps, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    cols = [i * x ** max(i - 1, 0) * y**j if i > 0 else np.zeros(len(pts)) for (i, j) in exps]
    return np.stack(cols, axis=-1)


def _eval_monomials_dy(exps, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    cols = [j * x**i * y ** max(j - 1, 0) if j > 0 else np.zeros(len(pts)) for (i, j) in exps]
    return np.stack(cols, axis=-1)


def _check_inside_triangle(points: np.ndarray, tol: float = 1e-12) -> None:
    x, y = points[:, 0], points[:, 1]
    if np.any(x < -tol) or np.any(y < -tol) or np.any(x + y > 1.0 + tol):
        raise ValueError("tabulation points outside the reference triangle")


# reference triangle vertices and ccw edge parameterizations
TRI_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_TRI_VERTICES_SYM = (
    (sp.Integer(0), sp.Integer(0)),
    (sp.Integer(1), sp.Integer(0)),
    (sp.Integer(0), sp.Integer(1)),
)


def edge_points(local_edge: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates along local edge ``local_edge`` at params ``t``."""
    from .mesh import EDGE_VERTICES

    a, b = EDGE_VERTICES[local_edge]
    pa, pb = TRI_VERTICES[a], TRI_VERTICES[b]
    return pa[None, :] + np.asarray(t)[:, None] * (pb - pa)[None, :]


@lru_cache(maxsize=None)
def _shifted_legendre_coeffs(degree: int) -> np.ndarray:
    """Coefficient matrix of shifted Legendre P~_0..P~_degree in powers of t."""
    coeffs = np.zeros((degree + 1, degree + 1))
    for j in range(degree + 1):
        poly = sp.Poly(sp.legendre(j, 2 * _t - 1), _t)
        for mono, c in zip(poly.monoms(), poly.coeffs()):
            coeffs[mono[0], j] = float(c)
    return coeffs


def shifted_legendre(degree: int, t: np.ndarray) -> np.ndarray:
    """Values of shifted Legendre polynomials 0..degree at params in [0,1]."""
    t = np.asarray(t, dtype=float)
    powers = np.stack([t**p for p in range(degree + 1)], axis=-1)
    return powers @ _shifted_legendre_coeffs(degree)


# ---------------------------------------------------------------------------
# scalar Lagrange elements (shared by CG and DG)


@dataclass(frozen=True)
class ScalarElement:
    degree: int
    nodes: np.ndarray          # (nd, 2)
    coeffs: np.ndarray         # (n_mono, nd): basis_i = sum_a coeffs[a,i] * mono_a
    exponents: tuple[tuple[int, int], ...]
    n_vertex_dofs: int         # 3 for degree >= 1, else 0
    n_edge_dofs: int           # per edge
    n_interior_dofs: int

    @property
    def n_dofs(self) -> int:
        return self.nodes.shape[0]

    def tabulate(self, points: np.ndarray) -> np.ndarray:
        _check_inside_triangle(points)
        return _eval_monomials(self.exponents, points) @ self.coeffs

    def tabulate_grad(self, points: np.ndarray) -> np.ndarray:
        _check_inside_triangle(points)
        gx = _eval_monomials_dx(self.exponents, points) @ self.coeffs
        gy = _eval_monomials_dy(self.exponents, points) @ self.coeffs
        return np.stack([gx, gy], axis=-1)  # (nq, nd, 2)


def _lagrange_nodes(degree: int) -> tuple[np.ndarray, int, int, int]:
    from .mesh import EDGE_VERTICES

    if degree == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]]), 0, 0, 1
    nodes = [TRI_VERTICES[i] for i in range(3)]
    for a, b in EDGE_VERTICES:
        for m in range(1, degree):
            t = m / degree
            nodes.append(TRI_VERTICES[a] * (1 - t) + TRI_VERTICES[b] * t)
    n_int = 0
    for j in range(1, degree):
        for i in range(1, degree - j):
            nodes.append(np.array([i / degree, j / degree]))
            n_int += 1
    return np.asarray(nodes), 3, degree - 1, n_int


def _lagrange_nodes_exact(degree: int):
    from .mesh import EDGE_VERTICES

    if degree == 0:
        return [(sp.Rational(1, 3), sp.Rational(1, 3))]
    verts = _TRI_VERTICES_SYM
    nodes = list(verts)
    for a, b in EDGE_VERTICES:
        for m in range(1, degree):
            t = sp.Rational(m, degree)
            nodes.append((verts[a][0] * (1 - t) + verts[b][0] * t,
                          verts[a][1] * (1 - t) + verts[b][1] * t))
    for j in range(1, degree):
        for i in range(1, degree - j):
            nodes.append((sp.Rational(i, degree), sp.Rational(j, degree)))
    return nodes


@lru_cache(maxsize=None)
def scalar_element(degree: int) -> ScalarElement:
    if not 0 <= degree <= 5:
        raise ValueError(f"unsupported Lagrange degree {degree}")
    nodes, nv, ne, ni = _lagrange_nodes(degree)
    exps = monomial_exponents(degree)
    exact_nodes = _lagrange_nodes_exact(degree)
    vand = sp.Matrix([[px**i * py**j for (i, j) in exps] for (px, py) in exact_nodes])
    # coeffs[a, i] with sum_a coeffs[a, i] * mono_a(node_n) = delta_{ni}
    coeffs = np.array(vand.inv().tolist(), dtype=float)
    return ScalarElement(degree, nodes, coeffs, exps, nv, ne, ni)


# ---------------------------------------------------------------------------
# Raviart-Thomas elements


@dataclass(frozen=True)
class RTElement:
    """RT(k) on the reference triangle, k >= 1, local dimension k*(k+2).

    Dof ordering: for each local edge l in 0..2 the k Legendre moments
    j = 0..k-1 (in the ccw edge parameter against the outward scaled
    normal), then k*(k-1) interior moments.
    """

    degree: int
    coeffs: np.ndarray   # (n_mono, nd, 2)
    exponents: tuple[tuple[int, int], ...]

    @property
    def n_dofs(self) -> int:
        return self.degree * (self.degree + 2)

    @property
    def n_edge_dofs(self) -> int:
        return self.degree

    @property
    def n_interior_dofs(self) -> int:
        return self.degree * (self.degree - 1)

    def tabulate(self, points: np.ndarray) -> np.ndarray:
        _check_inside_triangle(points)
        mono = _eval_monomials(self.exponents, points)
        return np.einsum("qa,aid->qid", mono, self.coeffs)

    def tabulate_div(self, points: np.ndarray) -> np.ndarray:
        _check_inside_triangle(points)
        dx = _eval_monomials_dx(self.exponents, points)
        dy = _eval_monomials_dy(self.exponents, points)
        return dx @ self.coeffs[:, :, 0] + dy @ self.coeffs[:, :, 1]


def _rt_candidate_basis(k: int):
    """Symbolic spanning set of [P_{k-1}]^2 + x~ * homogeneous P_{k-1}."""
    cands = []
    for i, j in monomial_exponents(k - 1):
        cands.append((_x**i * _y**j, sp.Integer(0)))
    for i, j in monomial_exponents(k - 1):
        cands.append((sp.Integer(0), _x**i * _y**j))
    for i in range(k):
        m = _x**i * _y ** (k - 1 - i)
        cands.append((_x * m, _y * m))
    return cands


def _tri_integral(expr):
    return sp.integrate(sp.integrate(expr, (_x, 0, 1 - _y)), (_y, 0, 1))


@lru_cache(maxsize=None)
def rt_element(degree: int) -> RTElement:
    from .mesh import EDGE_VERTICES

    if not 1 <= degree <= 3:
        raise ValueError(f"unsupported Raviart-Thomas degree {degree}")
    k = degree
    cands = _rt_candidate_basis(k)
    nd = k * (k + 2)
    assert len(cands) == nd

    legendre = [sp.expand(sp.legendre(j, 2 * _t - 1)) for j in range(k)]
    rows = []
    # edge moments against shifted Legendre, ccw parameter, outward scaled normal
    for a, b in EDGE_VERTICES:
        (ax, ay), (bx, by) = _TRI_VERTICES_SYM[a], _TRI_VERTICES_SYM[b]
        tx, ty = bx - ax, by - ay
        nx, ny = ty, -tx  # rotate tangent by -90 degrees: outward for ccw cells
        px, py = ax + _t * tx, ay + _t * ty
        for j in range(k):
            row = []
            for vx, vy in cands:
                vn = vx.subs({_x: px, _y: py}) * nx + vy.subs({_x: px, _y: py}) * ny
                row.append(sp.integrate(sp.expand(vn * legendre[j]), (_t, 0, 1)))
            rows.append(row)
    # interior moments against [P_{k-2}]^2
    interior_exps = monomial_exponents(k - 2) if k >= 2 else ()
    for i, j in interior_exps:
        for comp in (0, 1):
            row = []
            for vx, vy in cands:
                v = vx if comp == 0 else vy
                row.append(_tri_integral(v * _x**i * _y**j))
            rows.append(row)

    dual = sp.Matrix(rows)
    alpha = dual.inv()  # basis_j = sum_c alpha[c, j] * cand_c

    exps = monomial_exponents(k)
    index = {e: a for a, e in enumerate(exps)}
    coeffs = np.zeros((len(exps), nd, 2))
    for cidx, (vx, vy) in enumerate(cands):
        for comp, v in enumerate((vx, vy)):
            poly = sp.Poly(v, _x, _y)
            if poly.is_zero:
                continue
            for mono, c in zip(poly.monoms(), poly.coeffs()):
                a = index[mono]
                for jdof in range(nd):
                    coeffs[a, jdof, comp] += float(c) * float(alpha[cidx, jdof])
    return RTElement(k, coeffs, exps)


# ---------------------------------------------------------------------------
# facet (trace) elements: Lagrange on the unit interval


@dataclass(frozen=True)
class LineElement:
    degree: int
    nodes: np.ndarray   # (k+1,)
    coeffs: np.ndarray  # (k+1, k+1): basis_i = sum_a coeffs[a, i] * t^a

    @property
    def n_dofs(self) -> int:
        return self.degree + 1

    def tabulate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
            raise ValueError("tabulation points outside the reference edge")
        powers = np.stack([t**p for p in range(self.degree + 1)], axis=-1)
        return powers @ self.coeffs


@lru_cache(maxsize=None)
def line_element(degree: int) -> LineElement:
    if not 0 <= degree <= 4:
        raise ValueError(f"unsupported trace degree {degree}")
    if degree == 0:
        exact = [sp.Rational(1, 2)]
    else:
        exact = [sp.Rational(m, degree) for m in range(degree + 1)]
    vand = sp.Matrix([[t**a for a in range(degree + 1)] for t in exact])
    coeffs = np.array(vand.inv().tolist(), dtype=float)
    return LineElement(degree, np.array([float(t) for t in exact]), coeffs)
