"""Structured triangulations of the unit square with full facet topology.

Cells are counterclockwise vertex triples.  Local edge ``l`` of a cell is
the edge opposite local vertex ``l``, traversed counterclockwise, i.e.
from vertex ``(l+1) % 3`` to vertex ``(l+2) % 3``.  Every facet also has a
global direction, running from its lower to its higher global vertex
index; orientation-sensitive degrees of freedom (H(div) edge moments,
facet traces) are defined with respect to that direction so that the two
cells sharing a facet agree on its dofs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

#: local edge l runs from vertex (l+1)%3 to vertex (l+2)%3 (counterclockwise)
EDGE_VERTICES = ((1, 2), (2, 0), (0, 1))

# rotation by -90 degrees: maps a ccw edge tangent to the outward normal
_ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class Mesh:
    """Immutable 2D simplicial mesh of the unit square.

    Interior facets store both incident cells in increasing cell order
    (the first entry is the "+" side); exterior facets store one cell and
    ``-1``.  ``exterior_label`` is empty for interior facets.
    """

    vertex_coords: np.ndarray      # (n_vertices, 2)
    cell_vertices: np.ndarray      # (n_cells, 3), ccw
    facet_vertices: np.ndarray     # (n_facets, 2), lower vertex index first
    facet_cells: np.ndarray        # (n_facets, 2), -1 where absent
    facet_local_index: np.ndarray  # (n_facets, 2), local edge in each cell
    cell_facets: np.ndarray        # (n_cells, 3)
    facet_kind: np.ndarray         # (n_facets,), "interior" or "exterior"
    exterior_label: np.ndarray     # (n_facets,), DIRICHLET / NEUMANN / ""

    @property
    def n_cells(self) -> int:
        return len(self.cell_vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_coords)

    @property
    def n_facets(self) -> int:
        return len(self.facet_vertices)

    @property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_kind == "interior")

    @property
    def exterior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_kind == "exterior")

    def facets_with_label(self, label: str) -> np.ndarray:
        return np.flatnonzero(self.exterior_label == label)

    def facet_midpoints(self) -> np.ndarray:
        coords = self.vertex_coords[self.facet_vertices]
        return coords.mean(axis=1)

    def geometry(self) -> MeshGeometry:
        """Per-cell affine map data; computed once and cached."""
        geo = getattr(self, "_geometry", None)
        if geo is None:
            geo = _compute_geometry(self)
            object.__setattr__(self, "_geometry", geo)
        return geo


@dataclass
class CellGeometry:
    """Affine reference-to-physical map data for one cell."""

    jacobian: np.ndarray       # (2, 2)
    det_j: float
    inv_jt: np.ndarray         # (2, 2)
    facet_normals: np.ndarray  # (3, 2), outward unit normals per local edge
    facet_lengths: np.ndarray  # (3,)


@dataclass
class MeshGeometry:
    """Batched affine map data for all cells of a mesh."""

    origins: np.ndarray        # (n_cells, 2), coordinates of local vertex 0
    jacobians: np.ndarray      # (n_cells, 2, 2)
    det_j: np.ndarray          # (n_cells,)
    inv_jt: np.ndarray         # (n_cells, 2, 2)
    edge_normals: np.ndarray   # (n_cells, 3, 2), outward unit
    edge_lengths: np.ndarray   # (n_cells, 3)
    dir_match: np.ndarray      # (n_cells, 3) bool: ccw traversal == global direction


def _compute_geometry(mesh: Mesh) -> MeshGeometry:
    coords = mesh.vertex_coords[mesh.cell_vertices]  # (nc, 3, 2)
    origins = coords[:, 0, :]
    jac = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        raise ValueError("mesh contains non-positively oriented cells")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    inv_jt = np.swapaxes(inv, 1, 2)

    normals = np.empty((mesh.n_cells, 3, 2))
    lengths = np.empty((mesh.n_cells, 3))
    dir_match = np.empty((mesh.n_cells, 3), dtype=bool)
    for loc, (a, b) in enumerate(EDGE_VERTICES):
        tangent = coords[:, b] - coords[:, a]
        lengths[:, loc] = np.hypot(tangent[:, 0], tangent[:, 1])
        normals[:, loc] = tangent @ _ROT.T / lengths[:, loc, None]
        start = mesh.cell_vertices[:, a]
        end = mesh.cell_vertices[:, b]
        dir_match[:, loc] = start < end
    return MeshGeometry(origins, jac, det, inv_jt, normals, lengths, dir_match)


def build_unit_square(n: int) -> Mesh:
    """Triangulate [0,1]^2 into 2*n*n cells.

    Each grid square is split along its lower-left to upper-right
    diagonal.  Exterior facets are labelled Dirichlet.
    """
    if n < 1:
        raise ValueError(f"mesh subdivision must be >= 1, got {n}")
    grid = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(grid, grid, indexing="xy")
    coords = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cell_vertices = np.asarray(cells, dtype=np.int64)
    return _mesh_from_cells(coords, cell_vertices)


def _mesh_from_cells(coords: np.ndarray, cell_vertices: np.ndarray) -> Mesh:
    facet_index: dict[tuple[int, int], int] = {}
    facet_vertices: list[tuple[int, int]] = []
    facet_cells: list[list[int]] = []
    facet_local: list[list[int]] = []
    n_cells = len(cell_vertices)
    cell_facets = np.empty((n_cells, 3), dtype=np.int64)
    for c in range(n_cells):
        for loc, (a, b) in enumerate(EDGE_VERTICES):
            key = tuple(sorted((int(cell_vertices[c, a]), int(cell_vertices[c, b]))))
            f = facet_index.get(key)
            if f is None:
                f = len(facet_vertices)
                facet_index[key] = f
                facet_vertices.append(key)
                facet_cells.append([c, -1])
                facet_local.append([loc, -1])
            else:
                if facet_cells[f][1] != -1:
                    raise ValueError(f"facet {key} incident to more than two cells")
                facet_cells[f][1] = c
                facet_local[f][1] = loc
            cell_facets[c, loc] = f

    facet_cells_arr = np.asarray(facet_cells, dtype=np.int64)
    facet_local_arr = np.asarray(facet_local, dtype=np.int64)
    kind = np.where(facet_cells_arr[:, 1] >= 0, "interior", "exterior")
    label = np.where(kind == "exterior", DIRICHLET, "")
    return Mesh(
        vertex_coords=np.asarray(coords, dtype=float),
        cell_vertices=cell_vertices,
        facet_vertices=np.asarray(facet_vertices, dtype=np.int64),
        facet_cells=facet_cells_arr,
        facet_local_index=facet_local_arr,
        cell_facets=cell_facets,
        facet_kind=kind.astype(object),
        exterior_label=label.astype(object),
    )


def cell_geometry(mesh: Mesh, cell: int) -> CellGeometry:
    """Affine map data of one cell; raises on an out-of-range index."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range for {mesh.n_cells} cells")
    geo = mesh.geometry()
    return CellGeometry(
        jacobian=geo.jacobians[cell].copy(),
        det_j=float(geo.det_j[cell]),
        inv_jt=geo.inv_jt[cell].copy(),
        facet_normals=geo.edge_normals[cell].copy(),
        facet_lengths=geo.edge_lengths[cell].copy(),
    )


def mark_boundary(mesh: Mesh, predicate: Callable[[float, float], str]) -> Mesh:
    """Relabel exterior facets from a midpoint predicate.

    The predicate receives the facet midpoint and must return
    ``DIRICHLET`` or ``NEUMANN`` for every exterior facet.
    """
    labels = mesh.exterior_label.copy()
    mids = mesh.facet_midpoints()
    for f in mesh.exterior_facets:
        lab = predicate(float(mids[f, 0]), float(mids[f, 1]))
        if lab not in (DIRICHLET, NEUMANN):
            raise ValueError(f"predicate returned invalid label {lab!r} for facet {f}")
        labels[f] = lab
    return replace(mesh, exterior_label=labels)
