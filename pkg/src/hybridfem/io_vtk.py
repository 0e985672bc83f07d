"""Legacy ASCII VTK export of meshes and fields.

Scalar continuous fields are written as point data at the mesh
vertices; discontinuous scalars as cell data at centroids; vector
fields as cell-data vectors at centroids.  Output bytes are
deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh
from .spaces import Function, eval_function

_CENTROID = np.array([[1.0 / 3.0, 1.0 / 3.0]])


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _header(mesh: Mesh) -> list[str]:
    lines = [
        "# vtk DataFile Version 3.0",
        "hybridfem fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    for x, y in mesh.vertex_coords:
        lines.append(f"{_fmt(x)} {_fmt(y)} {_fmt(0.0)}")
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    for tri in mesh.cell_vertices:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend(["5"] * mesh.n_cells)
    return lines


def write_mesh_vtk(path: str, mesh: Mesh) -> None:
    """Mesh-only dump: points and triangle cells."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(_header(mesh)) + "\n")


def export_fields(path: str, fields: list[tuple[str, Function]]) -> None:
    """Write named functions on a common mesh as legacy ASCII VTK.

    CG fields become POINT_DATA; everything else is sampled at cell
    centroids as CELL_DATA (vectors for vector-valued families).
    """
    if not fields:
        raise ValueError("export requires at least one field")
    meshes = {id(fn.space.mesh) for _, fn in fields}
    if len(meshes) != 1:
        raise ValueError("all exported fields must share one mesh")
    mesh = fields[0][1].space.mesh
    lines = _header(mesh)

    point_fields = [(n, f) for n, f in fields if f.space.family.kind == "CG"]
    cell_fields = [(n, f) for n, f in fields if f.space.family.kind != "CG"]
    if point_fields:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, fn in point_fields:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            # vertex dofs come first in the CG numbering
            for v in fn.coeffs[: mesh.n_vertices]:
                lines.append(_fmt(v))
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, fn in cell_fields:
            kind = fn.space.family.kind
            if kind == "Trace":
                raise ValueError("facet trace fields cannot be exported as cell data")
            vals = eval_function(fn, _CENTROID)
            if vals.ndim == 3:
                lines.append(f"VECTORS {name} double")
                for vx, vy in vals[:, 0, :]:
                    lines.append(f"{_fmt(vx)} {_fmt(vy)} {_fmt(0.0)}")
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in vals[:, 0]:
                    lines.append(_fmt(v))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path: str) -> dict:
    """Minimal legacy VTK reader for round-trip tests."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    out: dict = {"points": [], "cells": [], "point_data": {}, "cell_data": {}}
    i = 0
    n_points = n_cells = 0
    section = None
    current = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n_points = int(line.split()[1])
            for j in range(n_points):
                out["points"].append([float(v) for v in tokens[i + 1 + j].split()])
            i += n_points
        elif line.startswith("CELLS"):
            n_cells = int(line.split()[1])
            for j in range(n_cells):
                out["cells"].append([int(v) for v in tokens[i + 1 + j].split()[1:]])
            i += n_cells
        elif line.startswith("POINT_DATA"):
            section = "point_data"
        elif line.startswith("CELL_DATA"):
            section = "cell_data"
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            count = n_points if section == "point_data" else n_cells
            vals = [float(tokens[i + 2 + j]) for j in range(count)]
            out[section][name] = np.array(vals)
            i += count + 1
        elif line.startswith("VECTORS"):
            name = line.split()[1]
            count = n_points if section == "point_data" else n_cells
            vals = [[float(v) for v in tokens[i + 1 + j].split()] for j in range(count)]
            out[section][name] = np.array(vals)
            i += count
        i += 1
    out["points"] = np.array(out["points"])
    out["cells"] = np.array(out["cells"])
    return out
