"""Legacy ASCII VTK output of polygonal meshes with cell and point data."""

from __future__ import annotations

import numpy as np

from .mesh import PolyMesh


def write_vtk(mesh: PolyMesh, path, cell_data=None, point_data=None, title="polyelast"):
    """Write an unstructured-grid legacy VTK file.

    cell_data / point_data map names to arrays; 1D arrays become SCALARS,
    (n, 2) arrays become VECTORS with a zero z-component.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g} 0")
    size = sum(len(c) + 1 for c in mesh.cells)
    lines.append(f"CELLS {mesh.num_cells} {size}")
    for loop in mesh.cells:
        lines.append(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
    lines.append(f"CELL_TYPES {mesh.num_cells}")
    lines.extend(["7"] * mesh.num_cells)  # VTK_POLYGON

    def emit(block, count, data):
        lines.append(f"{block} {count}")
        for name, arr in data.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.17g}" for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{v[0]:.17g} {v[1]:.17g} 0" for v in arr)

    if cell_data:
        emit("CELL_DATA", mesh.num_cells, cell_data)
    if point_data:
        emit("POINT_DATA", mesh.num_nodes, point_data)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
