"""Boundary conditions, specified per boundary face and component.

Each boundary face carries, for each displacement component, either a
Dirichlet condition (value from the ``displacement`` function) or a Neumann
condition (traction from the ``traction`` function).  Mixed per-component
("rolling") faces are allowed.
"""

from __future__ import annotations

import numpy as np

from .errors import AssemblyError
from .mesh import PolyMesh


def _zero(_x):
    return np.zeros(2)


class BoundaryConditions:
    def __init__(self, mesh: PolyMesh, dirichlet_mask, displacement=None, traction=None):
        """dirichlet_mask: (num_faces, 2) bool; True = Dirichlet for that
        component.  Entries of interior faces are ignored."""
        self.mesh = mesh
        self.mask = np.asarray(dirichlet_mask, dtype=bool)
        if self.mask.shape != (mesh.num_faces, 2):
            raise AssemblyError("dirichlet_mask must have shape (num_faces, 2)")
        self.displacement = displacement or _zero
        self.traction = traction or _zero

    def is_dirichlet(self, face: int, comp: int) -> bool:
        return bool(self.mask[face, comp])


def dirichlet_all(mesh: PolyMesh, displacement=None) -> BoundaryConditions:
    """Prescribed displacement on the whole boundary (zero by default)."""
    mask = np.zeros((mesh.num_faces, 2), dtype=bool)
    mask[mesh.boundary_faces] = True
    return BoundaryConditions(mesh, mask, displacement=displacement)


def case_locking(mesh: PolyMesh, displacement=None, traction=None) -> BoundaryConditions:
    """Zero displacement on the left/right sides, free (zero traction) top and
    bottom; the setup of the near-incompressibility experiments."""
    mask = np.zeros((mesh.num_faces, 2), dtype=bool)
    for f in mesh.boundary_faces:
        tag = mesh.boundary_tags[f]
        if tag in ("left", "right"):
            mask[f] = True
        elif tag not in ("top", "bottom"):
            raise AssemblyError(
                f"face {f} has tag {tag!r}; the locking preset needs an "
                "axis-aligned rectangular boundary"
            )
    return BoundaryConditions(mesh, mask, displacement=displacement, traction=traction)


PRESETS = {
    "dirichlet-all": dirichlet_all,
    "case6": case_locking,
}
