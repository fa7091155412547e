"""Linear elasticity on 2D polygonal meshes.

Two discretizations that operate directly on general polygonal cells:

* a first-order virtual element method (nodal displacements), in a standard
  form and two relaxed forms for the near-incompressible limit, and
* a multi-point stress approximation (cell-centered displacements, explicit
  face forces), standard and pressure-relaxed.

Plus the grid generators, manufactured-solution machinery and error norms
used to exercise them on distorted, refined, stretched and layered grids.
"""

from . import bc, linalg, material, mesh, meshgen, mpsa, vem, verify, vtkio
from .errors import (
    AssemblyError,
    GenerationError,
    LocalSolveError,
    MaterialError,
    MeshError,
    NotSPDError,
    SolverError,
)
from .material import MaterialField, from_poisson, voigt_stiffness
from .mesh import PolyMesh, build_mesh, interaction_regions, read_polymesh, write_polymesh
from .meshgen import GridSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "GenerationError",
    "GridSpec",
    "LocalSolveError",
    "MaterialError",
    "MaterialField",
    "MeshError",
    "NotSPDError",
    "PolyMesh",
    "SolverError",
    "bc",
    "build_mesh",
    "from_poisson",
    "generate",
    "interaction_regions",
    "linalg",
    "material",
    "mesh",
    "meshgen",
    "mpsa",
    "read_polymesh",
    "vem",
    "verify",
    "voigt_stiffness",
    "vtkio",
    "write_polymesh",
]
