"""Exception types shared across the package."""


class MeshError(ValueError):
    """Invalid mesh topology or geometry (degenerate cell, non-manifold face, ...)."""


class GenerationError(RuntimeError):
    """A grid generator produced an invalid mesh (e.g. inverted cells)."""


class MaterialError(ValueError):
    """Invalid material parameters."""


class AssemblyError(RuntimeError):
    """Discretization could not be assembled."""


class NotSPDError(RuntimeError):
    """A matrix passed to the SPD solver is not symmetric positive definite."""


class SolverError(RuntimeError):
    """Linear solve failed (singular matrix or residual above tolerance)."""


class InfeasibleConstraintsError(SolverError):
    """Equality constraints of a least-squares problem are inconsistent."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []


class RankDeficiencyError(SolverError):
    """Constrained least-squares minimizer is not unique to tolerance."""


class LocalSolveError(AssemblyError):
    """One or more vertex-local stress problems failed.

    ``vertices`` holds the mesh node ids where the local solve was singular; the
    failure is expected behaviour on sufficiently distorted grids and callers
    typically report it rather than abort.
    """

    def __init__(self, vertices):
        self.vertices = sorted(vertices)
        preview = ", ".join(str(v) for v in self.vertices[:8])
        more = "" if len(self.vertices) <= 8 else f", ... ({len(self.vertices)} total)"
        super().__init__(f"local stress problem singular at vertices [{preview}{more}]")
