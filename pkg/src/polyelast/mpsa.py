"""Multi-point stress approximation: a cell-centered finite volume method for
linear elasticity on polygonal grids.

For every mesh vertex a local problem is posed on the surrounding cells.  Its
unknowns are displacement values at the sub-face continuity points (the Gauss
averages of the quadrature-point values).  Each cell's sub-region carries the
affine field interpolating the cell-center value and its two continuity
values; the values at the two Gauss quadrature points of a sub-face are that
affine field evaluated there, and sub-face forces follow from the constitutive
law applied to its gradient.  The local unknowns minimize the weighted
displacement jumps at the quadrature points across interior faces subject to
force continuity, which expresses every sub-face force as a linear combination
of neighbouring cell values: the stress-weight tensors.  (Minimizing at the
quadrature points rather than at the continuity points is essential: it also
penalizes tangential-gradient mismatch, without which symmetric vertex
configurations admit a spurious zero-jump mode.)  Cell-wise momentum balance
then yields a (generally nonsymmetric) global system in the cell
displacements.

The ``relax-extra`` variant adds one pressure unknown per cell that replaces
the volumetric part of the local constitutive law; a per-cell closure equates
it with lambda times the boundary-flux divergence built from the recovered
continuity values.  This relaxes the per-sub-region solenoidal constraint and
removes locking near the incompressible limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, LocalSolveError, RankDeficiencyError, SolverError
from .linalg import TripletMatrix, constrained_least_squares, solve_general
from .mesh import InteractionRegion, PolyMesh, interaction_regions

VARIANTS = ("standard", "relax-extra")


class LocalGeometryError(AssemblyError):
    """Continuity points and cell center of a sub-region are collinear."""


@dataclass(frozen=True)
class BcSlot:
    """One scalar boundary-data parameter of a vertex-local problem."""

    kind: str   # 'dirichlet' (pinned continuity value) or 'neumann' (traction)
    pair: int   # local sub-face index
    comp: int


@dataclass
class RegionWeights:
    """Solved local problem at one vertex: linear maps from the parameter
    vector [cell displacements; cell pressures; boundary slots] to sub-face
    forces and continuity-point displacement traces."""

    vertex: int
    cells: np.ndarray
    pairs: tuple
    normals: np.ndarray      # (P, 2) outward normal of pair's cell on its face
    force: np.ndarray        # (P, 2, nparams)
    trace: np.ndarray        # (P, 2, nparams)
    slots: tuple
    with_pressure: bool

    @property
    def nparams(self):
        return self.force.shape[2]

    def num_cell_params(self):
        c = len(self.cells)
        return 2 * c + (c if self.with_pressure else 0)

    def slot_values(self, mesh: PolyMesh, bc) -> np.ndarray:
        """Numeric boundary data for this vertex: Gauss-averaged displacement
        for Dirichlet slots, traction at the continuity point for Neumann."""
        vals = np.zeros(len(self.slots))
        for i, slot in enumerate(self.slots):
            sf = self.pairs[slot.pair]
            if slot.kind == "dirichlet":
                g = [np.asarray(bc.displacement(x))[slot.comp] for x in sf.qpoints]
                vals[i] = float(np.dot(sf.weights, g))
            else:
                vals[i] = float(np.asarray(bc.traction(sf.midpoint))[slot.comp])
        return vals

    def params(self, mesh, bc, cell_values, pressures=None):
        """Assemble the numeric parameter vector for given cell data."""
        c = len(self.cells)
        out = np.empty(self.nparams)
        out[: 2 * c] = cell_values[self.cells].reshape(-1)
        pos = 2 * c
        if self.with_pressure:
            out[pos : pos + c] = pressures[self.cells]
            pos += c
        out[pos:] = self.slot_values(mesh, bc)
        return out


def decouple_fracture_faces(mesh: PolyMesh, faces) -> frozenset:
    """Validate a set of faces to decouple: forces are set to zero on both
    sides and the displacement-jump terms across them are dropped."""
    out = frozenset(int(f) for f in faces)
    for f in out:
        if f < 0 or f >= mesh.num_faces:
            raise AssemblyError(f"fracture face {f} does not exist")
        if mesh.is_boundary_face(f):
            raise AssemblyError(f"fracture face {f} lies on the boundary")
    return out


def local_gradient_map(mesh: PolyMesh, region: InteractionRegion, cell: int):
    """Inverse local geometry of one sub-region: returns (pair indices, Dinv).

    The affine field taking the cell-center value and the two continuity-point
    values has gradient G = [a1 - uK, a2 - uK] Dinv with Dinv the inverse of
    the offsets from the cell center to the continuity points.
    """
    pidx = [i for i, sf in enumerate(region.subfaces) if sf.cell == cell]
    if len(pidx) != 2:
        raise LocalGeometryError(
            f"sub-region (cell {cell}, vertex {region.vertex}) has "
            f"{len(pidx)} sub-faces; expected 2"
        )
    xk = mesh.cell_centroid[cell]
    d = np.column_stack([region.subfaces[i].midpoint - xk for i in pidx])
    det = d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
    scale = max(np.abs(d).max(), 1e-300)
    if abs(det) <= 1e-12 * scale * scale:
        raise LocalGeometryError(
            f"sub-region (cell {cell}, vertex {region.vertex}): continuity "
            "points are collinear with the cell center"
        )
    dinv = np.array([[d[1, 1], -d[0, 1]], [-d[1, 0], d[0, 0]]]) / det
    return pidx, dinv


def _harmonic_weight(material, k0, k1):
    e = material.stiffest_eigenvalue()
    a, b = e[k0], e[k1]
    return 2.0 * a * b / (a + b)


def local_solve(mesh: PolyMesh, region: InteractionRegion, material, bc,
                variant: str = "standard",
                fracture_faces: frozenset = frozenset()) -> RegionWeights:
    """Pose and solve the constrained least-squares problem at one vertex."""
    if variant not in VARIANTS:
        raise AssemblyError(f"unknown variant {variant!r}")
    with_pressure = variant == "relax-extra"
    pairs = region.subfaces
    npair = len(pairs)
    nv = 2 * npair
    cells = region.cells
    cindex = {int(k): i for i, k in enumerate(cells)}
    ncell = len(cells)
    nupar = 2 * ncell + (ncell if with_pressure else 0)

    # Boundary slots, enumerated deterministically by (pair, component).
    slots = []
    slot_index = {}
    for p, sf in enumerate(pairs):
        if not mesh.is_boundary_face(sf.face):
            continue
        for c in range(2):
            kind = "dirichlet" if bc.is_dirichlet(sf.face, c) else "neumann"
            slot_index[(p, c)] = len(slots)
            slots.append(BcSlot(kind=kind, pair=p, comp=c))
    nparams = nupar + len(slots)

    normals = np.array([mesh.outward_normal(sf.cell, sf.face) for sf in pairs])

    # Force rows per pair over [a | params]:  T_{p,r} = row . [a, params],
    # and affine-reconstruction values at the quadrature points,
    # qval[p, beta, r] = u_K,r + sum_c G_rc (x_beta - x_K)_c.
    force_a = np.zeros((npair, 2, nv))
    force_p = np.zeros((npair, 2, nparams))
    qval_a = np.zeros((npair, 2, 2, nv))
    qval_p = np.zeros((npair, 2, 2, nparams))
    for k in cells:
        k = int(k)
        pidx, dinv = local_gradient_map(mesh, region, k)
        mu = material.mu[k]
        lam = material.lam[k]
        xk = mesh.cell_centroid[k]
        # G_{rc} = sum_j dinv[j, c] (a_{pj, r} - u_{k, r})
        for p in pidx:
            sf = pairs[p]
            n = normals[p]
            m = sf.measure
            for r in range(2):
                row_a = np.zeros(nv)
                row_p = np.zeros(nparams)
                # 2 mu sym(G) . n  contribution, row r:
                # sum_c (mu (G_rc + G_cr)) n_c
                for c in range(2):
                    coeff = mu * n[c]
                    for jj, pj in enumerate(pidx):
                        row_a[2 * pj + r] += coeff * dinv[jj, c]
                        row_a[2 * pj + c] += coeff * dinv[jj, r]
                    row_p[2 * cindex[k] + r] -= coeff * dinv[:, c].sum()
                    row_p[2 * cindex[k] + c] -= coeff * dinv[:, r].sum()
                if with_pressure:
                    row_p[2 * ncell + cindex[k]] += n[r]
                else:
                    # lam trace(G) n_r
                    for c in range(2):
                        for jj, pj in enumerate(pidx):
                            row_a[2 * pj + c] += lam * n[r] * dinv[jj, c]
                        row_p[2 * cindex[k] + c] -= lam * n[r] * dinv[:, c].sum()
                force_a[p, r] = m * row_a
                force_p[p, r] = m * row_p
            for beta in range(2):
                dx = sf.qpoints[beta] - xk
                for r in range(2):
                    qa = np.zeros(nv)
                    qp = np.zeros(nparams)
                    total = 0.0
                    for jj, pj in enumerate(pidx):
                        w = dinv[jj, 0] * dx[0] + dinv[jj, 1] * dx[1]
                        qa[2 * pj + r] += w
                        total += w
                    qp[2 * cindex[k] + r] += 1.0 - total
                    qval_a[p, beta, r] = qa
                    qval_p[p, beta, r] = qp

    # Constraints and jump objective, face by face.  Jumps are measured at the
    # two quadrature points of each interior face (affine-reconstruction
    # values of both sides), whose rows carry cell-value parts as well.
    con_a, con_p = [], []
    obj_a, obj_p = [], []
    face_pairs = {}
    for p, sf in enumerate(pairs):
        face_pairs.setdefault(sf.face, []).append(p)
    for f in sorted(face_pairs):
        plist = face_pairs[f]
        if len(plist) == 2:
            p, q = plist
            if f in fracture_faces:
                for t in (p, q):
                    for r in range(2):
                        con_a.append(force_a[t, r])
                        con_p.append(-force_p[t, r])
            else:
                for r in range(2):
                    con_a.append(force_a[p, r] + force_a[q, r])
                    con_p.append(-(force_p[p, r] + force_p[q, r]))
                w = _harmonic_weight(material, pairs[p].cell, pairs[q].cell)
                sw = np.sqrt(w)
                for beta in range(2):
                    for r in range(2):
                        obj_a.append(sw * (qval_a[q, beta, r] - qval_a[p, beta, r]))
                        obj_p.append(-sw * (qval_p[q, beta, r] - qval_p[p, beta, r]))
        else:
            (p,) = plist
            sf = pairs[p]
            for c in range(2):
                srow_p = np.zeros(nparams)
                if bc.is_dirichlet(sf.face, c):
                    row = np.zeros(nv)
                    row[2 * p + c] = 1.0
                    srow_p[nupar + slot_index[(p, c)]] = 1.0
                    con_a.append(row)
                    con_p.append(srow_p)
                else:
                    # Prescribed tractions join the least-squares objective:
                    # imposing them as hard rows is incompatible with force
                    # continuity for generic data (the sigma(G).n rows carry an
                    # exact left nullspace at straight boundary corners).
                    # Rows are normalized to the displacement-jump scale.
                    srow_p[nupar + slot_index[(p, c)]] = sf.measure
                    scale = np.linalg.norm(force_a[p, c])
                    if scale <= 0.0:
                        raise LocalGeometryError(
                            f"degenerate traction row at vertex {region.vertex}"
                        )
                    sw = np.sqrt(material.stiffest_eigenvalue()[sf.cell]) / scale
                    obj_a.append(sw * force_a[p, c])
                    obj_p.append(sw * (srow_p - force_p[p, c]))

    c_mat = np.array(con_a) if con_a else np.zeros((0, nv))
    d_mat = np.array(con_p) if con_p else np.zeros((0, nparams))
    # Row equilibration keeps the rank test meaningful across mixed scales.
    if len(c_mat):
        norms = np.maximum(
            np.abs(c_mat).max(axis=1), np.abs(d_mat).max(axis=1)
        )
        norms = np.where(norms > 0.0, norms, 1.0)
        c_mat = c_mat / norms[:, None]
        d_mat = d_mat / norms[:, None]
    a_mat = np.array(obj_a) if obj_a else np.zeros((0, nv))
    b_mat = np.array(obj_p) if obj_p else np.zeros((0, nparams))

    minimizer = constrained_least_squares(a_mat, b_mat, c_mat, d_mat)
    m = minimizer.matrix  # (nv, nparams)

    force = np.einsum("prv,vq->prq", force_a, m) + force_p
    trace = m.reshape(npair, 2, nparams)
    return RegionWeights(
        vertex=region.vertex, cells=cells, pairs=pairs, normals=normals,
        force=force, trace=trace, slots=tuple(slots), with_pressure=with_pressure,
    )


class StressWeights:
    """Stress-weight tensors of the whole mesh: one solved local problem per
    vertex.  ``failures`` lists vertices whose local problem was singular."""

    def __init__(self, mesh, regions, weights, variant, fracture_faces):
        self.mesh = mesh
        self.regions = regions
        self.weights = weights
        self.variant = variant
        self.fracture_faces = fracture_faces

    @property
    def with_pressure(self):
        return self.variant == "relax-extra"


def compute_stress_weights(mesh: PolyMesh, material, bc, variant: str = "standard",
                           fracture_faces=frozenset(),
                           regions=None) -> StressWeights:
    """Solve every vertex-local problem; collects failures and raises
    LocalSolveError listing all offending vertices if any occurred."""
    if variant not in VARIANTS:
        raise AssemblyError(f"unknown variant {variant!r}")
    fracture_faces = decouple_fracture_faces(mesh, fracture_faces)
    regions = regions if regions is not None else interaction_regions(mesh)
    weights = []
    failed = []
    for region in regions:
        try:
            weights.append(
                local_solve(mesh, region, material, bc, variant, fracture_faces)
            )
        except (RankDeficiencyError, LocalGeometryError, SolverError):
            failed.append(region.vertex)
            weights.append(None)
    if failed:
        raise LocalSolveError(failed)
    return StressWeights(mesh, regions, weights, variant, fracture_faces)


@dataclass
class MpsaSystem:
    mesh: PolyMesh
    material: object
    variant: str
    matrix: object
    rhs: np.ndarray
    weights: StressWeights
    bc: object
    ndof: int


@dataclass
class MpsaSolution:
    cells: np.ndarray            # (C, 2) cell-center displacements
    pressure: np.ndarray | None  # (C,) for relax-extra
    divergence: np.ndarray       # (C,)
    face_forces: np.ndarray      # (F, 2), reported for the first adjacent cell
    dofs: int


def assemble(mesh: PolyMesh, material, body_force, bc, variant: str = "standard",
             fracture_faces=frozenset(), weights: StressWeights | None = None) -> MpsaSystem:
    """Momentum balance per cell from the stress weights; for relax-extra an
    additional pressure closure row per cell."""
    if weights is None:
        weights = compute_stress_weights(
            mesh, material, bc, variant, fracture_faces
        )
    with_pressure = weights.with_pressure
    nc = mesh.num_cells
    ndof = 2 * nc + (nc if with_pressure else 0)
    trip = TripletMatrix((ndof, ndof))
    rhs = np.zeros(ndof)

    for k in range(nc):
        load = np.zeros(2) if body_force is None else np.asarray(
            body_force(mesh.cell_centroid[k]), dtype=float
        )
        rhs[2 * k : 2 * k + 2] += load * mesh.cell_volume[k]
        if with_pressure:
            trip.add(2 * nc + k, 2 * nc + k, 1.0)

    for rw in weights.weights:
        ncell = len(rw.cells)
        ucols = np.empty(2 * ncell, dtype=int)
        ucols[0::2] = 2 * rw.cells
        ucols[1::2] = 2 * rw.cells + 1
        pcols = 2 * nc + rw.cells if with_pressure else None
        slot_vals = rw.slot_values(mesh, bc)
        for p, sf in enumerate(rw.pairs):
            rows = (2 * sf.cell, 2 * sf.cell + 1)
            for r in range(2):
                coeff = rw.force[p, r]
                _scatter(trip, rhs, rows[r], coeff, ucols, pcols, ncell,
                         with_pressure, slot_vals)
            if with_pressure:
                k = sf.cell
                prow = 2 * nc + k
                factor = material.lam[k] / mesh.cell_volume[k] * sf.measure
                coeff = -factor * (
                    rw.normals[p, 0] * rw.trace[p, 0]
                    + rw.normals[p, 1] * rw.trace[p, 1]
                )
                _scatter(trip, rhs, prow, coeff, ucols, pcols, ncell,
                         with_pressure, slot_vals)

    matrix = trip.tocsr()
    return MpsaSystem(mesh=mesh, material=material, variant=variant,
                      matrix=matrix, rhs=rhs, weights=weights, bc=bc, ndof=ndof)


def _scatter(trip, rhs, row, coeff, ucols, pcols, ncell, with_pressure, slot_vals):
    pos = 0
    for j, col in enumerate(ucols):
        v = coeff[pos + j]
        if v != 0.0:
            trip.add(row, int(col), v)
    pos += len(ucols)
    if with_pressure:
        for j, col in enumerate(pcols):
            v = coeff[pos + j]
            if v != 0.0:
                trip.add(row, int(col), v)
        pos += ncell
    tail = coeff[pos:]
    if len(tail):
        rhs[row] -= float(tail @ slot_vals)


def solve(system: MpsaSystem) -> MpsaSolution:
    x = solve_general(system.matrix, system.rhs)
    nc = system.mesh.num_cells
    cells = x[: 2 * nc].reshape(-1, 2)
    pressure = x[2 * nc :] if system.weights.with_pressure else None
    div = cell_divergence(system.weights, system.bc, cells, pressure)
    forces = face_forces(system.weights, system.bc, cells, pressure)
    return MpsaSolution(cells=cells, pressure=pressure, divergence=div,
                        face_forces=forces, dofs=system.ndof)


def face_forces(weights: StressWeights, bc, cell_values, pressures=None) -> np.ndarray:
    """Total force per face as seen from its first adjacent cell (the second
    side is the exact negation for non-fracture interior faces)."""
    mesh = weights.mesh
    out = np.zeros((mesh.num_faces, 2))
    for rw in weights.weights:
        params = rw.params(mesh, bc, cell_values, pressures)
        for p, sf in enumerate(rw.pairs):
            if mesh.face_cells[sf.face, 0] != sf.cell:
                continue
            out[sf.face] += rw.force[p] @ params
    return out


def cell_divergence(weights: StressWeights, bc, cell_values, pressures=None) -> np.ndarray:
    """div_K = (1/|K|) sum of sub-face measure times (continuity trace . n)."""
    mesh = weights.mesh
    out = np.zeros(mesh.num_cells)
    for rw in weights.weights:
        params = rw.params(mesh, bc, cell_values, pressures)
        for p, sf in enumerate(rw.pairs):
            trace = rw.trace[p] @ params
            out[sf.cell] += sf.measure * float(trace @ rw.normals[p])
    return out / mesh.cell_volume
