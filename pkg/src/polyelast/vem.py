"""First-order virtual element discretization of linear elasticity on
polygonal cells, in three flavors:

* ``standard``     -- energy projection onto rigid motions plus constant
                      strains, with a scaled-identity stabilization on the
                      projection complement.
* ``relax``        -- the volumetric term uses the cell-averaged divergence
                      only, and the stabilization scale drops its volumetric
                      part, which removes the spurious stiffening near the
                      incompressible limit on node-rich grids.
* ``relax-extra``  -- additionally enriches every face with a scalar
                      normal-bubble degree of freedom that enlarges the range
                      of the discrete divergence.

Element construction: for a cell with vertices x_i, the average strain of a
virtual function is computable from its (piecewise linear) boundary trace
alone, which yields an explicit projection P onto the six rigid/constant
strain modes.  The element energy is |K| eps^T D eps on the projected part
plus tau (I-P)^T (I-P) on the complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import AssemblyError
from .linalg import TripletMatrix, solve_general, solve_spd, symmetrize
from .mesh import PolyMesh

VARIANTS = ("standard", "relax", "relax-extra")

# Voigt Gram matrix of eps:eps with engineering shear in the third slot.
_D_SHEAR = np.diag([1.0, 1.0, 0.5])
# Voigt form of trace(eps) trace(eps).
_D_VOL = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])

# Integral of the quadratic edge bubble 4 t (1 - t) over the unit interval.
BUBBLE_MOMENT = 2.0 / 3.0


@dataclass
class VemElement:
    cell: int
    nodes: np.ndarray
    n_r: np.ndarray       # (2n, 3) rigid modes at the nodes
    n_c: np.ndarray       # (2n, 3) constant-strain modes at the nodes
    w_r: np.ndarray       # (3, 2n) projection weights onto rigid modes
    w_c: np.ndarray       # (3, 2n) nodal values -> average Voigt strain
    projector: np.ndarray  # (2n, 2n) P = N_R W_R + N_C W_C
    div_row: np.ndarray   # (2n,) nodal values -> integral of div u over K


def element_projections(mesh: PolyMesh, k: int) -> VemElement:
    """Build the projection operators of one cell.

    The strain weights come from the boundary integral of sym(u x n) with u
    linear on each edge; node i collects half of each incident edge's scaled
    normal.  Modes are centered at the vertex mean so that the six projection
    weights are an exact left inverse of the mode matrix and P is idempotent.
    """
    loop = mesh.cells[k]
    n = len(loop)
    coords = mesh.nodes[loop]
    volume = mesh.cell_volume[k]
    if volume < 1e-14:
        raise AssemblyError(f"cell {k} is degenerate (area {volume!r})")
    center = coords.mean(axis=0)

    # g_i = (1/2|K|) (x_{i+1} - x_{i-1}) rotated by -90 deg.
    nxt = np.roll(coords, -1, axis=0)
    prv = np.roll(coords, 1, axis=0)
    chord = nxt - prv
    g = 0.5 / volume * np.column_stack([chord[:, 1], -chord[:, 0]])

    dx = coords - center
    n_r = np.zeros((2 * n, 3))
    n_c = np.zeros((2 * n, 3))
    n_r[0::2, 0] = 1.0
    n_r[1::2, 1] = 1.0
    n_r[0::2, 2] = -dx[:, 1]
    n_r[1::2, 2] = dx[:, 0]
    n_c[0::2, 0] = dx[:, 0]
    n_c[1::2, 1] = dx[:, 1]
    n_c[0::2, 2] = 0.5 * dx[:, 1]
    n_c[1::2, 2] = 0.5 * dx[:, 0]

    w_c = np.zeros((3, 2 * n))
    w_c[0, 0::2] = g[:, 0]
    w_c[1, 1::2] = g[:, 1]
    w_c[2, 0::2] = g[:, 1]
    w_c[2, 1::2] = g[:, 0]

    w_r = np.zeros((3, 2 * n))
    w_r[0, 0::2] = 1.0 / n
    w_r[1, 1::2] = 1.0 / n
    w_r[2, 0::2] = -0.5 * g[:, 1]
    w_r[2, 1::2] = 0.5 * g[:, 0]

    projector = n_r @ w_r + n_c @ w_c
    div_row = volume * (w_c[0] + w_c[1])
    return VemElement(
        cell=k, nodes=loop, n_r=n_r, n_c=n_c, w_r=w_r, w_c=w_c,
        projector=projector, div_row=div_row,
    )


def element_matrix(mesh: PolyMesh, material, k: int, variant: str = "standard",
                   element: VemElement | None = None) -> np.ndarray:
    """Element stiffness over the cell's nodal dofs (bubbles excluded).

    standard:    2mu Kc + lam/|K| d d^T + (2mu tau_mu + lam tau_vol) Q^T Q
    relax(+extra): same consistency but the stabilization scale keeps only
                 its shear part, so lambda never multiplies the complement.
    """
    if variant not in VARIANTS:
        raise AssemblyError(f"unknown variant {variant!r}")
    e = element or element_projections(mesh, k)
    mu = material.mu[k]
    lam = material.lam[k]
    volume = mesh.cell_volume[k]
    n2 = e.projector.shape[0]

    kc_mu = volume * (e.w_c.T @ _D_SHEAR @ e.w_c)
    tau_mu = np.trace(kc_mu) / n2
    q = np.eye(n2) - e.projector
    stab = q.T @ q

    a = 2.0 * mu * kc_mu + (lam / volume) * np.outer(e.div_row, e.div_row)
    tau = 2.0 * mu * tau_mu
    if variant == "standard":
        tau_vol = (e.div_row @ e.div_row / volume) / n2
        tau = tau + lam * tau_vol
    a = a + tau * stab
    return 0.5 * (a + a.T)


@dataclass
class VemSystem:
    mesh: PolyMesh
    material: object
    variant: str
    matrix: sps.csr_matrix
    rhs: np.ndarray
    dirichlet_mask: np.ndarray
    dirichlet_values: np.ndarray
    num_node_dofs: int
    num_bubbles: int
    ndof: int
    bubble_scale: np.ndarray | None = None


@dataclass
class VemSolution:
    nodal: np.ndarray          # (N, 2)
    bubbles: np.ndarray | None
    divergence: np.ndarray     # (C,)
    stress: np.ndarray         # (C, 3) Voigt [s11, s22, s12]
    dofs: int


def _dirichlet_nodes(mesh, bc):
    """Pinned (node, component) mask and values from the face-wise BC spec."""
    mask = np.zeros((mesh.num_nodes, 2), dtype=bool)
    for f in mesh.boundary_faces:
        for c in range(2):
            if bc.is_dirichlet(f, c):
                mask[mesh.face_nodes[f], c] = True
    values = np.zeros((mesh.num_nodes, 2))
    for n in np.flatnonzero(mask.any(axis=1)):
        g = bc.displacement(mesh.nodes[n])
        for c in range(2):
            if mask[n, c]:
                values[n, c] = g[c]
    return mask, values


def assemble(mesh: PolyMesh, material, body_force, bc,
             variant: str = "standard", saddle: bool = False) -> VemSystem:
    """Assemble the global system with symmetric Dirichlet elimination.

    Loads are cell-based: the body-force integral over each cell (midpoint
    rule) is split equally among its nodes; prescribed tractions integrate
    over faces and split equally between the two face nodes.  The equations
    are written for the convention div(sigma) = f, so the body force enters
    the right-hand side with a minus sign.
    """
    if variant not in VARIANTS:
        raise AssemblyError(f"unknown variant {variant!r}")
    with_bubbles = variant == "relax-extra"
    nn = mesh.num_nodes
    num_node_dofs = 2 * nn
    num_bubbles = mesh.num_faces if with_bubbles else 0
    ndof = num_node_dofs + num_bubbles

    trip = TripletMatrix((ndof, ndof))
    rhs = np.zeros(ndof)
    bubble_scale = np.zeros(mesh.num_faces) if with_bubbles else None

    for k in range(mesh.num_cells):
        e = element_projections(mesh, k)
        ae = element_matrix(mesh, material, k, variant, element=e)
        dofs = np.empty(2 * len(e.nodes), dtype=int)
        dofs[0::2] = 2 * e.nodes
        dofs[1::2] = 2 * e.nodes + 1

        if with_bubbles:
            mu = material.mu[k]
            lam = material.lam[k]
            volume = mesh.cell_volume[k]
            fids = mesh.cell_faces[k]
            signs = mesh.cell_face_sign[k]
            bflux = BUBBLE_MOMENT * mesh.face_area[fids] * signs
            div_ext = np.concatenate([e.div_row, bflux])
            m = len(fids)
            full = np.zeros((len(dofs) + m, len(dofs) + m))
            full[: len(dofs), : len(dofs)] = ae
            # replace the nodal-only volumetric block by the enriched one
            full[: len(dofs), : len(dofs)] -= (lam / volume) * np.outer(
                e.div_row, e.div_row
            )
            full += (lam / volume) * np.outer(div_ext, div_ext)
            kc_mu = volume * (e.w_c.T @ _D_SHEAR @ e.w_c)
            tau = 2.0 * mu * np.trace(kc_mu) / (2 * len(e.nodes))
            full[len(dofs):, len(dofs):] += tau * np.eye(m)
            bubble_scale[fids] += tau
            ae = 0.5 * (full + full.T)
            dofs = np.concatenate([dofs, num_node_dofs + np.asarray(fids)])

        trip.add_block(dofs, dofs, ae)

        if body_force is not None:
            load = np.asarray(body_force(mesh.cell_centroid[k]), dtype=float)
            load = load * mesh.cell_volume[k] / len(e.nodes)
            rhs[2 * e.nodes] -= load[0]
            rhs[2 * e.nodes + 1] -= load[1]

    # Prescribed tractions (Neumann faces).
    for f in mesh.boundary_faces:
        comps = [c for c in range(2) if not bc.is_dirichlet(f, c)]
        if not comps:
            continue
        t = np.asarray(bc.traction(mesh.face_centroid[f]), dtype=float)
        area = mesh.face_area[f]
        for c in comps:
            for node in mesh.face_nodes[f]:
                rhs[2 * node + c] += 0.5 * area * t[c]
        if with_bubbles and len(comps) == 2:
            rhs[num_node_dofs + f] += BUBBLE_MOMENT * area * float(
                t @ mesh.face_normal[f]
            )

    matrix = symmetrize(trip.tocsr())

    node_mask, node_values = _dirichlet_nodes(mesh, bc)
    mask = np.zeros(ndof, dtype=bool)
    values = np.zeros(ndof)
    mask[0 : num_node_dofs : 2] = node_mask[:, 0]
    mask[1 : num_node_dofs : 2] = node_mask[:, 1]
    values[0 : num_node_dofs : 2] = node_values[:, 0]
    values[1 : num_node_dofs : 2] = node_values[:, 1]
    if with_bubbles:
        for f in mesh.boundary_faces:
            if bc.is_dirichlet(f, 0) and bc.is_dirichlet(f, 1):
                mask[num_node_dofs + f] = True  # bubble of the trace data: zero

    matrix, rhs = _eliminate_dirichlet(matrix, rhs, mask, values)
    return VemSystem(
        mesh=mesh, material=material, variant=variant, matrix=matrix, rhs=rhs,
        dirichlet_mask=mask, dirichlet_values=values,
        num_node_dofs=num_node_dofs, num_bubbles=num_bubbles, ndof=ndof,
        bubble_scale=bubble_scale,
    )


def _eliminate_dirichlet(matrix, rhs, mask, values):
    """Symmetric elimination: move pinned columns to the right-hand side, then
    overwrite pinned rows and columns with the identity."""
    if not mask.any():
        return matrix, rhs
    u_pin = np.where(mask, values, 0.0)
    rhs = rhs - matrix @ u_pin
    keep = (~mask).astype(float)
    d_keep = sps.diags(keep)
    matrix = (d_keep @ matrix @ d_keep).tocsr() + sps.diags(mask.astype(float))
    rhs = rhs * keep + np.where(mask, values, 0.0)
    return matrix, rhs


def solve(system: VemSystem) -> VemSolution:
    x = solve_spd(system.matrix, system.rhs)
    return _postprocess(system, x)


def _postprocess(system, x):
    mesh = system.mesh
    nodal = x[: system.num_node_dofs].reshape(-1, 2)
    bubbles = x[system.num_node_dofs :] if system.num_bubbles else None
    div = discrete_divergence(mesh, nodal, bubbles)
    stress = recover_stress(mesh, system.material, nodal, bubbles)
    return VemSolution(
        nodal=nodal, bubbles=bubbles, divergence=div, stress=stress,
        dofs=system.ndof,
    )


def discrete_divergence(mesh: PolyMesh, nodal: np.ndarray,
                        bubbles: np.ndarray | None = None) -> np.ndarray:
    """Cell-average divergence from the boundary flux of the trace.

    With u linear on each edge the flux integral is the trapezoid rule, which
    reduces to the strain-weight vectors; face bubbles add their moment times
    the outward sign.
    """
    out = np.empty(mesh.num_cells)
    for k in range(mesh.num_cells):
        e = element_projections(mesh, k)
        u_loc = nodal[e.nodes].reshape(-1)
        total = float(e.div_row @ u_loc)
        if bubbles is not None:
            fids = mesh.cell_faces[k]
            signs = mesh.cell_face_sign[k]
            total += float(
                np.sum(BUBBLE_MOMENT * mesh.face_area[fids] * signs * bubbles[fids])
            )
        out[k] = total / mesh.cell_volume[k]
    return out


def recover_stress(mesh: PolyMesh, material, nodal: np.ndarray,
                   bubbles: np.ndarray | None = None) -> np.ndarray:
    """Piecewise-constant Voigt stress [s11, s22, s12] per cell from each
    cell's average strain and average divergence."""
    div = discrete_divergence(mesh, nodal, bubbles)
    out = np.empty((mesh.num_cells, 3))
    for k in range(mesh.num_cells):
        e = element_projections(mesh, k)
        u_loc = nodal[e.nodes].reshape(-1)
        eps = e.w_c @ u_loc
        mu = material.mu[k]
        lam = material.lam[k]
        out[k, 0] = 2.0 * mu * eps[0] + lam * div[k]
        out[k, 1] = 2.0 * mu * eps[1] + lam * div[k]
        out[k, 2] = mu * eps[2]
    return out


def assemble_saddle(mesh: PolyMesh, material, body_force, bc,
                    variant: str = "relax"):
    """Explicit displacement-pressure form of the relaxed variants.

    Returns (matrix, rhs, ndof_u) where the trailing num_cells unknowns are
    the cell pressures lam * (average divergence); eliminating them yields
    the displacement-only relaxed system.  Intended for inspection; the
    production path solves the eliminated SPD form.
    """
    if variant not in ("relax", "relax-extra"):
        raise AssemblyError("the saddle form exists for the relaxed variants only")
    base = assemble(mesh, material, body_force, bc, variant=variant)
    nu = base.ndof
    nc = mesh.num_cells
    trip = TripletMatrix((nu + nc, nu + nc))

    # Rebuild the mu-part (consistency + stabilization) without the lam term,
    # then couple pressures through the integrated divergence rows.
    zero_lam = type(material)(material.mu, np.zeros_like(material.lam))
    mu_sys = assemble(mesh, material=zero_lam, body_force=body_force, bc=bc,
                      variant=variant)
    a = mu_sys.matrix.tocoo()
    for i, j, v in zip(a.row, a.col, a.data):
        trip.add(int(i), int(j), float(v))
    rhs_tail = np.zeros(nc)
    for k in range(mesh.num_cells):
        e = element_projections(mesh, k)
        dofs = np.empty(2 * len(e.nodes), dtype=int)
        dofs[0::2] = 2 * e.nodes
        dofs[1::2] = 2 * e.nodes + 1
        div_row = e.div_row / mesh.cell_volume[k]
        cols = list(dofs)
        vals = list(div_row)
        if variant == "relax-extra":
            fids = mesh.cell_faces[k]
            signs = mesh.cell_face_sign[k]
            cols += [base.num_node_dofs + int(f) for f in fids]
            vals += list(BUBBLE_MOMENT * mesh.face_area[fids] * signs
                         / mesh.cell_volume[k])
        lam = material.lam[k]
        if lam <= 0.0:
            raise AssemblyError("saddle form needs lambda > 0")
        pressure_rhs = 0.0
        for j, v in zip(cols, vals):
            if base.dirichlet_mask[j]:
                pressure_rhs -= mesh.cell_volume[k] * v * base.dirichlet_values[j]
            else:
                trip.add(j, nu + k, mesh.cell_volume[k] * v)
                trip.add(nu + k, j, mesh.cell_volume[k] * v)
        trip.add(nu + k, nu + k, -mesh.cell_volume[k] / lam)
        rhs_tail[k] = pressure_rhs
    rhs = np.concatenate([mu_sys.rhs, rhs_tail])
    return trip.tocsr(), rhs, nu


def solve_saddle(matrix, rhs, ndof_u, system_like):
    x = solve_general(matrix, rhs)
    return x[:ndof_u], x[ndof_u:]
