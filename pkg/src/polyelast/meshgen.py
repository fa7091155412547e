"""Grid generators for the unit square: Cartesian, twisted, randomly perturbed,
triangular, hexagonal (honeycomb), stretched, two-region refined, thin-layer,
interface-node-enriched and mixed meshes.

All generators are deterministic (randomness flows from an explicit seed) and
preserve the total domain volume.  One-sided refinement is represented through
hanging nodes: the coarse cell's loop includes the fine-side subdivision points
so that collinear sub-segments become ordinary shared faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import GenerationError, MeshError
from .mesh import PolyMesh, build_mesh

TWIST_AMPLITUDE = 0.05
TWIST_FREQUENCY = 3.0 * math.pi


class _NodeBank:
    """Assigns ids to nodes keyed by exact coordinate pairs.

    Shared coordinates must be computed through identical expressions so the
    float keys coincide; the generators below are written that way.
    """

    def __init__(self):
        self.index = {}
        self.coords = []

    def __call__(self, x, y):
        key = (x, y)
        i = self.index.get(key)
        if i is None:
            i = len(self.coords)
            self.index[key] = i
            self.coords.append(key)
        return i

    def array(self):
        return np.array(self.coords, dtype=float)


def _rebuild(mesh: PolyMesh, new_nodes, what: str) -> PolyMesh:
    try:
        return build_mesh(new_nodes, mesh.cells)
    except MeshError as exc:
        raise GenerationError(f"{what} produced an invalid mesh: {exc}") from exc


# ---------------------------------------------------------------------------
# Basic families
# ---------------------------------------------------------------------------


def cartesian(nx: int, ny: int) -> PolyMesh:
    """Uniform nx-by-ny quadrilateral grid on the unit square."""
    if nx < 1 or ny < 1:
        raise GenerationError("cell counts must be >= 1")
    bank = _NodeBank()
    loops = []
    for j in range(ny):
        for i in range(nx):
            loops.append([
                bank(i / nx, j / ny),
                bank((i + 1) / nx, j / ny),
                bank((i + 1) / nx, (j + 1) / ny),
                bank(i / nx, (j + 1) / ny),
            ])
    return build_mesh(bank.array(), loops)


def triangular(nx: int, ny: int) -> PolyMesh:
    """Cartesian grid split into two triangles per quad with alternating
    diagonals (avoids a systematic skewed-angle pattern)."""
    if nx < 1 or ny < 1:
        raise GenerationError("cell counts must be >= 1")
    bank = _NodeBank()
    loops = []
    for j in range(ny):
        for i in range(nx):
            n00 = bank(i / nx, j / ny)
            n10 = bank((i + 1) / nx, j / ny)
            n11 = bank((i + 1) / nx, (j + 1) / ny)
            n01 = bank(i / nx, (j + 1) / ny)
            if (i + j) % 2 == 0:
                loops.append([n00, n10, n11])
                loops.append([n00, n11, n01])
            else:
                loops.append([n00, n10, n01])
                loops.append([n10, n11, n01])
    return build_mesh(bank.array(), loops)


def hexagonal(nx: int, ny: int) -> PolyMesh:
    """Honeycomb tessellation of the unit square.

    Rows of hexagons are built brick-wall style: horizontal wall nodes zigzag
    vertically by a quarter row height, every interior node has exactly three
    incident faces, and boundary rows degenerate to pentagons and quads so the
    outer boundary stays on the unit square.
    """
    if nx < 1 or ny < 2:
        raise GenerationError("hexagonal grids need nx >= 1 and ny >= 2")
    h = 1.0 / ny
    delta = 0.25 * h

    bank = _NodeBank()

    def wall_node(k, j):
        x = k / (2 * nx)
        y = j / ny
        if 0 < j < ny and 0 < k < 2 * nx:
            y = y + (delta if (k + j) % 2 == 0 else -delta)
        return bank(x, y)

    loops = []
    for j in range(ny):
        offset = j % 2
        if offset:
            loops.append([
                wall_node(0, j), wall_node(1, j),
                wall_node(1, j + 1), wall_node(0, j + 1),
            ])
        first = offset
        for a in range(first, 2 * nx - 1, 2):
            loop = [wall_node(a, j)]
            if j > 0:
                loop.append(wall_node(a + 1, j))
            loop.append(wall_node(a + 2, j))
            loop.append(wall_node(a + 2, j + 1))
            if j + 1 < ny:
                loop.append(wall_node(a + 1, j + 1))
            loop.append(wall_node(a, j + 1))
            loops.append(loop)
        if offset:
            loops.append([
                wall_node(2 * nx - 1, j), wall_node(2 * nx, j),
                wall_node(2 * nx, j + 1), wall_node(2 * nx - 1, j + 1),
            ])
    return build_mesh(bank.array(), loops)


# ---------------------------------------------------------------------------
# Deformations
# ---------------------------------------------------------------------------


def twist(mesh: PolyMesh) -> PolyMesh:
    """Deform interior nodes by the fixed smooth map
    (x, y) -> (x, y) + 0.05 sin(3 pi x) sin(3 pi y) (1, 1).

    Nodes on the bounding box are pinned explicitly, so the outer boundary is
    invariant regardless of floating-point residue in the sine factors.
    """
    lo, hi = mesh.bounding_box()
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    on_boundary = (
        (np.abs(x - lo[0]) < 1e-9)
        | (np.abs(x - hi[0]) < 1e-9)
        | (np.abs(y - lo[1]) < 1e-9)
        | (np.abs(y - hi[1]) < 1e-9)
    )
    d = TWIST_AMPLITUDE * np.sin(TWIST_FREQUENCY * x) * np.sin(TWIST_FREQUENCY * y)
    d = np.where(on_boundary, 0.0, d)
    return _rebuild(mesh, mesh.nodes + d[:, None], "twist")


def perturb(mesh: PolyMesh, amplitude: float, seed: int) -> PolyMesh:
    """Move each interior node by a uniform random vector in
    [-a h, a h]^2 where h is the node's minimum incident edge length.

    Deterministic for a given seed.  Raises GenerationError when the
    perturbation inverts a cell (choose a smaller amplitude).
    """
    if not 0.0 <= amplitude < 0.5:
        raise GenerationError("perturbation amplitude must lie in [0, 0.5)")
    h = np.full(mesh.num_nodes, np.inf)
    for f in range(mesh.num_faces):
        a, b = mesh.face_nodes[f]
        length = mesh.face_area[f]
        h[a] = min(h[a], length)
        h[b] = min(h[b], length)
    rng = np.random.default_rng(seed)
    step = rng.uniform(-1.0, 1.0, size=(mesh.num_nodes, 2))
    step[mesh.boundary_nodes] = 0.0
    try:
        return _rebuild(mesh, mesh.nodes + amplitude * h[:, None] * step, "perturb")
    except GenerationError as exc:
        raise GenerationError(f"{exc}; try a smaller amplitude") from exc


def stretched(mesh: PolyMesh, aspect_ratio: float) -> PolyMesh:
    """Scale x-coordinates by the given factor (>= 1)."""
    if aspect_ratio < 1.0:
        raise GenerationError("aspect ratio must be >= 1")
    new_nodes = mesh.nodes.copy()
    new_nodes[:, 0] *= aspect_ratio
    return _rebuild(mesh, new_nodes, "stretch")


# ---------------------------------------------------------------------------
# Refinement-mismatch families
# ---------------------------------------------------------------------------


def two_region(nx: int, ny: int, refinement: int, mode: str = "both") -> PolyMesh:
    """Coarse nx-by-ny region on the left half, refined region on the right.

    mode 'both' refines the right half in x and y; 'y-only' refines only
    vertically.  The vertical interface carries hanging nodes: every coarse
    cell at the interface lists the fine-side subdivision points in its loop.
    """
    if refinement < 1:
        raise GenerationError("refinement factor must be >= 1")
    if mode not in ("both", "y-only"):
        raise GenerationError(f"unknown two-region mode {mode!r}")
    r = refinement
    rx = r * nx if mode == "both" else nx
    ry = r * ny

    bank = _NodeBank()

    def left_x(i):
        return 0.5 * i / nx

    def right_x(i):
        return 0.5 + 0.5 * i / rx

    def coarse_y(j):
        return j / ny

    def fine_y(m):
        return m / ry

    loops = []
    for j in range(ny):
        for i in range(nx):
            loop = [
                bank(left_x(i), coarse_y(j)),
                bank(left_x(i + 1), coarse_y(j)),
            ]
            if i == nx - 1:
                # interface column: walk up through the fine-side nodes
                for m in range(j * r + 1, (j + 1) * r):
                    loop.append(bank(0.5, fine_y(m)))
            loop.append(bank(left_x(i + 1), coarse_y(j + 1)))
            loop.append(bank(left_x(i), coarse_y(j + 1)))
            loops.append(loop)
    for m in range(ry):
        for i in range(rx):
            loops.append([
                bank(right_x(i), fine_y(m)),
                bank(right_x(i + 1), fine_y(m)),
                bank(right_x(i + 1), fine_y(m + 1)),
                bank(right_x(i), fine_y(m + 1)),
            ])
    return build_mesh(bank.array(), loops)


def layer(nx: int, ny: int, width_factor: float, layer_refinement: int = 1,
          twist_grid: bool = False) -> PolyMesh:
    """Cartesian grid whose middle column is replaced by a thin layer.

    The layer keeps the column's center line, its width shrinks by
    width_factor, and the two neighbouring columns absorb the difference so
    the domain stays the unit square.  Inside the layer the vertical
    resolution may be refined, producing hanging nodes on both layer walls.
    """
    if nx < 3:
        raise GenerationError("layer grids need nx >= 3")
    if width_factor < 1.0:
        raise GenerationError("width factor must be >= 1")
    if layer_refinement < 1:
        raise GenerationError("layer refinement must be >= 1")
    c = nx // 2
    bounds = [i / nx for i in range(nx + 1)]
    if width_factor > 1.0:
        center = (c + 0.5) / nx
        w = 1.0 / (nx * width_factor)
        bounds[c] = center - 0.5 * w
        bounds[c + 1] = center + 0.5 * w

    lr = layer_refinement
    ry = lr * ny
    bank = _NodeBank()

    def coarse_y(j):
        return j / ny

    def fine_y(m):
        return m / ry

    loops = []
    for j in range(ny):
        for i in range(nx):
            if i == c:
                continue
            loop = [bank(bounds[i], coarse_y(j)), bank(bounds[i + 1], coarse_y(j))]
            if i == c - 1:
                for m in range(j * lr + 1, (j + 1) * lr):
                    loop.append(bank(bounds[c], fine_y(m)))
            loop.append(bank(bounds[i + 1], coarse_y(j + 1)))
            loop.append(bank(bounds[i], coarse_y(j + 1)))
            if i == c + 1:
                for m in range((j + 1) * lr - 1, j * lr, -1):
                    loop.append(bank(bounds[c + 1], fine_y(m)))
            loops.append(loop)
    for m in range(ry):
        loops.append([
            bank(bounds[c], fine_y(m)),
            bank(bounds[c + 1], fine_y(m)),
            bank(bounds[c + 1], fine_y(m + 1)),
            bank(bounds[c], fine_y(m + 1)),
        ])
    mesh = build_mesh(bank.array(), loops)
    if twist_grid:
        mesh = twist(mesh)
    return mesh


def interface_extra_nodes(nx: int, ny: int, n_extra: int) -> PolyMesh:
    """Cartesian grid with n_extra equally spaced collinear nodes inserted on
    every face along the vertical midline, on both sides (conforming)."""
    if nx % 2 != 0:
        raise GenerationError("interface-node grids need an even nx")
    if n_extra < 0:
        raise GenerationError("extra node count must be >= 0")
    k = n_extra
    c = nx // 2
    bank = _NodeBank()

    def node_x(i):
        return i / nx

    def mid_y(j, m):
        return (j * (k + 1) + m) / (ny * (k + 1))

    loops = []
    for j in range(ny):
        for i in range(nx):
            loop = [bank(node_x(i), j / ny), bank(node_x(i + 1), j / ny)]
            if i == c - 1:
                for m in range(1, k + 1):
                    loop.append(bank(node_x(c), mid_y(j, m)))
            loop.append(bank(node_x(i + 1), (j + 1) / ny))
            loop.append(bank(node_x(i), (j + 1) / ny))
            if i == c:
                for m in range(k, 0, -1):
                    loop.append(bank(node_x(c), mid_y(j, m)))
            loops.append(loop)
    return build_mesh(bank.array(), loops)


def mixed_demo() -> PolyMesh:
    """Fixed composite mesh: triangles on the left third, quadrilaterals in the
    middle, hexagons on the right, stitched conformally and then twisted."""
    ntx, nqx, nhx = 4, 4, 3
    ny = 6
    x1 = 1.0 / 3.0
    x2 = 2.0 / 3.0

    bank = _NodeBank()
    loops = []

    def tri_x(i):
        return x1 * i / ntx

    def quad_x(i):
        return x1 + x1 * i / nqx

    def yy(j):
        return j / ny

    for j in range(ny):
        for i in range(ntx):
            n00 = bank(tri_x(i), yy(j))
            n10 = bank(tri_x(i + 1), yy(j))
            n11 = bank(tri_x(i + 1), yy(j + 1))
            n01 = bank(tri_x(i), yy(j + 1))
            if (i + j) % 2 == 0:
                loops.append([n00, n10, n11])
                loops.append([n00, n11, n01])
            else:
                loops.append([n00, n10, n01])
                loops.append([n10, n11, n01])
    for j in range(ny):
        for i in range(nqx):
            loops.append([
                bank(quad_x(i), yy(j)),
                bank(quad_x(i + 1), yy(j)),
                bank(quad_x(i + 1), yy(j + 1)),
                bank(quad_x(i), yy(j + 1)),
            ])

    h = 1.0 / ny
    delta = 0.25 * h

    def hex_node(kk, j):
        x = x2 + x1 * kk / (2 * nhx)
        y = yy(j)
        if 0 < j < ny and 0 < kk < 2 * nhx:
            y = y + (delta if (kk + j) % 2 == 0 else -delta)
        return bank(x, y)

    for j in range(ny):
        offset = j % 2
        if offset:
            loops.append([
                hex_node(0, j), hex_node(1, j),
                hex_node(1, j + 1), hex_node(0, j + 1),
            ])
        for a in range(offset, 2 * nhx - 1, 2):
            loop = [hex_node(a, j)]
            if j > 0:
                loop.append(hex_node(a + 1, j))
            loop.append(hex_node(a + 2, j))
            loop.append(hex_node(a + 2, j + 1))
            if j + 1 < ny:
                loop.append(hex_node(a + 1, j + 1))
            loop.append(hex_node(a, j + 1))
            loops.append(loop)
        if offset:
            loops.append([
                hex_node(2 * nhx - 1, j), hex_node(2 * nhx, j),
                hex_node(2 * nhx, j + 1), hex_node(2 * nhx - 1, j + 1),
            ])
    return twist(build_mesh(bank.array(), loops))


# ---------------------------------------------------------------------------
# GridSpec: serializable description of a generated grid
# ---------------------------------------------------------------------------

FAMILIES = (
    "cartesian", "triangular", "hexagonal", "mixed",
    "two-region", "layer", "interface-nodes",
)


@dataclass(frozen=True)
class GridSpec:
    family: str = "cartesian"
    nx: int = 4
    ny: int = 4
    twist: bool = False
    perturb_amplitude: float = 0.0
    aspect_ratio: float = 1.0
    refinement_factor: int = 1
    refine_mode: str = "both"
    layer_width_factor: float = 1.0
    extra_interface_nodes: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GenerationError(f"unknown grid family {self.family!r}")
        if self.nx < 1 or self.ny < 1:
            raise GenerationError("cell counts must be >= 1")
        if not 0.0 <= self.perturb_amplitude < 0.5:
            raise GenerationError("perturbation amplitude must lie in [0, 0.5)")
        if self.aspect_ratio < 1.0:
            raise GenerationError("aspect ratio must be >= 1")
        if self.refinement_factor < 1:
            raise GenerationError("refinement factor must be >= 1")
        if self.layer_width_factor < 1.0:
            raise GenerationError("layer width factor must be >= 1")
        if self.extra_interface_nodes < 0:
            raise GenerationError("extra interface node count must be >= 0")

    def header(self) -> str:
        return " ".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))


def generate(spec: GridSpec) -> PolyMesh:
    """Build the mesh described by a GridSpec: base family first, then twist,
    random perturbation and stretching in that order."""
    if spec.family == "cartesian":
        mesh = cartesian(spec.nx, spec.ny)
    elif spec.family == "triangular":
        mesh = triangular(spec.nx, spec.ny)
    elif spec.family == "hexagonal":
        mesh = hexagonal(spec.nx, spec.ny)
    elif spec.family == "mixed":
        mesh = mixed_demo()
    elif spec.family == "two-region":
        mesh = two_region(spec.nx, spec.ny, spec.refinement_factor, spec.refine_mode)
    elif spec.family == "layer":
        mesh = layer(spec.nx, spec.ny, spec.layer_width_factor, spec.refinement_factor)
    else:
        mesh = interface_extra_nodes(spec.nx, spec.ny, spec.extra_interface_nodes)
    if spec.twist:
        mesh = twist(mesh)
    if spec.perturb_amplitude > 0.0:
        mesh = perturb(mesh, spec.perturb_amplitude, spec.rng_seed)
    if spec.aspect_ratio > 1.0:
        mesh = stretched(mesh, spec.aspect_ratio)
    return mesh
