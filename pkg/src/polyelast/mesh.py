"""Immutable 2D polygonal meshes with the topology and geometry used by both
discretizations.

A mesh is a set of nodes, straight faces (edges) and simple counter-clockwise
polygonal cells.  Hanging nodes are represented as distinct collinear faces:
a geometric segment split on one side only becomes several faces, every one of
which carries its own adjacency.  Face normals point from the first adjacent
cell to the second (outward on the boundary).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError

# Absolute tolerance for recognizing nodes on the axis-aligned domain boundary.
BOUNDARY_TOL = 1e-9

# Two-point Gauss abscissas on [0, 1].
_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def polygon_area(coords):
    """Signed shoelace area of a closed polygon given as an (n, 2) array."""
    x = coords[:, 0]
    y = coords[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(coords):
    """Area centroid of a simple polygon (n, 2). Falls back to the vertex mean
    for (near-)zero area, which callers reject separately."""
    x = coords[:, 0]
    y = coords[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-300:
        return coords.mean(axis=0)
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def _segments_intersect(p0, p1, q0, q1):
    """Proper or touching intersection test for two closed segments."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    if d1 == 0 and on_segment(q0, q1, p0):
        return True
    if d2 == 0 and on_segment(q0, q1, p1):
        return True
    if d3 == 0 and on_segment(p0, p1, q0):
        return True
    if d4 == 0 and on_segment(p0, p1, q1):
        return True
    return False


def _check_simple(coords, cell_id):
    """Reject self-intersecting polygons (non-adjacent edge pairs must not meet)."""
    n = len(coords)
    for i in range(n):
        a0 = coords[i]
        a1 = coords[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a0, a1, coords[j], coords[(j + 1) % n]):
                raise MeshError(f"cell {cell_id} is not a simple polygon")


class PolyMesh:
    """Immutable polygonal mesh.

    Arrays (all read-only):
      nodes          (N, 2) node coordinates
      face_nodes     (F, 2) ordered node pair per face
      face_cells     (F, 2) adjacent cell ids; second is -1 on the boundary
      face_area      (F,)   edge length
      face_normal    (F, 2) unit normal pointing from face_cells[f,0] to [f,1]
      face_centroid  (F, 2)
      cell_volume    (C,)   polygon area
      cell_centroid  (C, 2) area centroid
      boundary_tags  (F,)   '' for interior, else left/right/bottom/top/boundary

    Per-cell sequences:
      cells          node loop (counter-clockwise) per cell
      cell_faces     face ids per cell, in loop order
      cell_face_sign +1 where the stored face normal is outward for the cell
    """

    def __init__(self, nodes, cells, face_nodes, face_cells, cell_faces, cell_face_sign):
        self.nodes = np.asarray(nodes, dtype=float)
        self.cells = [np.asarray(c, dtype=int) for c in cells]
        self.face_nodes = np.asarray(face_nodes, dtype=int)
        self.face_cells = np.asarray(face_cells, dtype=int)
        self.cell_faces = [np.asarray(f, dtype=int) for f in cell_faces]
        self.cell_face_sign = [np.asarray(s, dtype=int) for s in cell_face_sign]

        a = self.nodes[self.face_nodes[:, 0]]
        b = self.nodes[self.face_nodes[:, 1]]
        d = b - a
        self.face_area = np.hypot(d[:, 0], d[:, 1])
        if np.any(self.face_area <= 0.0):
            raise MeshError("zero-length face")
        t = d / self.face_area[:, None]
        # Rotate the edge direction by -90 deg: outward for a CCW traversal.
        self.face_normal = np.column_stack([t[:, 1], -t[:, 0]])
        self.face_centroid = 0.5 * (a + b)

        self.cell_volume = np.array([polygon_area(self.nodes[c]) for c in self.cells])
        self.cell_centroid = np.array(
            [polygon_centroid(self.nodes[c]) for c in self.cells]
        )

        self.boundary_tags = self._tag_boundary()
        self._node_cells = None
        self._check_geometry()

        for arr in (self.nodes, self.face_nodes, self.face_cells, self.face_area,
                    self.face_normal, self.face_centroid, self.cell_volume,
                    self.cell_centroid):
            arr.setflags(write=False)

    # -- basic queries ------------------------------------------------------

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_faces(self):
        return len(self.face_nodes)

    @property
    def num_cells(self):
        return len(self.cells)

    def is_boundary_face(self, f):
        return self.face_cells[f, 1] < 0

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @property
    def boundary_nodes(self):
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[self.face_nodes[self.boundary_faces].ravel()] = True
        return np.flatnonzero(mask)

    def node_cells(self, n):
        """Ids of cells whose polygon contains node n as a vertex."""
        if self._node_cells is None:
            nc = [[] for _ in range(self.num_nodes)]
            for k, loop in enumerate(self.cells):
                for v in loop:
                    nc[v].append(k)
            self._node_cells = [np.array(c, dtype=int) for c in nc]
        return self._node_cells[n]

    def outward_normal(self, k, f):
        """Unit normal of face f pointing out of cell k."""
        sign = 1.0 if self.face_cells[f, 0] == k else -1.0
        return sign * self.face_normal[f]

    def cell_diameter(self, k):
        """Max pairwise node distance of cell k."""
        pts = self.nodes[self.cells[k]]
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=2)).max())

    def max_diameter(self):
        return max(self.cell_diameter(k) for k in range(self.num_cells))

    def bounding_box(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    # -- construction helpers -------------------------------------------------

    def _tag_boundary(self):
        lo, hi = self.nodes.min(axis=0), self.nodes.max(axis=0)
        tags = np.empty(self.num_faces, dtype=object)
        tags[:] = ""
        for f in np.flatnonzero(self.face_cells[:, 1] < 0):
            a, b = self.nodes[self.face_nodes[f]]
            if abs(a[0] - lo[0]) < BOUNDARY_TOL and abs(b[0] - lo[0]) < BOUNDARY_TOL:
                tags[f] = "left"
            elif abs(a[0] - hi[0]) < BOUNDARY_TOL and abs(b[0] - hi[0]) < BOUNDARY_TOL:
                tags[f] = "right"
            elif abs(a[1] - lo[1]) < BOUNDARY_TOL and abs(b[1] - lo[1]) < BOUNDARY_TOL:
                tags[f] = "bottom"
            elif abs(a[1] - hi[1]) < BOUNDARY_TOL and abs(b[1] - hi[1]) < BOUNDARY_TOL:
                tags[f] = "top"
            else:
                tags[f] = "boundary"
        return tags

    def _check_geometry(self):
        for k in range(self.num_cells):
            if self.cell_volume[k] <= 0.0:
                raise MeshError(f"cell {k} has non-positive area {self.cell_volume[k]!r}")
            fids = self.cell_faces[k]
            per = float(self.face_area[fids].sum())
            resid = np.zeros(2)
            for f, s in zip(fids, self.cell_face_sign[k]):
                resid += self.face_area[f] * s * self.face_normal[f]
            if np.abs(resid).max() > 1e-12 * per:
                raise MeshError(f"cell {k} boundary does not close (residual {resid})")


def build_mesh(nodes, cell_node_loops) -> PolyMesh:
    """Build a PolyMesh from node coordinates and counter-clockwise node loops.

    Faces are deduplicated by node pair; each may be shared by at most two
    cells.  Raises MeshError for degenerate or non-CCW cells, repeated nodes
    within a loop, self-intersecting polygons and non-manifold faces.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshError("nodes must be an (N, 2) array")

    loops = []
    for k, loop in enumerate(cell_node_loops):
        loop = np.asarray(loop, dtype=int)
        if len(loop) < 3:
            raise MeshError(f"cell {k} has fewer than 3 nodes")
        if loop.min() < 0 or loop.max() >= len(nodes):
            raise MeshError(f"cell {k} references an unknown node")
        if len(set(loop.tolist())) != len(loop):
            raise MeshError(f"cell {k} repeats a node in its loop")
        coords = nodes[loop]
        area = polygon_area(coords)
        if area <= 1e-14:
            raise MeshError(
                f"cell {k} is degenerate or not counter-clockwise (area {area!r})"
            )
        _check_simple(coords, k)
        loops.append(loop)

    face_index = {}
    face_nodes = []
    face_cells = []
    cell_faces = []
    cell_face_sign = []
    for k, loop in enumerate(loops):
        fids = []
        signs = []
        n = len(loop)
        for i in range(n):
            a, b = int(loop[i]), int(loop[(i + 1) % n])
            key = (a, b) if a < b else (b, a)
            if key not in face_index:
                face_index[key] = len(face_nodes)
                face_nodes.append((a, b))
                face_cells.append([k, -1])
                sign = 1
            else:
                f = face_index[key]
                if face_cells[f][1] >= 0:
                    raise MeshError(
                        f"face {key} adjacent to more than two cells "
                        f"({face_cells[f][0]}, {face_cells[f][1]}, {k})"
                    )
                if face_nodes[f] == (a, b):
                    raise MeshError(
                        f"face {key} traversed twice in the same direction "
                        f"(cells {face_cells[f][0]} and {k} overlap)"
                    )
                face_cells[f][1] = k
                # Stored orientation belongs to the first cell; a conforming
                # neighbour traverses the edge the opposite way.
                sign = -1
            fids.append(face_index[key])
            signs.append(sign)
        cell_faces.append(fids)
        cell_face_sign.append(signs)

    return PolyMesh(nodes, loops, face_nodes, face_cells, cell_faces, cell_face_sign)


def cell_diameter(mesh: PolyMesh, k: int) -> float:
    return mesh.cell_diameter(k)


# ---------------------------------------------------------------------------
# Interaction regions (one per mesh vertex)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubFace:
    """Half of a face adjacent to a region vertex, seen from one cell.

    measure is half the edge length; midpoint is the Gauss average of the two
    quadrature points (the continuity point of the local stress problem).
    """

    cell: int
    face: int
    measure: float
    midpoint: np.ndarray
    qpoints: np.ndarray  # (2, 2) two Gauss points on the sub-face segment
    weights: tuple = (0.5, 0.5)


@dataclass(frozen=True)
class InteractionRegion:
    vertex: int
    cells: np.ndarray
    subfaces: tuple
    boundary: bool


def interaction_regions(mesh: PolyMesh):
    """One region per node: all cells sharing the vertex plus their sub-faces.

    Each sub-face runs from the vertex to the midpoint of an incident face and
    carries two Gauss quadrature points with equal weights.  Interior faces
    contribute one sub-face per adjacent cell.
    """
    face_of = [dict() for _ in range(mesh.num_cells)]
    for k in range(mesh.num_cells):
        loop = mesh.cells[k]
        for i, f in enumerate(mesh.cell_faces[k]):
            a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
            face_of[k][(a, b)] = f

    boundary_nodes = set(mesh.boundary_nodes.tolist())
    regions = []
    for s in range(mesh.num_nodes):
        cells = mesh.node_cells(s)
        subfaces = []
        for k in cells:
            loop = mesh.cells[k].tolist()
            i = loop.index(s)
            n = len(loop)
            prev_edge = (loop[i - 1], loop[i])
            next_edge = (loop[i], loop[(i + 1) % n])
            for edge in (prev_edge, next_edge):
                f = face_of[k][edge]
                subfaces.append(_make_subface(mesh, k, f, s))
        subfaces.sort(key=lambda sf: (sf.cell, sf.face))
        regions.append(
            InteractionRegion(
                vertex=s,
                cells=np.array(sorted(int(k) for k in cells)),
                subfaces=tuple(subfaces),
                boundary=s in boundary_nodes,
            )
        )
    return regions


def _make_subface(mesh, k, f, s):
    xs = mesh.nodes[s]
    xm = mesh.face_centroid[f]
    q = np.array([xs + g * (xm - xs) for g in _GAUSS2])
    return SubFace(
        cell=int(k),
        face=int(f),
        measure=0.5 * float(mesh.face_area[f]),
        midpoint=0.5 * (xs + xm),
        qpoints=q,
    )


# ---------------------------------------------------------------------------
# polymesh2d text format
# ---------------------------------------------------------------------------


def write_polymesh(mesh: PolyMesh, path, metadata=None):
    """Write the line-oriented polymesh2d format.

    Coordinates use 17 significant digits so that write -> read -> write
    round-trips bit-exactly.  Lines starting with '#' after the header carry
    reproducibility metadata and are skipped by the reader.
    """
    lines = ["polymesh2d 1"]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(f"nodes {mesh.num_nodes}")
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"cells {mesh.num_cells}")
    for loop in mesh.cells:
        lines.append(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


def read_polymesh(path) -> PolyMesh:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "polymesh2d 1":
        raise MeshError(f"{path}: not a polymesh2d version-1 file")
    pos = 1
    head, count = lines[pos].split()
    if head != "nodes":
        raise MeshError(f"{path}: expected 'nodes N'")
    n = int(count)
    pos += 1
    nodes = np.array(
        [[float(v) for v in lines[pos + i].split()] for i in range(n)]
    )
    pos += n
    head, count = lines[pos].split()
    if head != "cells":
        raise MeshError(f"{path}: expected 'cells M'")
    m = int(count)
    pos += 1
    loops = []
    for i in range(m):
        parts = [int(v) for v in lines[pos + i].split()]
        if parts[0] != len(parts) - 1:
            raise MeshError(f"{path}: bad cell line {i}")
        loops.append(parts[1:])
    return build_mesh(nodes, loops)
