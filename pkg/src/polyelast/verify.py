"""Manufactured solutions, discrete error norms, convergence studies and the
drivers for the numbered experiment cases.

Norm conventions: displacement errors are sampled at nodes (virtual element)
or cell centers (finite volume); nodal L2 norms use tributary weights (each
cell spreads its volume equally over its nodes), cell norms use volumes.
Divergence errors live on cells for both methods.  Stress errors are
volume-weighted cell errors for the virtual element method and length-weighted
face-traction errors for the finite volume method; the two conventions are
tagged and never compared against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bc as bcs
from . import meshgen, mpsa, vem
from .errors import AssemblyError, LocalSolveError, SolverError
from .material import MaterialField, from_poisson
from .mesh import PolyMesh

TWO_PI = 2.0 * math.pi

METHODS = {
    "vem": ("vem", "standard"),
    "vem-relax": ("vem", "relax"),
    "vem-relax-extra": ("vem", "relax-extra"),
    "mpsa": ("mpsa", "standard"),
    "mpsa-relax-extra": ("mpsa", "relax-extra"),
}

CASE_IDS = ("1", "2a", "2b", "2c", "3", "4a", "4b", "4c",
            "5a", "5b", "5c", "6a", "6b", "6c")


# ---------------------------------------------------------------------------
# Manufactured solution
# ---------------------------------------------------------------------------


class ManufacturedSolution:
    """Closed-form displacement field and the body force that makes it an
    exact solution of div(sigma) = f with zero boundary displacement.

    On a [0, lx] x [0, ly] domain the unit-square field is composed with the
    inverse stretch, which keeps the zero trace on all sides.
    """

    def __init__(self, mu: float, lam: float, lx: float = 1.0, ly: float = 1.0):
        self.mu = float(mu)
        self.lam = float(lam)
        self.lx = float(lx)
        self.ly = float(ly)
        self._validated = False

    # reference-square partials, chain-ruled to the physical domain
    def _parts(self, x):
        sx = x[0] / self.lx
        sy = x[1] / self.ly
        s2x, c2x = math.sin(TWO_PI * sx), math.cos(TWO_PI * sx)
        s2y, c2y = math.sin(TWO_PI * sy), math.cos(TWO_PI * sy)
        u1 = sx * (1.0 - sx) * s2y
        u2 = s2x * s2y
        d = {
            "u1": u1, "u2": u2,
            "u1_x": (1.0 - 2.0 * sx) * s2y / self.lx,
            "u1_y": TWO_PI * sx * (1.0 - sx) * c2y / self.ly,
            "u2_x": TWO_PI * c2x * s2y / self.lx,
            "u2_y": TWO_PI * s2x * c2y / self.ly,
            "u1_xx": -2.0 * s2y / self.lx**2,
            "u1_yy": -(TWO_PI**2) * sx * (1.0 - sx) * s2y / self.ly**2,
            "u1_xy": TWO_PI * (1.0 - 2.0 * sx) * c2y / (self.lx * self.ly),
            "u2_xx": -(TWO_PI**2) * s2x * s2y / self.lx**2,
            "u2_yy": -(TWO_PI**2) * s2x * s2y / self.ly**2,
            "u2_xy": TWO_PI * TWO_PI * c2x * c2y / (self.lx * self.ly),
        }
        return d

    def displacement(self, x):
        p = self._parts(x)
        return np.array([p["u1"], p["u2"]])

    def gradient(self, x):
        p = self._parts(x)
        return np.array([[p["u1_x"], p["u1_y"]], [p["u2_x"], p["u2_y"]]])

    def divergence(self, x):
        p = self._parts(x)
        return p["u1_x"] + p["u2_y"]

    def stress_voigt(self, x):
        """[s11, s22, s12] of sigma = 2 mu eps + lam tr(eps) I."""
        p = self._parts(x)
        mu, lam = self.mu, self.lam
        return np.array([
            (2.0 * mu + lam) * p["u1_x"] + lam * p["u2_y"],
            (2.0 * mu + lam) * p["u2_y"] + lam * p["u1_x"],
            mu * (p["u1_y"] + p["u2_x"]),
        ])

    def traction(self, x, normal):
        s = self.stress_voigt(x)
        return np.array([
            s[0] * normal[0] + s[2] * normal[1],
            s[2] * normal[0] + s[1] * normal[1],
        ])

    def body_force(self, x):
        """f = div(sigma), written out from the second derivatives."""
        p = self._parts(x)
        mu, lam = self.mu, self.lam
        f1 = (2.0 * mu + lam) * p["u1_xx"] + mu * p["u1_yy"] + (mu + lam) * p["u2_xy"]
        f2 = (2.0 * mu + lam) * p["u2_yy"] + mu * p["u2_xx"] + (mu + lam) * p["u1_xy"]
        return np.array([f1, f2])

    def validate(self, npoints: int = 100, h: float = 1e-5, tol: float = 1e-6,
                 seed: int = 20) -> float:
        """Check the closed-form body force against central differences of the
        stress at random interior points.  Must pass before solver runs."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(npoints):
            x = rng.uniform(0.1, 0.9, 2) * np.array([self.lx, self.ly])
            fd = np.zeros(2)
            for j in range(2):
                step = np.zeros(2)
                step[j] = h
                sp = self.stress_voigt(x + step)
                sm = self.stress_voigt(x - step)
                dcol = (sp - sm) / (2.0 * h)
                # column j of div(sigma): d sigma_ij / d x_j
                if j == 0:
                    fd += np.array([dcol[0], dcol[2]])
                else:
                    fd += np.array([dcol[2], dcol[1]])
            worst = max(worst, float(np.abs(fd - self.body_force(x)).max()))
        if worst > tol:
            raise AssemblyError(
                f"manufactured force disagrees with finite differences by {worst:.3e}"
            )
        self._validated = True
        return worst


class LinearField:
    """Affine displacement u(x) = B x + c; exact solution with zero body force."""

    def __init__(self, b, c, mu: float, lam: float):
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.mu = float(mu)
        self.lam = float(lam)

    def displacement(self, x):
        return self.b @ np.asarray(x) + self.c

    def gradient(self, x):
        return self.b

    def divergence(self, x):
        return float(np.trace(self.b))

    def stress_voigt(self, x):
        eps = 0.5 * (self.b + self.b.T)
        mu, lam = self.mu, self.lam
        tr = np.trace(eps)
        return np.array([
            2.0 * mu * eps[0, 0] + lam * tr,
            2.0 * mu * eps[1, 1] + lam * tr,
            2.0 * mu * eps[0, 1],
        ])

    def traction(self, x, normal):
        s = self.stress_voigt(x)
        return np.array([
            s[0] * normal[0] + s[2] * normal[1],
            s[2] * normal[0] + s[1] * normal[1],
        ])

    def body_force(self, x):
        return np.zeros(2)


# ---------------------------------------------------------------------------
# Error norms
# ---------------------------------------------------------------------------


@dataclass
class ErrorReport:
    case: str
    method: str
    variant: str
    grid: str
    h: float
    dofs: int
    l2_u: float = math.nan
    linf_u: float = math.nan
    l2_div: float = math.nan
    linf_div: float = math.nan
    l2_stress: float = math.nan
    linf_stress: float = math.nan
    stress_convention: str = ""
    seed: int = 0
    status: str = "ok"

    CSV_FIELDS = ("case", "method", "variant", "grid", "h", "dofs", "l2_u",
                  "linf_u", "l2_div", "linf_div", "l2_stress", "linf_stress",
                  "stress_convention", "seed", "status")

    def csv_row(self):
        vals = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            vals.append(f"{v:.12g}" if isinstance(v, float) else str(v))
        return ",".join(vals)


def tributary_node_weights(mesh: PolyMesh) -> np.ndarray:
    """Each cell contributes |K|/n_K to every one of its n_K nodes; the
    weights sum to the mesh volume."""
    w = np.zeros(mesh.num_nodes)
    for k, loop in enumerate(mesh.cells):
        w[loop] += mesh.cell_volume[k] / len(loop)
    return w


def cell_quadrature(mesh: PolyMesh, k: int):
    """One-point-per-triangle quadrature on the centroid fan of a cell.

    Good enough for error norms; weights sum to the cell volume."""
    loop = mesh.cells[k]
    center = mesh.cell_centroid[k]
    pts = []
    wts = []
    coords = mesh.nodes[loop]
    for i in range(len(loop)):
        a = coords[i]
        b = coords[(i + 1) % len(loop)]
        area = 0.5 * ((a[0] - center[0]) * (b[1] - center[1])
                      - (b[0] - center[0]) * (a[1] - center[1]))
        pts.append((a + b + center) / 3.0)
        wts.append(area)
    return np.array(pts), np.array(wts)


def _piecewise_l2(mesh: PolyMesh, cell_values, func, metric=None) -> float:
    """True L2 distance between a piecewise-constant cell field and a smooth
    field: picks up the within-cell variation, which bounds the rate at one
    for cell-constant quantities.  metric weights the squared components
    (e.g. (1, 1, 2) turns a Voigt stress difference into its Frobenius norm)."""
    total = 0.0
    for k in range(mesh.num_cells):
        pts, wts = cell_quadrature(mesh, k)
        for x, w in zip(pts, wts):
            d = np.atleast_1d(cell_values[k] - func(x))
            sq = float(np.sum(metric * d * d)) if metric is not None else float(d @ d)
            total += w * sq
    return math.sqrt(max(total, 0.0))


def error_norms(mesh: PolyMesh, method: str, solution, exact,
                case: str = "", grid: str = "", seed: int = 0) -> ErrorReport:
    """Discrete errors of a solved case against an exact (or reference) field.

    method is 'vem' or 'mpsa'; solution must be the matching solution type.
    """
    if method == "vem":
        if not isinstance(solution, vem.VemSolution):
            raise TypeError("vem norms need a VemSolution")
        pts = mesh.nodes
        w = tributary_node_weights(mesh)
        u_h = solution.nodal
        convention = "vem-cellwise-stress"
    elif method == "mpsa":
        if not isinstance(solution, mpsa.MpsaSolution):
            raise TypeError("mpsa norms need an MpsaSolution")
        pts = mesh.cell_centroid
        w = mesh.cell_volume
        u_h = solution.cells
        convention = "mpsa-face-force"
    else:
        raise TypeError(f"unknown method {method!r}")

    diff = u_h - np.array([exact.displacement(x) for x in pts])
    mag = np.hypot(diff[:, 0], diff[:, 1])
    l2_u = float(np.sqrt(np.sum(w * mag**2)))
    linf_u = float(mag.max())

    div_exact = np.array([exact.divergence(x) for x in mesh.cell_centroid])
    ddiv = solution.divergence - div_exact
    l2_div = _piecewise_l2(mesh, solution.divergence, exact.divergence)
    linf_div = float(np.abs(ddiv).max())

    l2_s = linf_s = math.nan
    if getattr(exact, "stress_voigt", None) is not None:
        if method == "vem":
            s_exact = np.array([exact.stress_voigt(x) for x in mesh.cell_centroid])
            ds = solution.stress - s_exact
            frob = np.sqrt(ds[:, 0]**2 + ds[:, 1]**2 + 2.0 * ds[:, 2]**2)
            l2_s = _piecewise_l2(mesh, solution.stress, exact.stress_voigt,
                                 metric=np.array([1.0, 1.0, 2.0]))
            linf_s = float(frob.max())
        else:
            terr = np.empty(mesh.num_faces)
            for f in range(mesh.num_faces):
                t_exact = exact.traction(mesh.face_centroid[f], mesh.face_normal[f])
                t_h = solution.face_forces[f] / mesh.face_area[f]
                terr[f] = np.linalg.norm(t_h - t_exact)
            l2_s = float(np.sqrt(np.sum(mesh.face_area * terr**2)))
            linf_s = float(terr.max())

    report = ErrorReport(
        case=case, method=method, variant="", grid=grid,
        h=mesh.max_diameter(), dofs=solution.dofs,
        l2_u=l2_u, linf_u=linf_u, l2_div=l2_div, linf_div=linf_div,
        l2_stress=l2_s, linf_stress=linf_s,
        stress_convention=convention, seed=seed,
    )
    return report


# ---------------------------------------------------------------------------
# Reference field on a structured triangulation (no closed form available)
# ---------------------------------------------------------------------------


class TriangulatedField:
    """Piecewise-linear displacement on triangular(n, n), evaluated anywhere
    in the unit square by structured point location."""

    def __init__(self, n: int, mesh: PolyMesh, nodal: np.ndarray):
        self.n = n
        self.mesh = mesh
        self.nodal = nodal

    def _locate(self, x):
        n = self.n
        i = min(max(int(x[0] * n), 0), n - 1)
        j = min(max(int(x[1] * n), 0), n - 1)
        s = x[0] * n - i
        t = x[1] * n - j
        if (i + j) % 2 == 0:
            local = 0 if t <= s else 1
        else:
            local = 0 if s + t <= 1.0 else 1
        return 2 * (j * n + i) + local

    def _interp(self, x):
        k = self._locate(x)
        tri = self.mesh.cells[k]
        a, b, c = self.mesh.nodes[tri]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        w1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det
        w2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det
        w0 = 1.0 - w1 - w2
        return k, tri, np.array([w0, w1, w2])

    def displacement(self, x):
        _, tri, w = self._interp(x)
        return w @ self.nodal[tri]

    def divergence(self, x):
        k, tri, _ = self._interp(x)
        a, b, c = self.mesh.nodes[tri]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        grads = np.array([
            [b[1] - c[1], c[0] - b[0]],
            [c[1] - a[1], a[0] - c[0]],
            [a[1] - b[1], b[0] - a[0]],
        ]) / det
        vals = self.nodal[tri]
        return float(vals[:, 0] @ grads[:, 0] + vals[:, 1] @ grads[:, 1])

    stress_voigt = None


# ---------------------------------------------------------------------------
# Shared solve driver
# ---------------------------------------------------------------------------


def solve_method(mesh: PolyMesh, method_name: str, material: MaterialField,
                 body_force, boundary, fracture_faces=frozenset()):
    """Assemble and solve one method variant; returns (kind, solution)."""
    if method_name not in METHODS:
        raise KeyError(f"unknown method {method_name!r}")
    kind, variant = METHODS[method_name]
    if kind == "vem":
        if fracture_faces:
            raise AssemblyError("fracture decoupling applies to mpsa only")
        system = vem.assemble(mesh, material, body_force, boundary, variant=variant)
        return "vem", vem.solve(system)
    system = mpsa.assemble(mesh, material, body_force, boundary, variant=variant,
                           fracture_faces=fracture_faces)
    return "mpsa", mpsa.solve(system)


def _failed_report(case, method_name, grid, mesh, seed, reason):
    kind, variant = METHODS[method_name]
    return ErrorReport(
        case=case, method=kind, variant=variant, grid=grid,
        h=mesh.max_diameter() if mesh is not None else math.nan,
        dofs=0, seed=seed, status=f"failed:{reason}",
    )


def run_single(case, method_name, mesh, material, exact, boundary=None,
               grid="", seed=0) -> tuple[ErrorReport, object]:
    """Solve one (mesh, method) pair of a manufactured case and report errors.

    Numerical failures come back as status rows, not exceptions.
    """
    kind, variant = METHODS[method_name]
    boundary = boundary or bcs.dirichlet_all(mesh, displacement=exact.displacement)
    try:
        kind, solution = solve_method(mesh, method_name, material,
                                      exact.body_force, boundary)
    except LocalSolveError:
        return _failed_report(case, method_name, grid, mesh, seed, "local-rank"), None
    except (SolverError, AssemblyError):
        return _failed_report(case, method_name, grid, mesh, seed, "singular"), None
    report = error_norms(mesh, kind, solution, exact, case=case, grid=grid, seed=seed)
    report = replace(report, case=case, variant=variant, seed=seed)
    return report, solution


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------


@dataclass
class StudyResult:
    reports: list
    rate_u: float
    rate_div: float
    rate_stress: float


def fit_rate(hs, errors):
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    good = np.isfinite(errors) & (errors > 0.0)
    if good.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(hs[good]), np.log(errors[good]), 1)[0])


def convergence_study(method_name: str, levels, make_mesh, material_of,
                      exact_of, case: str = "study", seed: int = 0) -> StudyResult:
    """Run a refinement ladder and fit least-squares slopes of log error
    against log h.  Failures are recorded per level and skipped in the fit."""
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    reports = []
    for level in levels:
        mesh = make_mesh(level)
        material = material_of(mesh)
        exact = exact_of(mesh, material)
        report, _ = run_single(case, method_name, mesh, material, exact,
                               grid=f"level={level}", seed=seed)
        reports.append(report)
    hs = [r.h for r in reports]
    return StudyResult(
        reports=reports,
        rate_u=fit_rate(hs, [r.l2_u for r in reports]),
        rate_div=fit_rate(hs, [r.l2_div for r in reports]),
        rate_stress=fit_rate(hs, [r.l2_stress for r in reports]),
    )


# ---------------------------------------------------------------------------
# Interface force profiles (cases 4 and 5)
# ---------------------------------------------------------------------------


@dataclass
class ProfileRow:
    face: int
    arclength: float
    force: np.ndarray
    force_exact: np.ndarray


def interface_faces(mesh: PolyMesh, line_x: float, tol: float = 1e-9):
    """Interior faces lying on the vertical line x = line_x, sorted by height."""
    out = []
    for f in range(mesh.num_faces):
        if mesh.is_boundary_face(f):
            continue
        a, b = mesh.nodes[mesh.face_nodes[f]]
        if abs(a[0] - line_x) < tol and abs(b[0] - line_x) < tol:
            out.append(f)
    out.sort(key=lambda f: mesh.face_centroid[f][1])
    return out


def force_profile(mesh: PolyMesh, kind: str, solution, exact, line_x: float):
    """Per-face interface forces in the stored face-normal orientation.

    The finite volume method reports its face forces directly; the virtual
    element method integrates the fine-side (smaller adjacent cell) constant
    stress against the face normal.
    """
    rows = []
    for f in interface_faces(mesh, line_x):
        n = mesh.face_normal[f]
        area = mesh.face_area[f]
        if kind == "mpsa":
            force = solution.face_forces[f].copy()
        else:
            k0, k1 = mesh.face_cells[f]
            k = k0 if mesh.cell_volume[k0] <= mesh.cell_volume[k1] else k1
            s = solution.stress[k]
            force = area * np.array([
                s[0] * n[0] + s[2] * n[1],
                s[2] * n[0] + s[1] * n[1],
            ])
        f_exact = area * exact.traction(mesh.face_centroid[f], n)
        rows.append(ProfileRow(face=f, arclength=float(mesh.face_centroid[f][1]),
                               force=force, force_exact=f_exact))
    return rows


def divergence_profile(mesh: PolyMesh, solution, line_x: float):
    """Per-cell divergence for the cells adjacent to the interface."""
    cells = []
    for f in interface_faces(mesh, line_x):
        cells.extend(int(c) for c in mesh.face_cells[f] if c >= 0)
    cells = sorted(set(cells), key=lambda k: (mesh.cell_centroid[k][1],
                                              mesh.cell_centroid[k][0]))
    return [(k, float(mesh.cell_centroid[k][1]), float(solution.divergence[k]))
            for k in cells]


def total_variation(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.abs(np.diff(values)).sum())


# ---------------------------------------------------------------------------
# Case drivers
# ---------------------------------------------------------------------------

DEFAULT_NU = 0.3
LOCKING_NU = 0.495
GRAVITY = np.array([0.0, -1.0])


@dataclass
class CaseResult:
    case: str
    reports: list
    profiles: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def _methods_arg(method):
    if method in (None, "all"):
        return list(METHODS)
    if isinstance(method, str):
        if method not in METHODS:
            raise KeyError(f"unknown method {method!r}")
        return [method]
    return list(method)


def _manufactured(material, mesh):
    lo, hi = mesh.bounding_box()
    ex = ManufacturedSolution(float(material.mu[0]), float(material.lam[0]),
                              lx=float(hi[0] - lo[0]), ly=float(hi[1] - lo[1]))
    ex.validate()
    return ex


_REFERENCE_CACHE = {}

REFERENCE_LEVEL = 64  # four refinements of the default locking grids


def locking_reference(n: int = REFERENCE_LEVEL, nu: float = LOCKING_NU) -> TriangulatedField:
    """Overkill displacement field for the locking case: the face-enriched
    relaxed virtual element method on a fine conforming triangulation."""
    key = (n, nu)
    if key not in _REFERENCE_CACHE:
        mesh = meshgen.triangular(n, n)
        material = from_poisson(1.0, nu, mesh.num_cells)
        boundary = bcs.case_locking(mesh)
        system = vem.assemble(mesh, material, lambda x: GRAVITY, boundary,
                              variant="relax-extra")
        solution = vem.solve(system)
        _REFERENCE_CACHE[key] = TriangulatedField(n, mesh, solution.nodal)
    return _REFERENCE_CACHE[key]


def reference_self_consistency(n: int = REFERENCE_LEVEL, fine_n: int | None = None,
                               nu: float = LOCKING_NU) -> float:
    """Relative displacement L2 difference between two successive overkill
    levels, evaluated at the coarser level's nodes."""
    coarse = locking_reference(n, nu)
    fine = locking_reference(fine_n or (2 * n), nu)
    pts = coarse.mesh.nodes
    w = tributary_node_weights(coarse.mesh)
    uc = coarse.nodal
    uf = np.array([fine.displacement(x) for x in pts])
    diff = np.hypot(*(uc - uf).T)
    scale = np.hypot(*uf.T)
    num = math.sqrt(float(np.sum(w * diff**2)))
    den = math.sqrt(float(np.sum(w * scale**2)))
    return num / den


def run_case(case_id: str, method="all", seed: int = 0, level: int | None = None,
             parameter=None) -> CaseResult:
    """Drive one numbered experiment: build the grid(s), solve the requested
    method variants, and collect error reports plus case-specific extras.

    Cases 1-5 solve the manufactured problem with zero boundary displacement;
    case 6 solves the near-incompressible gravity problem against an overkill
    reference.
    """
    case_id = str(case_id)
    if case_id not in CASE_IDS:
        raise KeyError(f"unknown case {case_id!r}; choose from {CASE_IDS}")
    methods = _methods_arg(method)
    if case_id == "1":
        return _run_case1(methods, seed, level)
    if case_id in ("2a", "2b", "2c"):
        return _run_case2(case_id, methods, seed, level)
    if case_id == "3":
        return _run_case3(methods, seed, level, parameter)
    if case_id in ("4a", "4b", "4c"):
        return _run_case4(case_id, methods, seed, level, parameter)
    if case_id in ("5a", "5b", "5c"):
        return _run_case5(case_id, methods, seed, level, parameter)
    return _run_case6(case_id, methods, seed, level)


CASE1_AMPLITUDE = 0.1


def _case1_mesh(n, seed):
    spec = meshgen.GridSpec(family="cartesian", nx=n, ny=n, twist=True,
                            perturb_amplitude=CASE1_AMPLITUDE, rng_seed=seed)
    return meshgen.generate(spec), spec


def _run_case1(methods, seed, level):
    levels = [level] if level else [4, 8, 16, 32]
    reports = []
    for n in levels:
        mesh, spec = _case1_mesh(n, seed)
        material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
        exact = _manufactured(material, mesh)
        for m in methods:
            rep, _ = run_single("1", m, mesh, material, exact,
                                grid=spec.header(), seed=seed)
            reports.append(rep)
    return CaseResult(case="1", reports=reports)


def _run_case2(case_id, methods, seed, level):
    n = level or 6
    if case_id == "2a":
        mesh = meshgen.mixed_demo()
        grid = "family=mixed"
    elif case_id == "2b":
        mesh = meshgen.stretched(meshgen.hexagonal(n, n), 7.0)
        grid = f"family=hexagonal nx={n} ny={n} aspect_ratio=7"
    else:
        mesh = meshgen.stretched(meshgen.triangular(n, n), 7.0)
        grid = f"family=triangular nx={n} ny={n} aspect_ratio=7"
    material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
    exact = _manufactured(material, mesh)
    reports = []
    for m in methods:
        rep, _ = run_single(case_id, m, mesh, material, exact, grid=grid, seed=seed)
        reports.append(rep)
    return CaseResult(case=case_id, reports=reports)


def _run_case3(methods, seed, level, parameter):
    n = level or 8
    ratios = parameter or (1, 2, 5, 10)
    reports = []
    for r in ratios:
        mesh = meshgen.twist(meshgen.cartesian(n, n * int(r)))
        material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
        exact = _manufactured(material, mesh)
        for m in methods:
            rep, _ = run_single("3", m, mesh, material, exact,
                                grid=f"family=cartesian nx={n} ny={n * int(r)} twist=True",
                                seed=seed)
            reports.append(rep)
    return CaseResult(case="3", reports=reports)


def _run_case4(case_id, methods, seed, level, parameter):
    n = level or 4
    reports = []
    profiles = {}
    if case_id in ("4a", "4b"):
        mode = "both" if case_id == "4a" else "y-only"
        refinements = parameter or (1, 10)
        for r in refinements:
            mesh = meshgen.two_region(n, n, int(r), mode)
            material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
            exact = _manufactured(material, mesh)
            for m in methods:
                grid = f"family=two-region nx={n} ny={n} refinement={r} mode={mode}"
                rep, sol = run_single(case_id, m, mesh, material, exact,
                                      grid=grid, seed=seed)
                reports.append(rep)
                if sol is not None:
                    kind = METHODS[m][0]
                    profiles[(m, int(r))] = force_profile(mesh, kind, sol, exact, 0.5)
    else:
        if parameter:
            n_extra = int(parameter[0] if hasattr(parameter, "__len__") else parameter)
        else:
            n_extra = 20
        mesh = meshgen.interface_extra_nodes(2 * n, n, n_extra)
        material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
        exact = _manufactured(material, mesh)
        for m in methods:
            grid = f"family=interface-nodes nx={2 * n} ny={n} extra={n_extra}"
            rep, sol = run_single(case_id, m, mesh, material, exact,
                                  grid=grid, seed=seed)
            reports.append(rep)
            if sol is not None:
                profiles[(m, n_extra)] = force_profile(
                    mesh, METHODS[m][0], sol, exact, 0.5
                )
    return CaseResult(case=case_id, reports=reports, profiles=profiles)


def _run_case5(case_id, methods, seed, level, parameter):
    n = level or 8
    widths = parameter or (1, 5, 10, 20)
    refinement = 1 if case_id == "5a" else 4
    twist_grid = case_id == "5c"
    reports = []
    profiles = {}
    divprofiles = {}
    for w in widths:
        mesh = meshgen.layer(n, n, float(w), refinement, twist_grid)
        material = from_poisson(1.0, DEFAULT_NU, mesh.num_cells)
        exact = _manufactured(material, mesh)
        c = n // 2
        if float(w) > 1.0:
            line_x = (c + 0.5) / n - 0.5 / (n * float(w))
        else:
            line_x = c / n
        for m in methods:
            grid = (f"family=layer nx={n} ny={n} width_factor={w} "
                    f"refinement={refinement} twist={twist_grid}")
            rep, sol = run_single(case_id, m, mesh, material, exact,
                                  grid=grid, seed=seed)
            reports.append(rep)
            if sol is not None:
                kind = METHODS[m][0]
                profiles[(m, w)] = force_profile(mesh, kind, sol, exact, line_x)
                divprofiles[(m, w)] = divergence_profile(mesh, sol, line_x)
    return CaseResult(case=case_id, reports=reports, profiles=profiles,
                      extras={"divergence_profiles": divprofiles})


# The triangular locking grid carries a node perturbation on top of the twist:
# unperturbed split-quad triangulations keep a rich discretely-solenoidal
# subspace (crossed-pattern effect) that masks the volumetric locking the
# experiment is designed to expose.
_CASE6_GRIDS = {
    "6a": ("hexagonal", lambda n: meshgen.twist(meshgen.hexagonal(n, n))),
    "6b": ("triangular", lambda n: meshgen.perturb(
        meshgen.twist(meshgen.triangular(n, n)), 0.25, 3)),
    "6c": ("quadrilateral", lambda n: meshgen.twist(meshgen.cartesian(n, n))),
}

CASE6_LEVEL = 16


def _run_case6(case_id, methods, seed, level):
    name, make = _CASE6_GRIDS[case_id]
    n = level or CASE6_LEVEL
    mesh = make(n)
    material = from_poisson(1.0, LOCKING_NU, mesh.num_cells)
    boundary = bcs.case_locking(mesh)
    reference = locking_reference()
    reports = []
    for m in methods:
        kind, variant = METHODS[m]
        grid = f"family={name} n={n} twist=True nu={LOCKING_NU}"
        try:
            kind, solution = solve_method(mesh, m, material,
                                          lambda x: GRAVITY, boundary)
        except LocalSolveError:
            reports.append(_failed_report(case_id, m, grid, mesh, seed, "local-rank"))
            continue
        except (SolverError, AssemblyError):
            reports.append(_failed_report(case_id, m, grid, mesh, seed, "singular"))
            continue
        rep = error_norms(mesh, kind, solution, reference, case=case_id,
                          grid=grid, seed=seed)
        rep = replace(rep, variant=variant,
                      status="ok:vs-reference")
        reports.append(rep)
    return CaseResult(case=case_id, reports=reports,
                      extras={"reference_level": reference.n})


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_reports_csv(path, reports, metadata=None):
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append(",".join(ErrorReport.CSV_FIELDS))
    lines.extend(r.csv_row() for r in reports)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_profile_csv(path, rows, metadata=None):
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append("face_id,arclength,Fx,Fy,Fx_exact,Fy_exact")
    for r in rows:
        lines.append(
            f"{r.face},{r.arclength:.12g},{r.force[0]:.12g},{r.force[1]:.12g},"
            f"{r.force_exact[0]:.12g},{r.force_exact[1]:.12g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
