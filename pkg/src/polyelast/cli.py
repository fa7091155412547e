"""Command-line front end: generate meshes, run single solves, drive the
numbered experiment cases and convergence studies, emit CSV/VTK.

Exit codes: 0 success, 1 numerical failure (solver or local-stability), 2
usage error.  Every output file starts with '# key=value' metadata lines that
reproduce the run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, bc as bcs, meshgen, verify, vtkio
from .errors import GenerationError, LocalSolveError, MaterialError, SolverError
from .material import MaterialField, from_poisson
from .mesh import read_polymesh, write_polymesh

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _grid_arguments(p):
    p.add_argument("--family", default="cartesian", choices=meshgen.FAMILIES)
    p.add_argument("--nx", type=int, default=4)
    p.add_argument("--ny", type=int, default=4)
    p.add_argument("--twist", action="store_true")
    p.add_argument("--perturb-amplitude", type=float, default=0.0)
    p.add_argument("--aspect-ratio", type=float, default=1.0)
    p.add_argument("--refinement", type=int, default=1)
    p.add_argument("--refine-mode", default="both", choices=("both", "y-only"))
    p.add_argument("--width-factor", type=float, default=1.0)
    p.add_argument("--extra-interface-nodes", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)


def _spec_from_args(args) -> meshgen.GridSpec:
    return meshgen.GridSpec(
        family=args.family, nx=args.nx, ny=args.ny, twist=args.twist,
        perturb_amplitude=args.perturb_amplitude, aspect_ratio=args.aspect_ratio,
        refinement_factor=args.refinement, refine_mode=args.refine_mode,
        layer_width_factor=args.width_factor,
        extra_interface_nodes=args.extra_interface_nodes, rng_seed=args.seed,
    )


def _metadata(args, extra=None):
    meta = {"version": __version__, "command": args.command}
    for key, value in sorted(vars(args).items()):
        if key not in ("command", "func") and value is not None:
            meta[key.replace("_", "-")] = value
    meta.update(extra or {})
    return meta


def cmd_mesh(args) -> int:
    spec = _spec_from_args(args)
    mesh = meshgen.generate(spec)
    write_polymesh(mesh, args.out, metadata=_metadata(args, {"grid": spec.header()}))
    if args.vtk:
        vtkio.write_vtk(mesh, args.vtk)
    print(f"wrote {args.out}: {mesh.num_cells} cells, {mesh.num_nodes} nodes, "
          f"{mesh.num_faces} faces")
    return EXIT_OK


def _load_material(args, mesh):
    if args.material_csv:
        return read_material_csv(args.material_csv, mesh.num_cells)
    return from_poisson(args.mu, args.nu, mesh.num_cells)


def read_material_csv(path, num_cells) -> MaterialField:
    """Per-cell material file: 'cell_id,mu,lambda' rows, '#' comments."""
    mu = np.full(num_cells, np.nan)
    lam = np.full(num_cells, np.nan)
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("cell"):
                continue
            cid, m, l = line.split(",")
            mu[int(cid)] = float(m)
            lam[int(cid)] = float(l)
    if np.isnan(mu).any() or np.isnan(lam).any():
        raise MaterialError(f"{path}: material values missing for some cells")
    return MaterialField(mu, lam)


def cmd_solve(args) -> int:
    if args.mesh:
        mesh = read_polymesh(args.mesh)
        grid = f"file={args.mesh}"
    else:
        spec = _spec_from_args(args)
        mesh = meshgen.generate(spec)
        grid = spec.header()
    material = _load_material(args, mesh)
    exact = verify.ManufacturedSolution(
        float(material.mu[0]), float(material.lam[0]),
        lx=float(mesh.nodes[:, 0].max() - mesh.nodes[:, 0].min()),
        ly=float(mesh.nodes[:, 1].max() - mesh.nodes[:, 1].min()),
    )
    fracture = frozenset()
    if args.fracture_faces:
        if verify.METHODS[args.method][0] != "mpsa":
            raise UsageError("--fracture-faces applies to the mpsa methods only")
        with open(args.fracture_faces) as fh:
            fracture = frozenset(
                int(line.strip()) for line in fh
                if line.strip() and not line.startswith("#")
            )

    if args.bc == "case6":
        boundary = bcs.case_locking(mesh)
        body = lambda x: verify.GRAVITY  # noqa: E731
        exact_for_norms = None
    else:
        boundary = bcs.dirichlet_all(mesh)
        exact.validate()
        body = exact.body_force
        exact_for_norms = exact

    kind, variant = verify.METHODS[args.method]
    status = "ok"
    report = None
    solution = None
    try:
        kind, solution = verify.solve_method(mesh, args.method, material, body,
                                             boundary, fracture_faces=fracture)
    except LocalSolveError:
        status = "failed:local-rank"
    except SolverError:
        status = "failed:singular"
    if solution is not None and exact_for_norms is not None:
        report = verify.error_norms(mesh, kind, solution, exact_for_norms,
                                    case="solve", grid=grid, seed=args.seed)
        from dataclasses import replace
        report = replace(report, variant=variant)
    else:
        report = verify.ErrorReport(case="solve", method=kind, variant=variant,
                                    grid=grid, h=mesh.max_diameter(),
                                    dofs=solution.dofs if solution else 0,
                                    seed=args.seed, status=status)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "solve.csv"
    verify.write_reports_csv(csv_path, [report], metadata=_metadata(args))
    print(report.csv_row())
    if args.vtk and solution is not None:
        vtk_path = out_dir / "solution.vtk"
        if kind == "vem":
            vtkio.write_vtk(mesh, vtk_path,
                            cell_data={"divergence": solution.divergence},
                            point_data={"displacement": solution.nodal})
        else:
            vtkio.write_vtk(mesh, vtk_path,
                            cell_data={"divergence": solution.divergence,
                                       "displacement": solution.cells})
        print(f"wrote {vtk_path}")
    return EXIT_OK if status == "ok" else EXIT_NUMERICAL


def cmd_case(args) -> int:
    result = verify.run_case(args.case, method=args.method, seed=args.seed,
                             level=args.level, parameter=args.parameter)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"case{args.case}.csv"
    verify.write_reports_csv(csv_path, result.reports, metadata=_metadata(args))
    for key, rows in result.profiles.items():
        name = "_".join(str(k) for k in (key if isinstance(key, tuple) else (key,)))
        verify.write_profile_csv(out_dir / f"case{args.case}_profile_{name}.csv",
                                 rows, metadata=_metadata(args))
    for r in result.reports:
        print(r.csv_row())
    failed = any(r.status.startswith("failed") for r in result.reports)
    print(f"wrote {csv_path}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_study(args) -> int:
    levels = [int(v) for v in args.levels.split(",")]
    if args.case != "1":
        raise UsageError("convergence studies are defined for case 1")

    def make_mesh(n):
        return verify._case1_mesh(n, args.seed)[0]

    def material_of(mesh):
        return from_poisson(args.mu, args.nu, mesh.num_cells)

    def exact_of(mesh, material):
        return verify._manufactured(material, mesh)

    study = verify.convergence_study(args.method, levels, make_mesh, material_of,
                                     exact_of, case="1", seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"study_case1_{args.method}.csv"
    verify.write_reports_csv(
        csv_path, study.reports,
        metadata=_metadata(args, {
            "rate-u": f"{study.rate_u:.4f}",
            "rate-div": f"{study.rate_div:.4f}",
            "rate-stress": f"{study.rate_stress:.4f}",
        }),
    )
    for r in study.reports:
        print(r.csv_row())
    print(f"rates: displacement {study.rate_u:.3f}, divergence {study.rate_div:.3f}, "
          f"stress {study.rate_stress:.3f}")
    print(f"wrote {csv_path}")
    failed = any(r.status.startswith("failed") for r in study.reports)
    return EXIT_NUMERICAL if failed else EXIT_OK


class UsageError(Exception):
    pass


def _apply_config(argv):
    """Expand '--config FILE' into 'key=value' flags read from the file."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    extra = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            extra.append(f"--{key.strip()}")
            if value.strip().lower() not in ("true", ""):
                extra.append(value.strip())
    return argv[: i] + extra + argv[i + 2 :]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyelast",
        description="Polygonal-mesh linear elasticity: virtual element and "
                    "multi-point stress discretizations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a grid and write polymesh2d")
    _grid_arguments(p)
    p.add_argument("--out", required=True)
    p.add_argument("--vtk")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="solve one manufactured or preset problem")
    _grid_arguments(p)
    p.add_argument("--mesh", help="polymesh2d file (overrides grid flags)")
    p.add_argument("--method", required=True, choices=sorted(verify.METHODS))
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.3)
    p.add_argument("--material-csv")
    p.add_argument("--bc", default="dirichlet-all", choices=sorted(bcs.PRESETS))
    p.add_argument("--fracture-faces")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--vtk", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("case", help="run one of the numbered experiment cases")
    p.add_argument("case", choices=verify.CASE_IDS)
    p.add_argument("--method", default="all",
                   choices=sorted(verify.METHODS) + ["all"])
    p.add_argument("--level", type=int)
    p.add_argument("--parameter", type=float, nargs="*")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_case)

    p = sub.add_parser("study", help="convergence study over a refinement ladder")
    p.add_argument("--case", default="1")
    p.add_argument("--method", required=True, choices=sorted(verify.METHODS))
    p.add_argument("--levels", default="4,8,16,32")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, GenerationError, MaterialError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LocalSolveError, SolverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
