"""Command line entry point: run scenario ladders, merge and check reports, dump meshes, solve single cells."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .closed_form import AnnulusSpec, annulus_stokes_energy, scalar_radius, stokes_gamma_asymptotic, stokes_radius
from .config import config_hash, load_config
from .errors import ConfigError, DrifthomError, SchemaError
from .fem_stokes import cell_V, cell_Wsharp
from .homog_lab import EffectiveReport, read_report_csv, write_report_csv, write_report_json
from .mesh import GradingSpec, disk_cell, dump_text, periodic_cell, perforated_lattice, structured_square, write_vtk
from .scenarios import ScenarioContext, run_row, z_cell_average

log = logging.getLogger("drifthom")

EXIT_OK, EXIT_ASSERT, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
ENERGY_TOL = 1e-8
PROBE_TOL = 1e-8


def _setup_logging():
    level = os.environ.get("HOMOG_LOG", "error").lower()
    if level not in ("error", "info", "debug"):
        level = "error"
    logging.basicConfig(level=getattr(logging, level.upper()), format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------- run


def _write_fields(out: Path, row: EffectiveReport, fields: dict) -> list[str]:
    from .fem_scalar import ScalarField
    from .fem_stokes import StokesField, write_stokes_vtk

    paths = []
    for name, fld in sorted(fields.items()):
        path = out / f"{row.scenario}_eps{row.eps:.6g}_{name}.vtk"
        if isinstance(fld, StokesField):
            write_stokes_vtk(fld, path)
        elif isinstance(fld, ScalarField):
            write_vtk(fld.mesh, path, point_data={name: fld.values})
        else:
            continue
        paths.append(path.name)
    return paths


def run(config_path, out_dir, threads: int = 1, tol: float | None = None, vtk: bool = False) -> int:
    try:
        configs, doc = load_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    contexts = {c.name: ScenarioContext(c) for c in configs}
    tasks = [(c, e) for c in configs for e in c.eps_list]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda ce: run_row(ce[0], ce[1], contexts[ce[0].name], tol), tasks))

    # all writes happen here, in a fixed order
    manifest = {
        "config": str(config_path),
        "config_hash": config_hash(doc),
        "version": __version__,
        "started": started,
        "scenarios": {},
    }
    all_rows = []
    for cfg in configs:
        rows = [r for (c, _), r in zip(tasks, results) if c.name == cfg.name]
        reports = [r.report for r in rows]
        all_rows.extend(reports)
        csv_path, json_path = out / f"{cfg.name}.csv", out / f"{cfg.name}.json"
        write_report_csv(reports, csv_path)
        write_report_json(reports, json_path)
        entry = {"csv": csv_path.name, "json": json_path.name}
        if vtk:
            entry["vtk"] = [p for r in rows for p in _write_fields(out, r.report, r.fields)]
        manifest["scenarios"][cfg.name] = entry
    write_report_csv(all_rows, out / "report.csv")
    write_report_json(all_rows, out / "report.json")
    manifest["report"] = {"csv": "report.csv", "json": "report.json"}
    manifest["finished"] = datetime.now(timezone.utc).isoformat()
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")

    failed = [r for r in all_rows if r.status.startswith("error")]
    for r in failed:
        print(f"solver failure: {r.scenario} eps={r.eps:g}: {r.status}", file=sys.stderr)
    print(f"wrote {len(all_rows)} rows to {out}")
    return EXIT_SOLVER if failed else EXIT_OK


# ---------------------------------------------------------------- report


def check_rows(rows: list[EffectiveReport]) -> list[tuple[str, bool, str]]:
    """Evaluate the declared assertions; returns (name, passed, detail) triples."""
    checks = []
    bad = [r for r in rows if math.isfinite(r.energy_residual) and r.energy_residual > ENERGY_TOL]
    checks.append((
        "energy_residual <= 1e-8",
        not bad,
        ", ".join(f"{r.scenario}@{r.eps:g}={r.energy_residual:.2e}" for r in bad),
    ))
    bad = [r for r in rows if math.isfinite(r.probe_ratio) and abs(r.probe_ratio - 1.0) > PROBE_TOL]
    checks.append((
        "probe_ratio == 1 +- 1e-8",
        not bad,
        ", ".join(f"{r.scenario}@{r.eps:g}={r.probe_ratio!r}" for r in bad),
    ))
    for name in sorted({r.scenario for r in rows}):
        ladder = sorted((r for r in rows if r.scenario == name and math.isfinite(r.corrector_norm)), key=lambda r: -r.eps)
        if len(ladder) < 2:
            continue
        ok = all(b.corrector_norm < a.corrector_norm for a, b in zip(ladder, ladder[1:]))
        detail = " > ".join(f"{r.corrector_norm:.4g}" for r in ladder)
        checks.append((f"{name}: corrector_norm strictly decreasing as eps decreases", ok, detail))
    errors = [r for r in rows if r.status.startswith("error")]
    checks.append(("no failed rows", not errors, ", ".join(f"{r.scenario}@{r.eps:g}" for r in errors)))
    return checks


def report(paths, out=None) -> int:
    rows = []
    try:
        for p in paths:
            rows.extend(read_report_csv(p))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows.sort(key=lambda r: (r.scenario, -r.eps))
    if out:
        write_report_csv(rows, out)
    cols = ("scenario", "eps", "energy_residual", "gamma_eff", "s", "t", "corrector_norm", "probe_ratio", "status")
    print("  ".join(f"{c:>16}" for c in cols))
    for r in rows:
        d = r.row()
        print("  ".join(f"{d[c]:>16.6g}" if isinstance(d[c], float) else f"{str(d[c]):>16}" for c in cols))
    checks = check_rows(rows)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail and not ok else ""))
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_ASSERT


# ---------------------------------------------------------------- mesh and cell


def _grading(args) -> GradingSpec:
    kw = {k: getattr(args, k) for k in ("layers", "ratio", "target_h", "segments") if getattr(args, k) is not None}
    return GradingSpec(**kw)


def mesh_command(args) -> int:
    g = _grading(args)
    if args.kind == "square":
        mesh = structured_square(args.n, periodic=args.periodic)
    elif args.kind == "disk":
        inner = scalar_radius(args.mu, args.eps, args.R) if args.mu else None
        mesh = disk_cell(args.R, g, inner_circle=inner)
    elif args.kind == "cell":
        mesh = periodic_cell(AnnulusSpec(args.R, args.r), args.half_width, g)
    else:
        mesh = perforated_lattice(pitch=args.pitch, annulus=AnnulusSpec(args.R, args.r), grading=g, half_width=args.half_width)
    if args.out.endswith(".vtk"):
        write_vtk(mesh, args.out, cell_data={"subdomain": mesh.subdomain.astype(float)})
    else:
        dump_text(mesh, args.out)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h_min {mesh.h_min:.3e} -> {args.out}")
    return EXIT_OK


def cell_command(args) -> int:
    g = _grading(args)
    if args.problem == "Z":
        an = AnnulusSpec(args.R, scalar_radius(args.mu, args.eps, args.R))
        _, fem, exact = z_cell_average(args.eps, an, g, args.tol)
        print(json.dumps({"r_eps": an.r_eps, "zbar_mu": args.mu * fem, "zbar_mu_exact": args.mu * exact}))
        return EXIT_OK
    r = args.r if args.r is not None else stokes_radius(args.gamma, args.eps)
    mesh = periodic_cell(AnnulusSpec(1.0, r), 1.0, g)
    if args.problem == "V":
        res = cell_V(mesh, r, args.i, args.tol)
        print(json.dumps({
            "r_eps": r,
            "gamma_cell": res.gamma_cell,
            "annulus_energy_exact": annulus_stokes_energy(r),
            "gamma_asymptotic": stokes_gamma_asymptotic(r),
        }))
    else:
        res = cell_Wsharp(mesh, args.eps, r, args.lam, args.tol)
        print(json.dumps({"r_eps": r, "Wbar": [float(v) for v in res.Wbar], "M_quadratic": res.M_quadratic}))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drifthom", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every scenario of a JSON config")
    r.add_argument("config")
    r.add_argument("--out-dir", default="out")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--tol", type=float, default=None, help="override every scenario's solver tolerance")
    r.add_argument("--vtk", action="store_true", help="also write VTK files of the computed fields")

    rp = sub.add_parser("report", help="merge report CSVs and evaluate the trend assertions")
    rp.add_argument("csv", nargs="+")
    rp.add_argument("--out", default=None, help="write the merged CSV here")

    def grading_args(q):
        q.add_argument("--layers", type=int)
        q.add_argument("--ratio", type=float)
        q.add_argument("--target-h", dest="target_h", type=float)
        q.add_argument("--segments", type=int)

    m = sub.add_parser("mesh", help="build and dump a mesh (.vtk or text)")
    m.add_argument("kind", choices=["square", "disk", "cell", "lattice"])
    m.add_argument("--n", type=int, default=16)
    m.add_argument("--periodic", action="store_true")
    m.add_argument("--R", type=float, default=0.4)
    m.add_argument("--r", type=float, default=0.1)
    m.add_argument("--mu", type=float, default=None, help="disk only: add the inner circle r_eps(mu, eps, R)")
    m.add_argument("--eps", type=float, default=0.25)
    m.add_argument("--half-width", dest="half_width", type=float, default=0.5)
    m.add_argument("--pitch", type=float, default=0.25)
    m.add_argument("--out", required=True)
    grading_args(m)

    c = sub.add_parser("cell", help="solve a single cell problem and print JSON")
    c.add_argument("problem", choices=["Z", "V", "WSHARP"])
    c.add_argument("--eps", type=float, default=0.25)
    c.add_argument("--mu", type=float, default=50.0)
    c.add_argument("--gamma", type=float, default=50.0)
    c.add_argument("--R", type=float, default=0.4)
    c.add_argument("--r", type=float, default=None, help="Stokes cells: inner radius (default from gamma and eps)")
    c.add_argument("--i", type=int, default=1, choices=[1, 2])
    c.add_argument("--lam", type=float, nargs=2, default=[1.0, 0.0])
    c.add_argument("--tol", type=float, default=1e-10)
    grading_args(c)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.out_dir, args.threads, args.tol, args.vtk)
        if args.command == "report":
            return report(args.csv, args.out)
        if args.command == "mesh":
            return mesh_command(args)
        return cell_command(args)
    except DrifthomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
