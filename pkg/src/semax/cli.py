"""Command-line front end.

Subcommands: bench, verify, model, roofline, solve, basis-dump, plotdata.
Data goes to stdout in the selected format (table, csv or json; json is
always one document); diagnostics go to stderr.  Exit codes: 0 success,
1 verification failure or non-convergence, 2 usage error, 3 infeasible
model configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import bench as bench_mod
from .basis import BasisConstructionError, build_basis
from .geometry import GeometryError, build_box_mesh, build_geom_factors
from .kernels import (ElementField, KernelVariant, VariantError, ax_apply,
                      largest_unroll, parse_variant)
from .oracle import (OracleError, assemble_local, assemble_local_quadrature,
                     dense_matvec)
from .perfmodel import (DeviceFileError, InfeasibleConfigError, intensity,
                        list_devices, load_device, peak_performance)
from .solver import SolverError, solve_manufactured


@dataclass
class RunConfig:
    """Everything a subcommand needs, normalized from argv."""

    subcommand: str
    degrees: list[int] | None = None
    elements: list[int] | None = None
    extents: tuple[int, int, int] | None = None
    kernel: KernelVariant | None = None
    device: str | None = None
    tol: float = 1e-12
    seed: int = 0
    fmt: str = "table"
    threads: int = 0
    backend: str | None = None
    alpha: float = 0.0
    reps: int = 5
    max_iters: int = 1000
    trials: int = 20
    input: str | None = None
    bar_at: int | None = None


def _emit_table(headers, rows, out):
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    for idx, row in enumerate(cells):
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
        if idx == 0:
            out.write("  ".join("-" * w for w in widths) + "\n")


def _emit_csv(headers, rows, out):
    out.write(",".join(str(h) for h in headers) + "\n")
    for row in rows:
        out.write(",".join(str(c) for c in row) + "\n")


def _emit_json(doc, out):
    json.dump(doc, out, indent=2)
    out.write("\n")


def _intify(value):
    if value is None or (isinstance(value, float) and math.isinf(value)):
        return None
    return int(value) if float(value).is_integer() else value


def _extents_for(count: int) -> tuple[int, int, int]:
    root = round(count ** (1.0 / 3.0))
    if root ** 3 == count:
        return (root, root, root)
    return (count, 1, 1)


def _set_threads(n: int) -> None:
    if n <= 0:
        return
    try:
        from numba import set_num_threads
        set_num_threads(n)
    except ImportError:
        print("warning: --threads ignored, numba not available", file=sys.stderr)


# ---------------------------------------------------------------- model

def _cmd_model(cfg: RunConfig, out) -> int:
    device = load_device(cfg.device)
    rows = []
    reports = []
    infeasible = 0
    for degree in cfg.degrees:
        try:
            rep = peak_performance(device, degree)
        except InfeasibleConfigError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            infeasible += 1
            rows.append([degree, "-", "-", "-", "-", "infeasible", "-"])
            reports.append({"degree": degree, "status": "infeasible",
                            "reason": str(exc)})
            continue
        rows.append([degree, f"{rep.freq_mhz:g}",
                     "-" if math.isinf(rep.resource_dofs_per_cycle)
                     else f"{rep.resource_dofs_per_cycle:g}",
                     f"{_intify(rep.t_max)}", f"{rep.p_max_gflops:.4g}",
                     rep.bound, f"{rep.roofline_gflops:.4g}"])
        reports.append({"degree": degree, "status": "ok",
                        "freq_mhz": rep.freq_mhz,
                        "intensity": rep.intensity,
                        "bandwidth_dofs_per_s": rep.bandwidth_dofs,
                        "resource_dofs_per_cycle":
                            _intify(rep.resource_dofs_per_cycle),
                        "t_max": _intify(rep.t_max),
                        "p_max_gflops": rep.p_max_gflops,
                        "bound": rep.bound,
                        "roofline_gflops": rep.roofline_gflops})
    headers = ["degree", "f_mhz", "t_resource", "t_max", "p_max_gflops",
               "bound", "roofline_gflops"]
    if cfg.fmt == "json":
        _emit_json({"device": device.name, "reports": reports}, out)
    elif cfg.fmt == "csv":
        _emit_csv(headers, rows, out)
    else:
        _emit_table(headers, rows, out)
    return 3 if infeasible else 0


# -------------------------------------------------------------- roofline

def _cmd_roofline(cfg: RunConfig, out) -> int:
    device = load_device(cfg.device)
    rows = [[d, f"{intensity(d):.6g}",
             f"{intensity(d) * device.bandwidth_gbs:.6g}"]
            for d in cfg.degrees]
    headers = ["degree", "intensity_flop_per_byte", "roofline_gflops"]
    if cfg.fmt == "json":
        _emit_json({"device": device.name,
                    "bandwidth_gbs": device.bandwidth_gbs,
                    "rows": [{"degree": d,
                              "intensity": intensity(d),
                              "roofline_gflops":
                                  intensity(d) * device.bandwidth_gbs}
                             for d in cfg.degrees]}, out)
    elif cfg.fmt == "csv":
        _emit_csv(headers, rows, out)
    else:
        _emit_table(headers, rows, out)
    return 0


# ---------------------------------------------------------------- verify

def _verify_variants(degree: int) -> list[KernelVariant]:
    n = degree + 1
    variants = [KernelVariant("reference"), KernelVariant("buffered")]
    u = largest_unroll(n)
    if u > 1:
        variants.append(KernelVariant("unrolled", u))
    for p in (1, 2, 3):
        if largest_unroll(n + p) > largest_unroll(n):
            variants.append(KernelVariant("padded", p))
            break
    return variants


def _cmd_verify(cfg: RunConfig, out) -> int:
    degree = cfg.degrees[0]
    elements = cfg.elements[0]
    basis = build_basis(degree)
    mesh = build_box_mesh(_extents_for(elements), alpha=cfg.alpha)
    geom = build_geom_factors(mesh, basis)
    rng = np.random.default_rng(cfg.seed)
    n3 = basis.n_points ** 3

    probe = assemble_local(0, geom, basis, backend=cfg.backend)
    per_variant = {}
    worst = 0.0
    for variant in _verify_variants(degree):
        err = 0.0
        for _ in range(cfg.trials):
            u = rng.standard_normal(mesh.n_elements * n3)
            field = ElementField(degree=degree, elements=mesh.n_elements,
                                 values=u)
            w = ax_apply(variant, field, geom, basis, backend=cfg.backend)
            ref = dense_matvec(probe, u[:n3])
            scale = max(np.max(np.abs(ref)), 1e-300)
            err = max(err, float(np.max(np.abs(w.values[:n3] - ref)) / scale))
        per_variant[variant.label()] = err
        worst = max(worst, err)

    quad_err = None
    if degree <= 3:
        quad = assemble_local_quadrature(0, geom, basis)
        scale = max(np.max(np.abs(probe.matrix)), 1e-300)
        quad_err = float(np.max(np.abs(quad.matrix - probe.matrix)) / scale)
        worst = max(worst, quad_err)

    ok = worst <= cfg.tol
    if cfg.fmt == "json":
        _emit_json({"degree": degree, "elements": mesh.n_elements,
                    "alpha": cfg.alpha, "trials": cfg.trials,
                    "per_variant": per_variant,
                    "quadrature_vs_probe": quad_err,
                    "max_relative_error": worst, "tolerance": cfg.tol,
                    "pass": ok}, out)
    else:
        for name, err in per_variant.items():
            out.write(f"{name:12s} max relative error {err:.3e}\n")
        if quad_err is not None:
            out.write(f"{'quadrature':12s} max relative error {quad_err:.3e}\n")
        out.write(f"max relative error {worst:.3e} over {cfg.trials} trials "
                  f"(tol {cfg.tol:g}): {'PASS' if ok else 'FAIL'}\n")
    return 0 if ok else 1


# ----------------------------------------------------------------- solve

def _cmd_solve(cfg: RunConfig, out) -> int:
    basis = build_basis(cfg.degrees[0])
    mesh = build_box_mesh(cfg.extents)
    res, err = solve_manufactured(mesh, basis, tol=cfg.tol,
                                  max_iters=cfg.max_iters,
                                  variant=cfg.kernel, backend=cfg.backend)
    rel = res.residuals[-1] / res.residuals[0] if res.residuals[0] else 0.0
    if cfg.fmt == "json":
        _emit_json({"degree": basis.degree, "extents": list(cfg.extents),
                    "iterations": res.iterations,
                    "converged": res.converged,
                    "residual": res.residuals[-1],
                    "relative_residual": rel,
                    "max_node_error": err,
                    "ax_gflops": res.ax_gflops}, out)
    else:
        out.write(f"degree            {basis.degree}\n"
                  f"elements          {mesh.n_elements} {cfg.extents}\n"
                  f"iterations        {res.iterations}\n"
                  f"converged         {res.converged}\n"
                  f"final residual    {res.residuals[-1]:.6e} "
                  f"(relative {rel:.3e})\n"
                  f"max node error    {err:.6e}\n"
                  f"Ax phase          {res.ax_gflops:.3f} GFLOP/s\n")
    if not res.converged:
        print("warning: CG did not reach the requested tolerance",
              file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------- bench

def _cmd_bench(cfg: RunConfig, out) -> int:
    backends = [cfg.backend]
    if cfg.backend == "both":
        backends = ["numba", "numpy"]
    records = []
    for be in backends:
        records.extend(bench_mod.run_sweep(cfg.kernel, cfg.degrees,
                                           cfg.elements, cfg.reps,
                                           backend=be, seed=cfg.seed))
    if cfg.fmt == "json":
        out.write(bench_mod.to_json(records) + "\n")
    elif cfg.fmt == "csv":
        out.write(bench_mod.to_csv(records))
    else:
        headers = ["kernel", "backend", "thr", "N", "E", "med_s", "min_s",
                   "gflops", "dof_per_s", "eff_gbs"]
        rows = [[r.kernel, r.backend, r.threads, r.degree, r.elements,
                 f"{r.seconds_median:.3e}", f"{r.seconds_min:.3e}",
                 f"{r.gflops:.3f}", f"{r.dofs_per_s:.3e}",
                 f"{r.effective_gbs:.2f}"] for r in records]
        _emit_table(headers, rows, out)
    return 0


# -------------------------------------------------------------- plotdata

def _cmd_plotdata(cfg: RunConfig, out) -> int:
    if cfg.input in (None, "-"):
        text = sys.stdin.read()
    else:
        with open(cfg.input) as fh:
            text = fh.read()
    records = bench_mod.from_csv(text)
    if cfg.bar_at is not None:
        rows = bench_mod.bar_at(records, cfg.bar_at)
        if cfg.fmt == "json":
            _emit_json({"elements": cfg.bar_at,
                        "bars": [{"degree": d, "kernel": k, "gflops": g}
                                 for d, k, g in rows]}, out)
        else:
            _emit_csv(["degree", "kernel", "gflops"], rows, out)
        return 0
    series = bench_mod.series_by_degree(records)
    if cfg.fmt == "json":
        _emit_json({"series": [{"degree": d,
                                "points": [{"elements": e, "gflops": g}
                                           for e, g in pts]}
                               for d, pts in sorted(series.items())]}, out)
    else:
        rows = [(d, e, g) for d, pts in sorted(series.items())
                for e, g in pts]
        _emit_csv(["degree", "elements", "gflops"], rows, out)
    return 0


# ------------------------------------------------------------ basis-dump

def _cmd_basis_dump(cfg: RunConfig, out) -> int:
    basis = build_basis(cfg.degrees[0])
    if cfg.fmt == "json":
        _emit_json({"degree": basis.degree,
                    "points": basis.points.tolist(),
                    "weights": basis.weights.tolist(),
                    "deriv": basis.deriv.tolist()}, out)
    else:
        out.write(f"degree {basis.degree}: {basis.n_points} GLL points\n")
        _emit_table(["i", "point", "weight"],
                    [[i, f"{p:+.15e}", f"{w:.15e}"]
                     for i, (p, w) in enumerate(zip(basis.points,
                                                    basis.weights))], out)
        out.write("derivative matrix:\n")
        for row in basis.deriv:
            out.write("  " + " ".join(f"{v:+12.6e}" for v in row) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semax",
        description="Spectral-element Poisson kernel lab: verified "
                    "matrix-free operator variants, a CG driver, and a "
                    "hardware projection model.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, fmt=("table", "csv", "json")):
        p.add_argument("--format", choices=fmt, default=fmt[0])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--backend", default=None,
                       choices=("auto", "numba", "numpy", "both"),
                       help="kernel backend (default: SEMAX_BACKEND or auto)")
        p.add_argument("--threads", type=int, default=0,
                       help="numba thread count (0 = leave unchanged)")

    p = sub.add_parser("model", help="hardware performance projection")
    p.add_argument("--device", required=True,
                   help=f"device file path or shipped name "
                        f"({', '.join(list_devices())})")
    p.add_argument("--degrees", default="1,3,5,7,9,11,13,15")
    common(p)

    p = sub.add_parser("roofline", help="bandwidth-bound performance ceiling")
    p.add_argument("--device", required=True)
    p.add_argument("--degrees", default="1..15")
    common(p)

    p = sub.add_parser("verify", help="kernel variants vs dense oracle")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--elements", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-12)
    common(p)

    p = sub.add_parser("solve", help="manufactured-solution CG solve")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--elements", default="2,2,2",
                   help="element extents Ex,Ey,Ez (or one count)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--kernel", default="ref")
    common(p)

    p = sub.add_parser("bench", help="timed kernel sweep")
    p.add_argument("--kernel", default="ref",
                   help="ref | buffered | unrollU | padP")
    p.add_argument("--degrees", default="7")
    p.add_argument("--elements", default="1..512:x8")
    p.add_argument("--reps", type=int, default=5)
    common(p)

    p = sub.add_parser("plotdata", help="reshape bench CSV into plot series")
    p.add_argument("--input", default="-", help="bench CSV file, - for stdin")
    p.add_argument("--bar-at", type=int, default=None,
                   help="emit a bar slice at this element count")
    common(p, fmt=("csv", "json"))

    p = sub.add_parser("basis-dump", help="print GLL points and matrices")
    p.add_argument("--degree", type=int, required=True)
    common(p)
    return parser


def _to_config(args) -> RunConfig:
    cfg = RunConfig(subcommand=args.subcommand, fmt=args.format,
                    seed=args.seed, backend=args.backend,
                    threads=args.threads)
    if hasattr(args, "degrees"):
        cfg.degrees = bench_mod.parse_degrees(args.degrees)
    if hasattr(args, "degree"):
        cfg.degrees = [args.degree]
    if args.subcommand == "bench":
        cfg.elements = bench_mod.parse_elements(args.elements)
    if args.subcommand == "verify":
        cfg.elements = [args.elements]
    if args.subcommand == "solve":
        parts = [int(v) for v in args.elements.split(",")]
        cfg.extents = (tuple(parts) if len(parts) == 3
                       else _extents_for(parts[0]))
    if hasattr(args, "device"):
        cfg.device = args.device
    if hasattr(args, "kernel"):
        cfg.kernel = parse_variant(args.kernel)
    if hasattr(args, "tol"):
        cfg.tol = args.tol
    if hasattr(args, "alpha"):
        cfg.alpha = args.alpha
    if hasattr(args, "trials"):
        cfg.trials = args.trials
    if hasattr(args, "reps"):
        cfg.reps = args.reps
    if hasattr(args, "max_iters"):
        cfg.max_iters = args.max_iters
    if hasattr(args, "input"):
        cfg.input = args.input
    if hasattr(args, "bar_at"):
        cfg.bar_at = args.bar_at
    return cfg


_HANDLERS = {
    "model": _cmd_model,
    "roofline": _cmd_roofline,
    "verify": _cmd_verify,
    "solve": _cmd_solve,
    "bench": _cmd_bench,
    "plotdata": _cmd_plotdata,
    "basis-dump": _cmd_basis_dump,
}


def dispatch(argv=None, out=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _to_config(args)
        _set_threads(cfg.threads)
        return _HANDLERS[args.subcommand](cfg, out or sys.stdout)
    except InfeasibleConfigError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return 3
    except (DeviceFileError, VariantError, OracleError, GeometryError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, BasisConstructionError, RuntimeError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
