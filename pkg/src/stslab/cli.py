"""Command line entry point: ``stslab study`` and ``stslab compare``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .heat import SlabFailure
from .study import (
    ConfigError,
    format_ratio_table,
    load_config,
    run_study,
    run_support_type_comparison,
    write_csv,
    write_ratio_csv,
    write_vtk_slices,
)

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--refine-mode", choices=["h", "k", "kh"])
    p.add_argument("--r", type=int, help="temporal degree")
    p.add_argument("--s", type=int, help="spatial degree")
    p.add_argument("--support-type", choices=["lobatto", "legendre", "radau-left", "radau-right"])
    p.add_argument("--nmax", type=int, help="maximum intervals per slab (0 = one slab)")
    p.add_argument("--steps", type=int, help="number of refinement steps")
    p.add_argument("--M", type=int, help="initial number of temporal intervals")
    p.add_argument("--refinements", type=int, dest="spatial_refinements", help="initial spatial refinements")
    p.add_argument("--T", type=float, help="end time")
    p.add_argument("--rtol", type=float, help="linear solver tolerance")
    p.add_argument("--solver", choices=["gmres", "direct", "dense"])
    p.add_argument("--csv", help="write results to this CSV file")
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False, help="record 0 instead of wall time")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stslab", description="Space-time dG convergence studies for the heat equation")
    sub = parser.add_subparsers(dest="command", required=True)
    study = sub.add_parser("study", help="run an h-, k- or kh-refinement study")
    _add_common(study)
    study.add_argument("--vtk", help="directory for VTK slices of the finest level")
    study.add_argument("--vtk-times", type=int, default=5, help="number of equispaced VTK slices")
    compare = sub.add_parser("compare", help="error ratios of the support types against Lobatto")
    _add_common(compare)
    return parser


def _overrides(args) -> dict:
    keys = ["refine_mode", "r", "s", "support_type", "nmax", "steps", "M", "spatial_refinements", "T", "rtol", "solver", "csv", "timing"]
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "vtk", None):
        out["vtk"] = args.vtk
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, **_overrides(args))
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "compare":
        try:
            table = run_support_type_comparison(cfg)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except SlabFailure as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        print(format_ratio_table(table))
        if cfg.csv:
            write_ratio_csv(table, cfg.csv)
        return EXIT_OK

    rows = []
    finest = {}

    def record(row, tri, solutions):
        rows.append(row)
        finest["tri"], finest["solutions"] = tri, solutions
        if cfg.csv:
            write_csv(rows, cfg.csv)

    try:
        run_study(cfg, on_row=record)
    except SlabFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        if cfg.csv:
            write_csv(rows, cfg.csv)
        return EXIT_SOLVER
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER

    print(f"{'level':>5} {'M':>6} {'Nx':>8} {'dofs':>10} {'error':>14} {'eoc':>7} {'seconds':>8}")
    for row in rows:
        print(f"{row.level:5d} {row.M:6d} {row.Nx:8d} {row.dofs:10d} {row.error:14.6e} {row.eoc:7.3f} {row.seconds:8.2f}")
    if cfg.vtk:
        times = np.linspace(0.0, cfg.T, max(args.vtk_times, 1))
        write_vtk_slices(finest["tri"], finest["solutions"], times, cfg.vtk)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
