"""Command line interface.

Subcommands
-----------
peig solve    --config FILE [--p-max N] [--delta-p X]
              [--rescale adaptive|off|fixed:<alpha>] [--out DIR]
peig converge --config FILE [--out DIR]
peig mesh gen GENERATOR PARAMS... --out FILE

Exit codes: 0 full success, 2 partial success (truncated sweep),
1 hard failure.
"""

from __future__ import annotations

import argparse
import sys

from . import mesh as meshmod
from .experiments import build_experiment, parse_config, run_convergence_study, run_p_sweep

_GEN_USAGE = {
    "interval": "interval A B N_CELLS",
    "disk": "disk RADIUS REFINEMENTS",
    "square": "square C REFINEMENTS",
    "hemisphere": "hemisphere RADIUS REFINEMENTS",
    "half_torus": "half_torus MAJOR_RADIUS TUBE_RADIUS REFINEMENTS",
}


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="peig", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="continuation sweep in p")
    solve.add_argument("--config", required=True)
    solve.add_argument("--p-max", type=float, default=None)
    solve.add_argument("--delta-p", type=float, default=None)
    solve.add_argument("--rescale", default=None)
    solve.add_argument("--out", default=None)
    solve.add_argument("--no-figures", action="store_true")

    conv = sub.add_parser("converge", help="refinement convergence study")
    conv.add_argument("--config", required=True)
    conv.add_argument("--out", default=None)
    conv.add_argument("--no-figures", action="store_true")

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen", help="generate a mesh file")
    gen.add_argument("generator", choices=sorted(_GEN_USAGE))
    gen.add_argument("params", nargs="*", type=float)
    gen.add_argument("--out", required=True)
    return top


def _spec_from_args(args) -> "ExperimentSpec":
    conf = parse_config(args.config)
    if args.out is not None:
        conf["out"] = args.out
    if getattr(args, "p_max", None) is not None:
        conf["p_max"] = str(args.p_max)
    if getattr(args, "delta_p", None) is not None:
        conf["delta_p"] = str(args.delta_p)
    if getattr(args, "rescale", None) is not None:
        conf["rescale"] = args.rescale
    if args.no_figures:
        conf["figures"] = "off"
    return build_experiment(conf)


def _cmd_solve(args) -> int:
    spec = _spec_from_args(args)
    rows, run = run_p_sweep(spec)
    last = rows[-1][0] if rows else None
    print(f"wrote {spec.out_dir}/sweep.csv ({len(rows)} rows, last p = {last})")
    if run.failure:
        print(f"sweep truncated: {run.failure}", file=sys.stderr)
        return 2
    return 0


def _cmd_converge(args) -> int:
    spec = _spec_from_args(args)
    tables = run_convergence_study(spec)
    incomplete = False
    for p, rows in tables.items():
        print(f"wrote {spec.out_dir}/convergence_p{p:g}.csv ({len(rows)} rows)")
        if not rows:
            incomplete = True
    return 2 if incomplete else 0


def _cmd_mesh_gen(args) -> int:
    gen = args.generator
    p = args.params
    try:
        if gen == "interval":
            m = meshmod.build_interval_mesh(p[0], p[1], int(p[2]))
        elif gen == "disk":
            m = meshmod.build_disk_mesh(p[0], int(p[1]))
        elif gen == "square":
            m = meshmod.build_square_mesh(p[0], int(p[1]))
        elif gen == "hemisphere":
            m = meshmod.build_hemisphere_mesh(p[0], int(p[1]))
        else:
            m = meshmod.build_half_torus_mesh(p[0], p[1], int(p[2]))
    except IndexError:
        print(f"usage: peig mesh gen {_GEN_USAGE[gen]} --out FILE", file=sys.stderr)
        return 1
    meshmod.write_mesh(m, args.out)
    print(f"wrote {args.out} ({m.n_vertices} vertices, {m.n_cells} cells)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "converge":
            return _cmd_converge(args)
        if args.command == "mesh":
            return _cmd_mesh_gen(args)
    except Exception as err:  # hard failure -> exit code 1
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
