"""Experiment recipes: p-sweeps, convergence studies, eigenfunction export,
and the flat key=value configuration format that drives the CLI.

Study outputs are delimited CSV tables with 9-significant-digit floats;
the report path also renders matplotlib figures next to each table (see
:mod:`peig.plots`).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import fem, mesh as meshmod, reference
from .eigensolver import (
    ContinuationRun,
    EigenResult,
    SolverConfig,
    continuation,
    continuation_with_rescaling,
)
from .mesh import Mesh, prolongate, read_mesh, scale_mesh

FLOAT_FMT = "%.9g"


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass
class DomainSpec:
    """A named domain generator (or mesh file) with its parameters."""

    kind: str
    params: dict

    @property
    def is_interval(self) -> bool:
        return self.kind == "interval"

    def build(self, level: int) -> Mesh:
        """Mesh at one refinement level (cell count for the interval)."""
        p = self.params
        if self.kind == "interval":
            return meshmod.build_interval_mesh(p["a"], p["b"], level)
        if self.kind == "disk":
            return meshmod.build_disk_mesh(p["radius"], level)
        if self.kind == "square":
            return meshmod.build_square_mesh(p["c"], level)
        if self.kind == "hemisphere":
            return meshmod.build_hemisphere_mesh(p["radius"], level)
        if self.kind == "half_torus":
            return meshmod.build_half_torus_mesh(
                p["major_radius"], p["tube_radius"], level
            )
        if self.kind == "file":
            return read_mesh(p["path"])
        raise ValueError(f"unknown domain kind '{self.kind}'")

    def chain(self, max_level: int):
        """Nested refinement family (only quadrisection generators)."""
        p = self.params
        if self.kind == "disk":
            return meshmod.disk_mesh_chain(p["radius"], max_level)
        if self.kind == "square":
            return meshmod.square_mesh_chain(p["c"], max_level)
        if self.kind == "hemisphere":
            return meshmod.hemisphere_mesh_chain(p["radius"], max_level)
        raise ValueError(
            f"nested self-convergence is not available for domain '{self.kind}'"
        )

    def limit_domain(self, alpha: float = 1.0):
        """Descriptor of the known p -> infinity limit, or None."""
        p = self.params
        if self.kind == "interval":
            return ("interval", alpha * p["a"], alpha * p["b"])
        if self.kind == "disk":
            return ("disk", alpha * p["radius"])
        if self.kind == "hemisphere":
            return ("hemisphere", alpha * p["radius"])
        if self.kind == "half_torus":
            return ("half_torus", alpha * p["major_radius"], alpha * p["tube_radius"])
        return None  # square and imported meshes have no known limit


@dataclass
class ExperimentSpec:
    """Everything needed to run one experiment."""

    domain: DomainSpec
    level: int                      # sweep level (n_cells for the interval)
    levels: list = field(default_factory=list)   # convergence levels
    p_targets: list = field(default_factory=list)
    cfg: SolverConfig = field(default_factory=SolverConfig)
    rescale: str = "off"            # off | adaptive | fixed:<alpha>
    out_dir: str = "."
    export_p: list = field(default_factory=list)
    figures: bool = True

    def __post_init__(self):
        if self.cfg.p_max < 2.0:
            raise ValueError("p_max must be at least 2")


# ---------------------------------------------------------------------------
# solving helpers
# ---------------------------------------------------------------------------

def _fixed_alpha(rescale: str) -> float | None:
    if rescale.startswith("fixed:"):
        return float(rescale.split(":", 1)[1])
    return None


def run_continuation(m: Mesh, cfg: SolverConfig, rescale: str = "off") -> ContinuationRun:
    """Dispatch a continuation sweep according to the rescaling mode."""
    alpha = _fixed_alpha(rescale)
    if alpha is not None:
        run = continuation(scale_mesh(m, alpha), cfg)
        for r in run.results:
            r.alpha = alpha
            r.lambda_original = _scaled_back(r.lam, alpha, r.p)
        return run
    if rescale == "adaptive":
        return continuation_with_rescaling(m, cfg)
    if rescale == "off":
        return continuation(m, cfg)
    raise ValueError(f"unknown rescale mode '{rescale}'")


def _scaled_back(lam: float, alpha: float, p: float) -> float:
    return lam if alpha == 1.0 else math.exp(p * math.log(alpha) + math.log(lam))


# ---------------------------------------------------------------------------
# p sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = (
    "p", "lambda_working", "alpha", "lambda_original",
    "lambda_root", "p_lambda_root", "newton_iters",
)


def sweep_rows(run: ContinuationRun) -> list:
    rows = []
    for r in run.results:
        root = math.exp(math.log(r.lambda_original) / r.p)
        rows.append((r.p, r.lam, r.alpha, r.lambda_original, root, r.p * root, r.newton_iters))
    return rows


def run_p_sweep(spec: ExperimentSpec):
    """Continuation sweep; writes sweep.csv (and figures) to the output dir.

    Returns (rows, run); a truncated sweep carries the failure reason on
    ``run.failure``.
    """
    m = spec.domain.build(spec.level)
    run = run_continuation(m, spec.cfg, spec.rescale)
    rows = sweep_rows(run)
    os.makedirs(spec.out_dir, exist_ok=True)
    path = os.path.join(spec.out_dir, "sweep.csv")
    write_csv(path, SWEEP_HEADER, rows, comment=_failure_comment(run))
    if spec.figures:
        from . import plots

        plots.sweep_figure(rows, os.path.join(spec.out_dir, "sweep.png"))
        plots.frequency_figure(rows, os.path.join(spec.out_dir, "sweep_frequency.png"))
    for p_want in spec.export_p:
        r = _result_at(run, p_want)
        if r is not None:
            export_eigenfunction(
                r,
                os.path.join(spec.out_dir, _eigenfunction_name(r)),
                limit_domain=spec.domain.limit_domain(r.alpha),
                figure=spec.figures,
            )
    return rows, run


def _result_at(run: ContinuationRun, p: float):
    for r in run.results:
        if abs(r.p - p) < 1e-9:
            return r
    return None


def _failure_comment(run: ContinuationRun):
    return None if run.failure is None else f"truncated: {run.failure}"


def _eigenfunction_name(r: EigenResult) -> str:
    ptag = f"{r.p:g}"
    ext = "vtk" if r.u.mesh.nodes_per_cell == 4 else "dat"
    return f"u_p{ptag}.{ext}"


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

CONV_HEADER = ("cells", "L2_error", "L2_rate", "lambda_rel_error", "lambda_rate", "lambda")


def solve_targets(m: Mesh, cfg: SolverConfig, p_targets, rescale="off"):
    """One continuation run; returns {p: EigenResult} at the targets and the run."""
    cfg_run = SolverConfig(**{**cfg.__dict__, "p_max": max(p_targets)})
    run = run_continuation(m, cfg_run, rescale)
    found = {}
    for p in p_targets:
        r = _result_at(run, p)
        if r is not None:
            found[p] = r
    return found, run


def interval_errors(a: float, b: float, result: EigenResult, table=None):
    """L2 and eigenvalue errors against the exact interval eigenpair."""
    m = result.u.mesh
    lam_exact, u_exact = reference.exact_1d_eigenpair(result.p, a, b, table)
    coords, dA = fem.quadrature_coordinates(m, n1d=3)
    uh = fem.values_at_quadrature(m, result.u.coefficients, n1d=3)
    ue = u_exact(coords[..., 0])
    err = math.sqrt(math.fsum(np.einsum("cq,cq->c", (uh - ue) ** 2, dA)))
    lam_rel = abs(result.lam - lam_exact) / lam_exact
    return err, lam_rel, result.lam


def interval_convergence_rows(a, b, levels, solved_by_level, p, table=None):
    """Table rows (cells, L2_error, L2_rate, lambda_rel_error, lambda_rate,
    lambda) against the exact interval eigenpair."""
    tab = table if table is not None else reference.PTrigTable.build(p)
    rows = []
    prev_err = prev_lam = None
    for lv in levels:
        r = solved_by_level[lv].get(p)
        if r is None:
            continue
        err, lam_rel, lam = interval_errors(a, b, r, tab)
        l2_rate = math.log2(prev_err / err) if prev_err else math.nan
        lam_rate = math.log2(prev_lam / lam_rel) if prev_lam else math.nan
        rows.append((lv, err, l2_rate, lam_rel, lam_rate, lam))
        prev_err, prev_lam = err, lam_rel
    return rows


def nested_convergence_rows(chain, levels, solved_by_level, p):
    """Self-convergence rows with the finest level of ``levels`` as reference.

    Coarse solutions are transferred to the reference mesh by exact nested
    Q1 prolongation before the L2 difference is integrated there.
    """
    ref_lv = levels[-1]
    ref = solved_by_level[ref_lv].get(p)
    rows = []
    if ref is None:
        return rows
    prev_err = prev_lam = None
    for lv in levels[:-1]:
        r = solved_by_level[lv].get(p)
        if r is None:
            continue
        vals = r.u.coefficients
        for k in range(lv + 1, ref_lv + 1):
            vals = prolongate(vals, chain[k][1])
        diff = vals - ref.u.coefficients
        err = fem.l2_norm_nodal(ref.u.mesh, diff, n1d=2)
        lam_rel = abs(r.lam - ref.lam) / ref.lam
        l2_rate = math.log2(prev_err / err) if prev_err else math.nan
        lam_rate = math.log2(prev_lam / lam_rel) if prev_lam else math.nan
        rows.append((chain[lv][0].n_cells, err, l2_rate, lam_rel, lam_rate, r.lam))
        prev_err, prev_lam = err, lam_rel
    return rows


def run_convergence_study(spec: ExperimentSpec):
    """Eigenpair convergence under uniform refinement.

    On the interval the errors are measured against the exact eigenpair;
    elsewhere the finest level of ``spec.levels`` serves as the
    self-convergence reference (its row is consumed, not emitted), with
    coarse solutions transferred to the reference mesh by exact nested Q1
    prolongation.  Writes one convergence_p<val>.csv per target p.

    Returns {p: rows}; solver failures leave a per-level comment row out
    and the study continues.
    """
    p_targets = spec.p_targets or [spec.cfg.p_max]
    levels = sorted(spec.levels)
    if len(levels) < 2:
        raise ValueError("need at least two refinement levels")
    os.makedirs(spec.out_dir, exist_ok=True)
    tables = {}

    if spec.domain.is_interval:
        solved = {}
        for lv in levels:
            m = spec.domain.build(lv)
            found, _ = solve_targets(m, spec.cfg, p_targets, spec.rescale)
            solved[lv] = found
        a, b = spec.domain.params["a"], spec.domain.params["b"]
        for p in p_targets:
            tables[p] = interval_convergence_rows(a, b, levels, solved, p)
    else:
        chain = spec.domain.chain(max(levels))
        solved = {}
        for lv in levels:
            found, _ = solve_targets(chain[lv][0], spec.cfg, p_targets, spec.rescale)
            solved[lv] = found
        for p in p_targets:
            tables[p] = nested_convergence_rows(chain, levels, solved, p)

    for p, rows in tables.items():
        path = os.path.join(spec.out_dir, f"convergence_p{p:g}.csv")
        write_csv(path, CONV_HEADER, rows)
        if spec.figures and rows:
            from . import plots

            plots.convergence_figure(rows, p, os.path.join(spec.out_dir, f"convergence_p{p:g}.png"))
    return tables


# ---------------------------------------------------------------------------
# eigenfunction export
# ---------------------------------------------------------------------------

def export_eigenfunction(result: EigenResult, path, limit_domain=None, figure=False) -> None:
    """Write an eigenfunction to disk for visualization.

    Quad meshes produce a legacy-VTK unstructured grid with point scalars
    ``u`` plus, when the domain's limiting profile is known, ``u_inf`` and
    ``diff`` = u - u_inf.  Segment meshes fall back to an ASCII table with
    columns x, u, u_inf, diff; with ``figure`` on, the 1D table gets a
    companion PNG profile plot.
    """
    if not result.converged:
        raise ValueError("refusing to export an unconverged result")
    m = result.u.mesh
    u = result.u.coefficients
    uinf = None
    if limit_domain is not None:
        uinf = reference.limit_distance_values(limit_domain, m.vertices)
    if m.nodes_per_cell == 2:
        _write_1d_table(m, u, uinf, path)
        if figure:
            from . import plots

            plots.profile_figure(
                m.vertices[:, 0], u, uinf, os.path.splitext(str(path))[0] + ".png"
            )
    else:
        _write_vtk(m, u, uinf, path)


def _write_1d_table(m: Mesh, u, uinf, path):
    order = np.argsort(m.vertices[:, 0])
    with open(path, "w") as f:
        f.write("# x u u_inf diff\n")
        for i in order:
            row = [m.vertices[i, 0], u[i]]
            if uinf is not None:
                row += [uinf[i], u[i] - uinf[i]]
            else:
                row += [math.nan, math.nan]
            f.write(" ".join(FLOAT_FMT % v for v in row) + "\n")


def _write_vtk(m: Mesh, u, uinf, path):
    nv, nc = m.n_vertices, m.n_cells
    pts = np.zeros((nv, 3))
    pts[:, : m.dim_embed] = m.vertices
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("first p-Laplace eigenfunction\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {nv} double\n")
        for q in pts:
            f.write(" ".join(FLOAT_FMT % x for x in q) + "\n")
        f.write(f"CELLS {nc} {nc * 5}\n")
        for c in m.cells:
            f.write("4 " + " ".join(str(i) for i in c) + "\n")
        f.write(f"CELL_TYPES {nc}\n")
        f.write("\n".join(["9"] * nc) + "\n")
        f.write(f"POINT_DATA {nv}\n")
        _vtk_scalar(f, "u", u)
        if uinf is not None:
            _vtk_scalar(f, "u_inf", uinf)
            _vtk_scalar(f, "diff", u - uinf)


def _vtk_scalar(f, name, vals):
    f.write(f"SCALARS {name} double 1\n")
    f.write("LOOKUP_TABLE default\n")
    for v in vals:
        f.write(FLOAT_FMT % v + "\n")


# ---------------------------------------------------------------------------
# CSV and configuration
# ---------------------------------------------------------------------------

def write_csv(path, header, rows, comment: str | None = None) -> None:
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(
                ",".join(
                    str(v) if isinstance(v, (int, np.integer)) else FLOAT_FMT % v
                    for v in row
                )
                + "\n"
            )


def parse_config(path) -> dict:
    """Flat key = value format, '#' comments, later keys win."""
    out = {}
    with open(path) as f:
        for no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{no}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


_DOMAIN_KEYS = {
    "interval": (("a", float, -1.0), ("b", float, 1.0)),
    "disk": (("radius", float, 1.0),),
    "square": (("c", float, math.sqrt(2.0)),),
    "hemisphere": (("radius", float, 2.0 / math.pi),),
    "half_torus": (("major_radius", float, 2.0), ("tube_radius", float, 1.0)),
    "file": (("path", str, None),),
}


def build_experiment(conf: dict) -> ExperimentSpec:
    """Turn a flat configuration dictionary into an ExperimentSpec."""
    kind = conf.get("domain")
    if kind not in _DOMAIN_KEYS:
        raise ValueError(f"domain must be one of {sorted(_DOMAIN_KEYS)}, got {kind!r}")
    params = {}
    for key, typ, default in _DOMAIN_KEYS[kind]:
        if key in conf:
            params[key] = typ(conf[key])
        elif default is not None:
            params[key] = default
        else:
            raise ValueError(f"domain '{kind}' requires key '{key}'")
    domain = DomainSpec(kind, params)

    cfg_kwargs = {}
    for key, typ in (
        ("eta", float), ("tol_newton", float), ("tol_cg", float), ("c1", float),
        ("delta_p", float), ("p_max", float), ("tau_minus", float),
        ("tau_plus", float), ("max_newton_iters", int), ("min_delta_p", float),
    ):
        if key in conf:
            cfg_kwargs[key] = typ(conf[key])
    cfg = SolverConfig(**cfg_kwargs)

    if kind == "interval":
        level = int(conf.get("n_cells", 64))
    else:
        level = int(conf.get("refinements", 3))
    levels = [int(tok) for tok in conf["levels"].split(",")] if "levels" in conf else []
    p_targets = (
        [float(tok) for tok in conf["converge_p"].split(",")]
        if "converge_p" in conf
        else [cfg.p_max]
    )
    export_p = (
        [float(tok) for tok in conf["export_p"].split(",")]
        if "export_p" in conf
        else [cfg.p_max]
    )
    rescale = conf.get("rescale", "off")
    if rescale not in ("off", "adaptive") and not rescale.startswith("fixed:"):
        raise ValueError(f"rescale must be off, adaptive or fixed:<alpha>, got {rescale!r}")
    figures = conf.get("figures", "on").lower() not in ("off", "false", "0", "no")
    return ExperimentSpec(
        domain=domain,
        level=level,
        levels=levels,
        p_targets=p_targets,
        cfg=cfg,
        rescale=rescale,
        out_dir=conf.get("out", "."),
        export_p=export_p,
        figures=figures,
    )
