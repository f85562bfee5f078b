"""Convergence studies on the manufactured heat problem and their output."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .heat import ManufacturedSolution, SlabFailure, SlabSolver, eoc, evaluate_at_time, hartmann_solution, l2_l2_error, march
from .slab import SpaceTimeTriangulation, make_temporal_mesh
from .spatial_fe import MAX_SPATIAL_DEGREE, QLagrangeElement, SpatialDoFHandler, make_hypercube_mesh
from .temporal_fe import MAX_DEGREE, SupportType, TemporalBasis

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "M", "Nx", "dofs", "error", "eoc", "seconds"]
REFINE_MODES = ("h", "k", "kh")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    dim: int = 2
    s: int = 1
    r: int = 1
    support_type: str = "lobatto"
    T: float = 1.0
    M: int = 8
    spatial_refinements: int = 3
    nmax: int = 1
    steps: int = 3
    refine_mode: str = "kh"
    rtol: float = 1e-12
    solver: str = "gmres"
    csv: str | None = None
    vtk: str | None = None
    timing: bool = True

    def validate(self) -> "StudyConfig":
        if self.dim != 2:
            raise ConfigError("the manufactured heat problem is posed on the unit square; dim must be 2")
        if not 1 <= self.s <= MAX_SPATIAL_DEGREE:
            raise ConfigError(f"s must be in 1..{MAX_SPATIAL_DEGREE}")
        if not 0 <= self.r <= MAX_DEGREE:
            raise ConfigError(f"r must be in 0..{MAX_DEGREE}")
        try:
            SupportType.parse(self.support_type)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.T <= 0 or self.M < 1 or self.spatial_refinements < 0 or self.nmax < 0:
            raise ConfigError("T must be positive, M >= 1, spatial_refinements >= 0 and nmax >= 0")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.refine_mode not in REFINE_MODES:
            raise ConfigError(f"refine_mode must be one of {', '.join(REFINE_MODES)}")
        if self.solver not in ("gmres", "direct", "dense"):
            raise ConfigError("solver must be gmres, direct or dense")
        if not 0 < self.rtol < 1:
            raise ConfigError("rtol must lie in (0, 1)")
        return self

    def level(self, i: int) -> tuple[int, int]:
        """``(M, spatial refinements)`` at refinement level ``i``."""
        M, L = self.M, self.spatial_refinements
        if self.refine_mode in ("k", "kh"):
            M *= 2**i
        if self.refine_mode in ("h", "kh"):
            L += i
        return M, L


@dataclass(frozen=True)
class StudyRow:
    level: int
    M: int
    Nx: int
    dofs: int
    error: float
    eoc: float
    seconds: float

    def as_csv(self) -> list[str]:
        return [
            str(self.level), str(self.M), str(self.Nx), str(self.dofs),
            repr(self.error), "" if math.isnan(self.eoc) else repr(self.eoc), f"{self.seconds:.3f}",
        ]


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(StudyConfig)}
    kind = types[name]
    if "bool" in kind:
        if raw.lower() not in _BOOL:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return _BOOL[raw.lower()]
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


_ALIASES = {"support-type": "support_type", "refine-mode": "refine_mode", "n_max": "nmax", "n_refinement_steps": "steps"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(StudyConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path: str | os.PathLike | None, **overrides) -> StudyConfig:
    values = {}
    if path is not None:
        try:
            values = parse_config_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return StudyConfig(**values).validate()


def build_triangulation(cfg: StudyConfig, M: int, refinements: int, support_type: str | None = None) -> SpaceTimeTriangulation:
    mesh = make_hypercube_mesh(cfg.dim, refinements)
    dof = SpatialDoFHandler(mesh, QLagrangeElement(cfg.s, cfg.dim))
    basis = TemporalBasis(cfg.r, support_type or cfg.support_type)
    return SpaceTimeTriangulation(make_temporal_mesh(cfg.T, M), dof, basis, cfg.nmax)


def run_study(cfg: StudyConfig, ms: ManufacturedSolution | None = None, on_row=None) -> list[StudyRow]:
    """Solve the manufactured problem on ``steps + 1`` successively refined meshes.

    ``on_row`` is called after every level so partial results survive a
    later failure.
    """
    cfg.validate()
    ms = ms or hartmann_solution()
    rows: list[StudyRow] = []
    errors, sizes = [], []
    for level in range(cfg.steps + 1):
        M, L = cfg.level(level)
        start = time.perf_counter()
        tri = build_triangulation(cfg, M, L)
        solver = SlabSolver(cfg.solver, rtol=cfg.rtol)
        solutions = march(tri, ms, solver=solver)
        err = l2_l2_error(tri, solutions, ms)
        seconds = time.perf_counter() - start if cfg.timing else 0.0
        errors.append(err)
        sizes.append(cfg.T / M if cfg.refine_mode != "h" else 2.0**-L)
        rate = eoc(errors, sizes)[-1]
        row = StudyRow(level, M, tri.spatial.n_dofs, tri.n_dofs, err, rate, seconds)
        log.info("level %d: M=%d Nx=%d dofs=%d error=%.6e eoc=%.3f", level, M, row.Nx, row.dofs, err, rate)
        rows.append(row)
        if on_row is not None:
            on_row(row, tri, solutions)
    return rows


COMPARED_TYPES = ("radau-left", "legendre", "radau-right")


def run_support_type_comparison(cfg: StudyConfig, ms: ManufacturedSolution | None = None, types=COMPARED_TYPES) -> list[dict]:
    """Error ratio of each support type against Lobatto, per refinement level."""
    if cfg.r < 1:
        raise ConfigError("support types coincide in their role only for r >= 1")
    reference = run_study(replace(cfg, support_type="lobatto"), ms)
    table = [{"level": row.level, "dofs": row.dofs} for row in reference]
    for st in types:
        rows = run_study(replace(cfg, support_type=st), ms)
        for entry, row, ref in zip(table, rows, reference):
            entry[st] = row.error / ref.error
    return table


def format_ratio_table(table: list[dict], types=COMPARED_TYPES) -> str:
    lines = ["dofs".rjust(12) + "".join(t.rjust(14) for t in types)]
    for entry in table:
        lines.append(f"{entry['dofs']:>12d}" + "".join(f"{100 * entry[t]:13.2f}%" for t in types))
    return "\n".join(lines)


def write_csv(rows: list[StudyRow], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(row.as_csv())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def write_ratio_csv(table: list[dict], path, types=COMPARED_TYPES) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "dofs", *types])
        for entry in table:
            writer.writerow([entry["level"], entry["dofs"], *(repr(entry[t]) for t in types)])


def write_vtk_slice(path, points: np.ndarray, dims: tuple[int, int, int], values: np.ndarray, title: str = "u") -> None:
    """Legacy ASCII STRUCTURED_GRID with one point scalar named ``u``."""
    pts = np.zeros((len(points), 3))
    pts[:, : points.shape[1]] = points
    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"{title}\n")
            fh.write("ASCII\n")
            fh.write("DATASET STRUCTURED_GRID\n")
            fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
            fh.write(f"POINTS {len(pts)} double\n")
            for p in pts:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            fh.write(f"POINT_DATA {len(values)}\n")
            fh.write("SCALARS u double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in values:
                fh.write(f"{v:.17g}\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def write_vtk_slices(tri: SpaceTimeTriangulation, solutions, times, path) -> list[Path]:
    """One VTK file per requested time, named ``solution_<i>.vtk`` inside ``path``."""
    out_dir = Path(path)
    out_dir.mkdir(parents=True, exist_ok=True)
    dof = tri.spatial
    n = dof.n_lattice
    dims = (n, n if dof.dim == 2 else 1, 1)
    written = []
    for i, t in enumerate(times):
        values = evaluate_at_time(tri, solutions, float(t))
        target = out_dir / f"solution_{i:04d}.vtk"
        write_vtk_slice(target, dof.support_points, dims, values, title=f"u at t={float(t):.6g}")
        written.append(target)
    return written


def config_dict(cfg: StudyConfig) -> dict:
    return asdict(cfg)
