"""Space-time dG(r) x cG(s) discretisation of the heat equation on slabs.

On every slab the assembled system is

    sum_m  int_{I_m} (d_t u, phi) + (grad u, grad phi) dt
  + sum_{inner m} ([u]_m, phi_m^+) + (u_start^+, phi_start^+)
  = sum_m int_{I_m} (f, phi) dt + (u_start^-, phi_start^+),

where ``u_start^-`` is the final trace of the previous slab (or the initial
value).  Because every space-time basis function is a product of a temporal
and a spatial one, the matrix is ``kron(T_dt, M_x) + kron(T_mass, K_x)`` in
space-major order, and only the load vector needs genuine space-time
quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .linalg import ILU0, CsrMatrix, SolverError, solve_dense_lu, solve_gmres_ilu0
from .slab import Slab, SpaceTimeTriangulation, build_spacetime_sparsity, jump_coupling, temporal_pattern
from .spatial_fe import SpatialAssembler, SpatialDoFHandler, build_spatial_sparsity
from .st_values import StFeValues, StJumpValues
from .temporal_fe import TemporalBasis, TemporalQuadrature

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form solution with the derivatives needed to build ``f``.

    Each callable takes ``t`` (array broadcastable against ``x[..., 0]``) and
    points ``x`` of shape ``(..., dim)``.  ``gradient`` returns shape
    ``(..., dim)``.
    """

    value: Field
    dt: Field
    gradient: Field
    laplacian: Field
    dim: int = 2
    name: str = "custom"

    def rhs(self, t, x) -> np.ndarray:
        return self.dt(t, x) - self.laplacian(t, x)

    def initial(self, x) -> np.ndarray:
        return self.value(np.zeros(np.shape(x)[:-1]), x)


def hartmann_solution() -> ManufacturedSolution:
    """Peak of width ~0.14 circling the centre of the unit square once per time unit."""

    def parts(t, x):
        t = np.asarray(t, dtype=float)
        dx = x[..., 0] - (0.5 + 0.25 * np.cos(2 * np.pi * t))
        dy = x[..., 1] - (0.5 + 0.25 * np.sin(2 * np.pi * t))
        w = 1.0 + 50.0 * (dx * dx + dy * dy)
        return t, dx, dy, w

    def value(t, x):
        _, _, _, w = parts(t, x)
        return 1.0 / w

    def dt(t, x):
        t, dx, dy, w = parts(t, x)
        da = -0.5 * np.pi * np.sin(2 * np.pi * t)
        db = 0.5 * np.pi * np.cos(2 * np.pi * t)
        dD = -2.0 * dx * da - 2.0 * dy * db
        return -50.0 * dD / (w * w)

    def gradient(t, x):
        _, dx, dy, w = parts(t, x)
        return np.stack([-100.0 * dx / (w * w), -100.0 * dy / (w * w)], axis=-1)

    def laplacian(t, x):
        _, dx, dy, w = parts(t, x)
        grad_w_sq = 1e4 * (dx * dx + dy * dy)
        return -200.0 / (w * w) + 2.0 * grad_w_sq / (w * w * w)

    return ManufacturedSolution(value, dt, gradient, laplacian, dim=2, name="hartmann")


@dataclass
class SlabSystem:
    slab: Slab
    matrix: CsrMatrix
    rhs: np.ndarray
    initial_trace: np.ndarray
    solution: np.ndarray | None = None
    iterations: int = 0


def temporal_blocks(slab: Slab) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Temporal factors ``(T_dt, T_mass)`` of the slab matrix.

    ``T_dt`` holds the time derivative plus the jump and initial terms and
    multiplies the spatial mass matrix; ``T_mass`` multiplies the stiffness.
    """
    basis = slab.basis
    n = basis.n_dofs
    D = basis.derivative_matrix()
    Mt = basis.mass_matrix()
    plus, minus = basis.limit_left, basis.limit_right
    couple = np.where(jump_coupling(basis), -np.outer(plus, minus), 0.0)
    N_t = slab.N_t
    T_dt = np.zeros((N_t, N_t))
    T_mass = np.zeros((N_t, N_t))
    for m, k in enumerate(slab.lengths):
        s = slice(m * n, (m + 1) * n)
        T_dt[s, s] = D + np.outer(plus, plus)
        T_mass[s, s] = k * Mt
        if m > 0:
            T_dt[s, (m - 1) * n : m * n] = couple
    return sp.csr_matrix(T_dt), sp.csr_matrix(T_mass)


class SlabAssembler:
    """Holds the spatial operators of the fixed mesh shared by all slabs."""

    def __init__(self, spatial: SpatialDoFHandler, basis: TemporalBasis):
        self.spatial = spatial
        self.basis = basis
        self.quad = SpatialAssembler(spatial)
        self.mass = self.quad.mass_matrix()
        self.stiffness = self.quad.stiffness_matrix()
        self.spatial_pattern = build_spatial_sparsity(spatial)
        self.time_quad = TemporalQuadrature.gauss(basis.degree + 2)
        self._phi_t = basis.values(self.time_quad.points)
        self._points = self.quad.physical_points()
        self._jxw = self.quad.jxw()

    def matrix(self, slab: Slab) -> CsrMatrix:
        S_t = temporal_pattern(slab.n_intervals, slab.basis)
        pattern = build_spacetime_sparsity(self.spatial_pattern, S_t, slab.N_x)
        T_dt, T_mass = temporal_blocks(slab)
        A = CsrMatrix(pattern)
        A.add_scipy(sp.kron(T_dt, self.mass, format="csr"))
        A.add_scipy(sp.kron(T_mass, self.stiffness, format="csr"))
        return A

    def load(self, slab: Slab, f: Field) -> np.ndarray:
        """``int (f, phi)`` over the slab, space-major, length ``N_t * N_x``."""
        N_x, n = slab.N_x, slab.basis.n_dofs
        cell_dofs = self.spatial.cell_dofs
        phi_x = self.quad.phi
        out = np.zeros((slab.N_t, N_x))
        tw = self.time_quad.weights
        for m, (t0, k) in enumerate(zip(slab.breaks[:-1], slab.lengths)):
            times = t0 + k * self.time_quad.points
            fv = f(times[:, None, None], self._points[None, :, :, :])  # (nqt, nc, nqx)
            # (nc, r+1, nloc)
            local = np.einsum("tcx,t,ti,cx,xa->cia", fv, tw * k, self._phi_t, self._jxw, phi_x, optimize=True)
            for it in range(n):
                out[m * n + it] = np.bincount(cell_dofs.ravel(), weights=local[:, it, :].ravel(), minlength=N_x)
        return out.ravel()

    def initial_term(self, slab: Slab, trace: np.ndarray) -> np.ndarray:
        out = np.zeros((slab.N_t, slab.N_x))
        out[: slab.basis.n_dofs] = np.outer(slab.basis.limit_left, self.mass @ trace)
        return out.ravel()

    def assemble(self, slab: Slab, f: Field, initial_trace: np.ndarray) -> SlabSystem:
        trace = np.asarray(initial_trace, dtype=float)
        if trace.shape != (slab.N_x,):
            raise ValueError(f"initial trace has length {trace.shape}, expected {slab.N_x}")
        rhs = self.load(slab, f) + self.initial_term(slab, trace)
        return SlabSystem(slab, self.matrix(slab), rhs, trace)


def assemble_slab(slab: Slab, ms: ManufacturedSolution, initial_trace: np.ndarray, assembler: SlabAssembler | None = None) -> SlabSystem:
    assembler = assembler or SlabAssembler(slab.spatial, slab.basis)
    return assembler.assemble(slab, ms.rhs, initial_trace)


def assemble_slab_by_cells(slab: Slab, f: Field, initial_trace: np.ndarray) -> SlabSystem:
    """Straightforward cell-by-interval assembly with :class:`StFeValues`.

    Slow; kept as the reference the Kronecker assembly is checked against.
    """
    dof = slab.spatial
    element = dof.element
    fev = StFeValues(slab.basis, element)
    jump = StJumpValues(slab.basis, element)
    S_t = temporal_pattern(slab.n_intervals, slab.basis)
    A = CsrMatrix(build_spacetime_sparsity(build_spatial_sparsity(dof), S_t, slab.N_x))
    rhs = np.zeros(slab.n_dofs)
    coupled = jump_coupling(slab.basis)
    n_x = element.n_dofs
    for cell in range(dof.mesh.n_cells):
        fev.reinit_space(dof, cell)
        jump.reinit_space(dof, cell)
        for m in range(slab.n_intervals):
            fev.reinit_time(slab, m)
            jump.reinit_time(slab, m)
            idx = fev.get_local_dof_indices()
            val, dtv, grad, jxw = fev.value_table(), fev.dt_table(), fev.grad_table(), fev.jxw_table()
            local = np.einsum("q,qj,qi->ij", jxw, dtv, val) + np.einsum("q,qjd,qid->ij", jxw, grad, grad)
            plus, wx = jump.plus_table(), jump.jxw_table()
            local += np.einsum("q,qj,qi->ij", wx, plus, plus)
            A.add_values(np.repeat(idx, len(idx)), np.tile(idx, len(idx)), local)
            t, x = fev.quadrature_points()
            rhs[idx] += val.T @ (jxw * f(t, x))
            if jump.has_minus:
                minus = jump.minus_table()
                coupling = -np.einsum("q,qj,qi->ij", wx, minus, plus)
                # drop entries whose temporal limits vanish, matching the pattern
                it_i = np.arange(len(idx)) // n_x
                coupling[~coupled[it_i][:, it_i]] = 0.0
                idx_minus = jump.get_local_dof_indices_minus()
                keep = coupling != 0.0
                rows = np.repeat(idx, len(idx)).reshape(len(idx), -1)[keep]
                cols = np.tile(idx_minus, (len(idx), 1))[keep]
                A.add_values(rows, cols, coupling[keep])
            elif m == 0:
                rhs[idx] += plus.T @ (wx * jump.get_trace_values(initial_trace))
    return SlabSystem(slab, A, rhs, np.asarray(initial_trace, dtype=float))


def dirichlet_indices(slab: Slab) -> np.ndarray:
    bx = slab.spatial.boundary_dofs
    return (bx[None, :] + slab.N_x * np.arange(slab.N_t)[:, None]).ravel()


def dirichlet_values(slab: Slab, g: Field) -> np.ndarray:
    """``g`` at boundary nodes and temporal DoF times, ordered like :func:`dirichlet_indices`."""
    bx = slab.spatial.boundary_dofs
    pts = slab.spatial.support_points[bx]
    times = slab.dof_times()
    return np.asarray(g(times[:, None], pts[None, :, :]), dtype=float).ravel()


def eliminate_rows(A: CsrMatrix, rows: np.ndarray) -> CsrMatrix:
    """Copy of ``A`` with the given rows and columns replaced by identity."""
    out = A.copy()
    mask = np.zeros(A.shape[0], dtype=bool)
    mask[rows] = True
    prow = A.pattern.rows
    pcol = A.pattern.indices
    out.data[mask[prow] | mask[pcol]] = 0.0
    out.data[A.pattern.positions(rows, rows)] = 1.0
    return out


def eliminate_rhs(A: CsrMatrix, rhs: np.ndarray, rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    lifted = np.zeros(A.shape[0])
    lifted[rows] = values
    out = rhs - A.spmv(lifted)
    out[rows] = values
    return out


def apply_dirichlet(system: SlabSystem, slab: Slab, g: Field) -> None:
    """Impose ``g`` at boundary nodes by symmetric row/column elimination."""
    rows = dirichlet_indices(slab)
    vals = dirichlet_values(slab, g)
    system.rhs = eliminate_rhs(system.matrix, system.rhs, rows, vals)
    system.matrix = eliminate_rows(system.matrix, rows)


def extract_final_trace(slab: Slab, solution: np.ndarray) -> np.ndarray:
    """Limit from below at the slab's end time, one value per spatial DoF."""
    n = slab.basis.n_dofs
    U = np.asarray(solution).reshape(slab.N_t, slab.N_x)
    return slab.basis.limit_right @ U[-n:]


class SlabSolver:
    """Solves eliminated slab systems.

    ``method`` is ``"gmres"`` (ILU(0)-preconditioned, falling back to dense
    LU below ``dense_cap`` unknowns), ``"direct"`` (sparse LU) or
    ``"dense"``.
    """

    def __init__(self, method: str = "gmres", rtol: float = 1e-12, max_iter: int = 5000, restart: int = 50, dense_cap: int = 5000):
        if method not in ("gmres", "direct", "dense"):
            raise ValueError(f"unknown solver {method!r}")
        self.method = method
        self.rtol = rtol
        self.max_iter = max_iter
        self.restart = restart
        self.dense_cap = dense_cap
        self.iterations: list[int] = []

    def prepare(self, A: CsrMatrix):
        if self.method == "gmres":
            return ILU0(A)
        if self.method == "direct":
            import scipy.sparse.linalg as spla

            return spla.splu(A.to_scipy().tocsc())
        return None

    def solve(self, A: CsrMatrix, b: np.ndarray, prepared=None) -> np.ndarray:
        if self.method == "direct":
            x, its = (prepared or self.prepare(A)).solve(b), 0
        elif self.method == "dense":
            x, its = solve_dense_lu(A.to_dense(), b), 0
        else:
            try:
                x, its = solve_gmres_ilu0(
                    A, b, rtol=self.rtol, max_iter=self.max_iter, restart=self.restart, preconditioner=prepared
                )
            except SolverError:
                if A.shape[0] > self.dense_cap:
                    raise
                log.warning("GMRES failed; falling back to dense LU on %d unknowns", A.shape[0])
                x, its = solve_dense_lu(A.to_dense(), b), 0
        self.iterations.append(its)
        return x


class SlabFailure(SolverError):
    def __init__(self, slab_index: int, cause: Exception):
        super().__init__(f"solve failed on slab {slab_index}: {cause}")
        self.slab_index = slab_index


def march(
    tri: SpaceTimeTriangulation,
    ms: ManufacturedSolution,
    u0: np.ndarray | None = None,
    solver: SlabSolver | None = None,
    assembler: SlabAssembler | None = None,
) -> list[np.ndarray]:
    """Solve all slabs forward in time and return their solution vectors.

    ``u0`` defaults to the nodal interpolant of the exact solution at t = 0.
    Boundary values are taken from ``ms.value``.
    """
    assembler = assembler or SlabAssembler(tri.spatial, tri.basis)
    solver = solver or SlabSolver()
    trace = tri.spatial.interpolate(ms.initial) if u0 is None else np.asarray(u0, dtype=float)
    # slabs of equal shape share matrix, elimination and preconditioner
    operators: dict = {}
    solutions = []
    for slab in tri:
        rows = dirichlet_indices(slab)
        key = slab.signature()
        if key not in operators:
            A = assembler.matrix(slab)
            A_elim = eliminate_rows(A, rows)
            operators[key] = (A, A_elim, solver.prepare(A_elim))
        A, A_elim, prepared = operators[key]
        rhs = assembler.load(slab, ms.rhs) + assembler.initial_term(slab, trace)
        rhs = eliminate_rhs(A, rhs, rows, dirichlet_values(slab, ms.value))
        try:
            u = solver.solve(A_elim, rhs, prepared)
        except (SolverError, np.linalg.LinAlgError) as exc:
            raise SlabFailure(slab.index, exc) from exc
        solutions.append(u)
        trace = extract_final_trace(slab, u)
    return solutions


def l2_l2_error(tri: SpaceTimeTriangulation, solutions: list[np.ndarray], ms: ManufacturedSolution) -> float:
    """Space-time L2 norm of ``u_kh - u`` with one extra quadrature order."""
    basis = tri.basis
    element = tri.spatial.element
    quad = SpatialAssembler(tri.spatial, n_points=element.degree + 3)
    tq = TemporalQuadrature.gauss(basis.degree + 3)
    phi_t = basis.values(tq.points)
    points = quad.physical_points()
    jxw = quad.jxw()
    cell_dofs = tri.spatial.cell_dofs
    n = basis.n_dofs
    total = 0.0
    for slab, u in zip(tri, solutions):
        U = np.asarray(u).reshape(slab.N_t, slab.N_x)
        for m, (t0, k) in enumerate(zip(slab.breaks[:-1], slab.lengths)):
            coeff = U[m * n : (m + 1) * n][:, cell_dofs]  # (r+1, nc, nloc)
            uh = np.einsum("ti,xa,ica->tcx", phi_t, quad.phi, coeff, optimize=True)
            times = t0 + k * tq.points
            exact = ms.value(times[:, None, None], points[None, :, :, :])
            total += float(np.einsum("tcx,t,cx->", (uh - exact) ** 2, tq.weights * k, jxw))
    return math.sqrt(total)


def eoc(errors, mesh_sizes) -> list[float]:
    """Observed orders ``log(e_{i-1}/e_i) / log(h_{i-1}/h_i)``; first entry is NaN."""
    errors = np.asarray(errors, dtype=float)
    sizes = np.asarray(mesh_sizes, dtype=float)
    if errors.shape != sizes.shape:
        raise ValueError("errors and mesh sizes must have equal length")
    if np.any(errors <= 0.0) or np.any(sizes <= 0.0):
        raise ValueError("errors and mesh sizes must be positive")
    out = [float("nan")]
    for i in range(1, len(errors)):
        out.append(float(np.log(errors[i - 1] / errors[i]) / np.log(sizes[i - 1] / sizes[i])))
    return out


def evaluate_at_time(tri: SpaceTimeTriangulation, solutions: list[np.ndarray], t: float) -> np.ndarray:
    """Nodal spatial values of the discrete solution at time ``t`` (limit from below at breaks)."""
    slab, m = tri.locate(t)
    U = np.asarray(solutions[slab.index]).reshape(slab.N_t, slab.N_x)
    k = slab.lengths[m]
    tau = (t - slab.breaks[m]) / k
    n = slab.basis.n_dofs
    return slab.basis.values(np.clip(tau, 0.0, 1.0))[0] @ U[m * n : (m + 1) * n]


def interpolate_spacetime(slab: Slab, func: Field) -> np.ndarray:
    """Nodal interpolant of ``func(t, x)`` in the slab's space-time space."""
    times = slab.dof_times()
    pts = slab.spatial.support_points
    return np.asarray(func(times[:, None], pts[None, :, :]), dtype=float).ravel()
