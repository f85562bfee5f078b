"""End-to-end acceptance checks, one test per criterion.

Run on its own with ``pytest tests/test_acceptance.py -v``; the terminal
summary lists one PASS/FAIL line per criterion.
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from golden_patterns import GOLDEN
from helpers import bilinear_load, bubble, forced_problem, make_tri, piecewise_load, step_constants
from oracles import backward_euler, lattice_permutation

from stslab.heat import SlabSolver, hartmann_solution, march
from stslab.slab import temporal_pattern
from stslab.study import StudyConfig, run_study, run_support_type_comparison
from stslab.temporal_fe import SupportType, TemporalBasis

TESTS = Path(__file__).parent


def note(record_property, detail):
    record_property("detail", detail)


@pytest.mark.criterion(1, "temporal sparsity patterns equal the four reference 6x6 patterns")
def test_golden_sparsity_patterns(record_property):
    start = time.perf_counter()
    for family in SupportType:
        assert temporal_pattern(3, TemporalBasis(1, family)).pairs() == GOLDEN[family.value], family
    elapsed = time.perf_counter() - start
    note(record_property, f"{elapsed:.3f}s")
    assert elapsed < 1.0


@pytest.mark.criterion(2, "slab decoupling: N_max in {0,1,2,4} agree to 1e-8")
def test_slab_decoupling(record_property):
    start = time.perf_counter()
    ms = hartmann_solution()
    runs = {}
    for nmax in (0, 1, 2, 4):
        tri = make_tri(3, 1, 1, 8, nmax=nmax)
        runs[nmax] = np.concatenate(march(tri, ms, solver=SlabSolver("gmres", rtol=1e-13)))
    diff = max(np.max(np.abs(runs[n] - runs[0])) for n in (1, 2, 4))
    elapsed = time.perf_counter() - start
    note(record_property, f"max diff {diff:.2e}, {elapsed:.1f}s")
    assert diff <= 1e-8
    assert elapsed < 30.0


@pytest.mark.criterion(3, "dG(0) matches an independent implicit Euler to 1e-10")
def test_backward_euler_equivalence(record_property):
    start = time.perf_counter()
    n, M = 8, 16
    worst = 0.0
    for family in SupportType:
        tri = make_tri(3, 1, 0, M, family=family, nmax=1)
        ms = forced_problem(bubble, piecewise_load(M))
        ours = np.concatenate(march(tri, ms, solver=SlabSolver("gmres", rtol=1e-14))).reshape(M, -1)
        perm = lattice_permutation(tri.spatial.support_points, n)
        u0 = np.zeros((n + 1) ** 2)
        u0[perm] = tri.spatial.interpolate(bubble)
        load = np.zeros_like(u0)
        load[perm] = tri.spatial.interpolate(bilinear_load)
        ref = backward_euler(n, M, 1.0, u0, load, step_constants(M))[:, perm]
        worst = max(worst, float(np.max(np.abs(ours - ref))))
    elapsed = time.perf_counter() - start
    note(record_property, f"max diff {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10.0


@pytest.mark.slow
@pytest.mark.criterion(4, "spatial EOC: s=1 in [1.8,2.2], s=2 in [2.7,3.3]")
def test_spatial_eoc(record_property):
    start = time.perf_counter()
    rates = {}
    for s in (1, 2):
        cfg = StudyConfig(s=s, r=2, M=128, spatial_refinements=3, steps=3, refine_mode="h", nmax=1)
        rows = run_study(cfg)
        assert [r.Nx for r in rows] == [(s * n + 1) ** 2 for n in (8, 16, 32, 64)]
        rates[s] = rows[-1].eoc
    elapsed = time.perf_counter() - start
    note(record_property, f"EOC s=1 {rates[1]:.3f}, s=2 {rates[2]:.3f}, {elapsed:.0f}s")
    assert 1.8 <= rates[1] <= 2.2
    assert 2.7 <= rates[2] <= 3.3
    assert elapsed < 600.0


@pytest.mark.criterion(5, "temporal EOC: r=0 in [0.8,1.2], r=1 in [1.8,2.2]")
def test_temporal_eoc(record_property):
    start = time.perf_counter()
    rates = {}
    for r in (0, 1):
        cfg = StudyConfig(s=2, r=r, M=4, spatial_refinements=5, steps=3, refine_mode="k", nmax=1)
        rows = run_study(cfg)
        assert [row.M for row in rows] == [4, 8, 16, 32]
        rates[r] = rows[-1].eoc
    elapsed = time.perf_counter() - start
    note(record_property, f"EOC r=0 {rates[0]:.3f}, r=1 {rates[1]:.3f}, {elapsed:.0f}s")
    assert 0.8 <= rates[0] <= 1.2
    assert 1.8 <= rates[1] <= 2.2
    assert elapsed < 600.0


@pytest.mark.criterion(6, "support-type ordering RL <= Le <= RR <= Lo, ratios in (0.9,1] and increasing")
def test_support_type_ordering(record_property):
    start = time.perf_counter()
    cfg = StudyConfig(s=1, r=1, M=8, spatial_refinements=4, steps=2, refine_mode="k", nmax=1)
    table = run_support_type_comparison(cfg)
    elapsed = time.perf_counter() - start
    summary = "; ".join(
        "/".join(f"{100 * e[t]:.2f}" for t in ("radau-left", "legendre", "radau-right")) for e in table
    )
    note(record_property, f"RL/Le/RR % per level: {summary}, {elapsed:.0f}s")
    assert len(table) == 3
    for e in table:
        assert e["radau-left"] <= e["legendre"] <= e["radau-right"] <= 1.0
        for t in ("radau-left", "legendre", "radau-right"):
            assert 0.9 < e[t] <= 1.0
    for t in ("radau-left", "legendre", "radau-right"):
        ratios = [e[t] for e in table]
        assert all(a < b for a, b in zip(ratios, ratios[1:])), t
    assert elapsed < 600.0


# invariant/property tests of every module
PROPERTY_TESTS = [
    "test_temporal_fe.py::test_node_invariants",
    "test_temporal_fe.py::test_nodal_and_partition_of_unity",
    "test_temporal_fe.py::test_integration_by_parts_identity",
    "test_temporal_fe.py::test_nodes_give_rule_of_expected_exactness",
    "test_spatial_fe.py::test_element_nodal_and_partition_of_unity",
    "test_spatial_fe.py::test_interpolation_reproduces_polynomials",
    "test_spatial_fe.py::test_stiffness_annihilates_constants_and_mass_sums_to_measure",
    "test_spatial_fe.py::test_sparsity_symmetric",
    "test_spatial_fe.py::test_cells_tile_unit_cube",
    "test_slab.py::test_pattern_covers_assembled_temporal_blocks",
    "test_slab.py::test_golden_temporal_patterns",
    "test_slab.py::test_pattern_monotonicity_r1",
    "test_slab.py::test_partition_round_trip_and_links",
    "test_slab.py::test_time_iterators_stay_aligned",
    "test_st_values.py::test_interpolation_exactness_for_products",
    "test_st_values.py::test_time_derivative_integral_telescopes",
    "test_st_values.py::test_local_dof_indices_injective_and_consistent",
    "test_st_values.py::test_jump_of_time_continuous_function_vanishes",
    "test_st_values.py::test_kronecker_assembly_matches_cell_loop",
    "test_st_values.py::test_quadrature_weights_sum_to_one",
    "test_linalg.py::test_gmres_matches_dense_lu_on_slab_system",
    "test_linalg.py::test_ilu0_factors_reproduce_matrix_on_pattern",
    "test_linalg.py::test_preconditioner_application_on_random_vectors",
    "test_linalg.py::test_add_entry_accumulates_and_rejects_outside_pattern",
    "test_heat.py::test_hartmann_consistency_by_finite_differences",
    "test_heat.py::test_backward_euler_equivalence",
    "test_heat.py::test_slab_size_invariance",
    "test_heat.py::test_solve_residual_smoke",
    "test_heat.py::test_dirichlet_rows_exact_after_solve",
    "test_study_cli.py::test_dof_accounting_and_levels",
    "test_study_cli.py::test_cli_rerun_is_bit_identical",
]


@pytest.mark.criterion(7, "module property suites pass")
def test_property_suites(record_property):
    start = time.perf_counter()
    ids = [str(TESTS / t) for t in PROPERTY_TESTS]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids], capture_output=True, text=True, cwd=TESTS.parent
    )
    elapsed = time.perf_counter() - start
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    note(record_property, f"{tail}, {elapsed:.0f}s")
    assert proc.returncode == 0, proc.stdout[-3000:]
    assert elapsed < 120.0


@pytest.mark.criterion(8, "manufactured solution: f + lap u - dt u = 0 at 1000 points to 1e-9")
def test_manufactured_consistency(record_property):
    start = time.perf_counter()
    ms = hartmann_solution()
    rng = np.random.default_rng(2024)
    t = rng.random(1000)
    x = rng.random((1000, 2))
    # second-order differences as the independent reference for the derivatives
    step = 1e-5
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])
    dt_fd = (ms.value(t + step, x) - ms.value(t - step, x)) / (2 * step)
    h = 1e-4
    hx, hy = np.array([h, 0.0]), np.array([0.0, h])
    lap_fd = (ms.value(t, x + hx) + ms.value(t, x - hx) + ms.value(t, x + hy) + ms.value(t, x - hy) - 4 * ms.value(t, x)) / h**2
    residual = np.max(np.abs(ms.rhs(t, x) + ms.laplacian(t, x) - ms.dt(t, x)))
    fd_gap = np.max(np.abs(dt_fd - lap_fd - ms.rhs(t, x)) / np.maximum(np.abs(ms.rhs(t, x)), 1.0))
    elapsed = time.perf_counter() - start
    note(record_property, f"residual {residual:.1e}, FD gap {fd_gap:.1e}, {elapsed:.3f}s")
    assert residual <= 1e-9
    assert fd_gap <= 1e-3
    assert elapsed < 1.0
