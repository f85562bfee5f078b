"""Tensor-product space-time dG finite elements on slabs for parabolic problems."""
from .heat import (
    ManufacturedSolution,
    SlabAssembler,
    SlabSolver,
    apply_dirichlet,
    assemble_slab,
    eoc,
    extract_final_trace,
    hartmann_solution,
    l2_l2_error,
    march,
)
from .linalg import CsrMatrix, SparsityPattern, solve_dense_lu, solve_gmres_ilu0
from .slab import (
    SpaceTimeTriangulation,
    TemporalMesh,
    TimeIteratorCollection,
    build_spacetime_sparsity,
    make_temporal_mesh,
    partition_into_slabs,
    refine_temporal,
    st_dof_index,
    temporal_pattern,
)
from .spatial_fe import QLagrangeElement, SpatialDoFHandler, SpatialMesh, make_hypercube_mesh, refine_uniform
from .st_values import StFeValues, StJumpValues, get_local_dof_indices
from .temporal_fe import SupportType, TemporalBasis, make_support_points

__version__ = "0.1.0"
