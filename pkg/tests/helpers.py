"""Small problem builders shared by the heat and acceptance tests."""
import numpy as np

from stslab.heat import ManufacturedSolution
from stslab.slab import SpaceTimeTriangulation, make_temporal_mesh
from stslab.spatial_fe import QLagrangeElement, SpatialDoFHandler, make_hypercube_mesh
from stslab.temporal_fe import TemporalBasis


def make_tri(level, s, r, M, family="lobatto", nmax=0, T=1.0):
    dof = SpatialDoFHandler(make_hypercube_mesh(2, level), QLagrangeElement(s, 2))
    return SpaceTimeTriangulation(make_temporal_mesh(T, M), dof, TemporalBasis(r, family), nmax)


def forced_problem(u0, f) -> ManufacturedSolution:
    """Problem with time-independent boundary/initial data ``u0`` and load ``f``.

    ``value`` only feeds the initial and boundary data here, so ``dt`` carries
    the load and ``laplacian`` is zero.
    """
    return ManufacturedSolution(
        value=lambda t, x: u0(x) + 0.0 * t,
        dt=f,
        gradient=lambda t, x: np.zeros(np.shape(x)),
        laplacian=lambda t, x: 0.0 * t * x[..., 0],
        name="forced",
    )


def constant_problem(c: float) -> ManufacturedSolution:
    zero = lambda t, x: 0.0 * t * x[..., 0]  # noqa: E731
    return ManufacturedSolution(
        value=lambda t, x: c + zero(t, x),
        dt=zero,
        gradient=lambda t, x: np.zeros(np.broadcast_shapes(np.shape(t) + (1,), np.shape(x))),
        laplacian=zero,
        name="constant",
    )


def bilinear_problem() -> ManufacturedSolution:
    """u = t * x1, in the discrete space for r, s >= 1."""
    return ManufacturedSolution(
        value=lambda t, x: t * x[..., 0],
        dt=lambda t, x: x[..., 0] + 0.0 * t,
        gradient=lambda t, x: np.stack(np.broadcast_arrays(t + 0 * x[..., 0], 0.0 * t * x[..., 1]), axis=-1),
        laplacian=lambda t, x: 0.0 * t * x[..., 0],
        name="t*x1",
    )


# zero on the boundary of the unit square
def bubble(x):
    return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])


def bilinear_load(x):
    return (1 + x[..., 0]) * (2 - x[..., 1])


def step_constants(M):
    return 1.0 + (np.arange(M) % 3)


def piecewise_load(M, T=1.0):
    c = step_constants(M)

    def f(t, x):
        m = np.clip(np.floor(np.asarray(t) * M / T).astype(int), 0, M - 1)
        return c[m] * bilinear_load(x)

    return f
