"""Uniform hypercube meshes on (0, 1)^d with continuous Q_s Lagrange elements."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as leg

from .linalg import SparsityPattern

MAX_SPATIAL_DEGREE = 4


@dataclass(frozen=True)
class SpatialMesh:
    """Axis-aligned uniform mesh of the unit hypercube.

    Cells are addressed by integer lattice coordinates at a refinement
    ``level``; there are ``2**level`` cells per coordinate direction and
    cell ``c`` has lattice coordinates ``cells[c]`` with x running fastest.
    """

    dim: int
    level: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"only dim 1 and 2 are supported, got {self.dim}")
        if self.level < 0:
            raise ValueError("refinement level must be non-negative")

    @property
    def n_per_dim(self) -> int:
        return 2**self.level

    @property
    def n_cells(self) -> int:
        return self.n_per_dim**self.dim

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_dim

    @cached_property
    def cells(self) -> np.ndarray:
        n = self.n_per_dim
        c = np.arange(self.n_cells)
        if self.dim == 1:
            return c[:, None]
        return np.stack([c % n, c // n], axis=1)

    @cached_property
    def vertices(self) -> np.ndarray:
        n = self.n_per_dim
        ticks = np.linspace(0.0, 1.0, n + 1)
        if self.dim == 1:
            return ticks[:, None]
        X, Y = np.meshgrid(ticks, ticks)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def cell_origin(self, cell: int) -> np.ndarray:
        return self.cells[cell] * self.h

    def cell_size(self, cell: int) -> np.ndarray:
        return np.full(self.dim, self.h)

    @cached_property
    def cell_origins(self) -> np.ndarray:
        return self.cells * self.h

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        return np.full((self.n_cells, self.dim), self.h)

    def boundary_faces(self, cell: int) -> list[tuple[int, int]]:
        """Faces of ``cell`` on the domain boundary as ``(axis, side)`` pairs."""
        out = []
        for axis, c in enumerate(self.cells[cell]):
            if c == 0:
                out.append((axis, 0))
            if c == self.n_per_dim - 1:
                out.append((axis, 1))
        return out

    def measure(self) -> float:
        return float(np.sum(np.prod(self.cell_sizes, axis=1)))


def make_hypercube_mesh(dim: int, n_refinements: int = 0) -> SpatialMesh:
    return SpatialMesh(dim=dim, level=n_refinements)


def refine_uniform(mesh: SpatialMesh) -> SpatialMesh:
    return SpatialMesh(dim=mesh.dim, level=mesh.level + 1)


def cell_jacobian(mesh: SpatialMesh, cell: int) -> tuple[float, np.ndarray]:
    """Return ``(detJ, inverse_transpose_diagonal)`` of the affine cell map."""
    h = mesh.cell_size(cell)
    if np.any(h <= 0.0):
        raise ValueError(f"degenerate cell {cell}")
    return float(np.prod(h)), 1.0 / h


def gauss_rule(n_points: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on [0, 1]^dim with x running fastest."""
    x, w = leg.leggauss(n_points)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    if dim == 1:
        return x[:, None], w
    X, Y = np.meshgrid(x, x)
    WX, WY = np.meshgrid(w, w)
    return np.stack([X.ravel(), Y.ravel()], axis=1), (WX * WY).ravel()


def _lagrange_1d(nodes: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the 1D Lagrange basis, shapes (len(x), n)."""
    n = len(nodes)
    vals = np.ones((len(x), n))
    ders = np.zeros((len(x), n))
    for a in range(n):
        others = [b for b in range(n) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        for b in others:
            vals[:, a] *= x - nodes[b]
        for skip in others:
            term = np.ones(len(x))
            for b in others:
                if b != skip:
                    term *= x - nodes[b]
            ders[:, a] += term
        vals[:, a] /= denom
        ders[:, a] /= denom
    return vals, ders


@dataclass(frozen=True)
class QLagrangeElement:
    """Tensor-product Lagrange element Q_s on the reference cell [0, 1]^dim.

    Local node ``a`` has 1D indices ``(a % (s+1), a // (s+1))`` in 2D.
    """

    degree: int
    dim: int

    def __post_init__(self):
        if not 1 <= self.degree <= MAX_SPATIAL_DEGREE:
            raise ValueError(f"spatial degree must be in 1..{MAX_SPATIAL_DEGREE}, got {self.degree}")
        if self.dim not in (1, 2):
            raise ValueError(f"only dim 1 and 2 are supported, got {self.dim}")

    @property
    def nodes_1d(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.degree + 1)

    @property
    def n_dofs(self) -> int:
        return (self.degree + 1) ** self.dim

    @cached_property
    def local_lattice(self) -> np.ndarray:
        """Integer 1D indices of each local node, shape (n_dofs, dim)."""
        p = self.degree + 1
        a = np.arange(self.n_dofs)
        if self.dim == 1:
            return a[:, None]
        return np.stack([a % p, a // p], axis=1)

    @property
    def reference_nodes(self) -> np.ndarray:
        return self.local_lattice / self.degree

    def values(self, points) -> np.ndarray:
        """Shape values at reference points, shape (n_points, n_dofs)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones((len(pts), self.n_dofs))
        for axis in range(self.dim):
            v, _ = _lagrange_1d(self.nodes_1d, pts[:, axis])
            out *= v[:, self.local_lattice[:, axis]]
        return out

    def gradients(self, points) -> np.ndarray:
        """Reference gradients, shape (n_points, n_dofs, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        per_axis = [_lagrange_1d(self.nodes_1d, pts[:, axis]) for axis in range(self.dim)]
        out = np.ones((len(pts), self.n_dofs, self.dim))
        for d in range(self.dim):
            for axis in range(self.dim):
                v, dv = per_axis[axis]
                factor = dv if axis == d else v
                out[:, :, d] *= factor[:, self.local_lattice[:, axis]]
        return out

    def shape_value(self, a: int, x) -> float:
        if not 0 <= a < self.n_dofs:
            raise IndexError(f"local index {a} out of range")
        return float(self.values(np.reshape(x, (1, self.dim)))[0, a])

    def shape_grad(self, a: int, x) -> np.ndarray:
        if not 0 <= a < self.n_dofs:
            raise IndexError(f"local index {a} out of range")
        return self.gradients(np.reshape(x, (1, self.dim)))[0, a]


class SpatialDoFHandler:
    """Continuous Q_s numbering on a uniform mesh.

    Global DoFs live on the lattice of ``s * n + 1`` points per direction,
    numbered with x fastest, so neighbouring cells share interface DoFs.
    """

    def __init__(self, mesh: SpatialMesh, element: QLagrangeElement):
        if mesh.dim != element.dim:
            raise ValueError("mesh and element dimensions differ")
        self.mesh = mesh
        self.element = element
        s, n = element.degree, mesh.n_per_dim
        self.n_lattice = s * n + 1
        lattice = mesh.cells[:, None, :] * s + element.local_lattice[None, :, :]
        strides = self.n_lattice ** np.arange(mesh.dim)
        self.cell_dofs = lattice @ strides  # (n_cells, n_local)

    @property
    def n_dofs(self) -> int:
        return self.n_lattice**self.mesh.dim

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @cached_property
    def support_points(self) -> np.ndarray:
        ticks = np.linspace(0.0, 1.0, self.n_lattice)
        if self.dim == 1:
            return ticks[:, None]
        X, Y = np.meshgrid(ticks, ticks)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def local_dof_indices(self, cell: int) -> np.ndarray:
        return self.cell_dofs[cell]

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        on_boundary = np.any(
            np.isclose(self.support_points, 0.0) | np.isclose(self.support_points, 1.0), axis=1
        )
        return np.flatnonzero(on_boundary)

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(points) -> values`` at the support points."""
        return np.asarray(func(self.support_points), dtype=float)


def boundary_dofs(dof: SpatialDoFHandler) -> np.ndarray:
    return dof.boundary_dofs


def build_spatial_sparsity(dof: SpatialDoFHandler) -> SparsityPattern:
    """Couple every pair of DoFs that share a cell."""
    n_loc = dof.cell_dofs.shape[1]
    rows = np.repeat(dof.cell_dofs, n_loc, axis=1).ravel()
    cols = np.tile(dof.cell_dofs, (1, n_loc)).ravel()
    return SparsityPattern.from_coo(rows, cols, (dof.n_dofs, dof.n_dofs))


class SpatialAssembler:
    """Cell-batched evaluation of Q_s shape data on all cells of a mesh.

    All cells are processed at once; geometry enters only through the
    per-cell affine scaling.
    """

    def __init__(self, dof: SpatialDoFHandler, n_points: int | None = None):
        self.dof = dof
        element = dof.element
        self.points, self.weights = gauss_rule(n_points or element.degree + 2, dof.dim)
        self.phi = element.values(self.points)  # (nq, nloc)
        self.ref_grad = element.gradients(self.points)  # (nq, nloc, dim)
        sizes = dof.mesh.cell_sizes
        self.det_j = np.prod(sizes, axis=1)  # (ncells,)
        self.inv_h = 1.0 / sizes  # (ncells, dim)

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def physical_points(self) -> np.ndarray:
        """Quadrature points on every cell, shape (n_cells, nq, dim)."""
        mesh = self.dof.mesh
        return mesh.cell_origins[:, None, :] + self.points[None, :, :] * mesh.cell_sizes[:, None, :]

    def jxw(self) -> np.ndarray:
        return self.det_j[:, None] * self.weights[None, :]

    def local_mass(self) -> np.ndarray:
        return np.einsum("cq,qi,qj->cij", self.jxw(), self.phi, self.phi)

    def local_stiffness(self) -> np.ndarray:
        grads = self.ref_grad[None, :, :, :] * self.inv_h[:, None, None, :]
        return np.einsum("cq,cqid,cqjd->cij", self.jxw(), grads, grads)

    def _scatter(self, local: np.ndarray):
        import scipy.sparse as sp

        cd = self.dof.cell_dofs
        n_loc = cd.shape[1]
        rows = np.repeat(cd, n_loc, axis=1).ravel()
        cols = np.tile(cd, (1, n_loc)).ravel()
        n = self.dof.n_dofs
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    def mass_matrix(self):
        return self._scatter(self.local_mass())

    def stiffness_matrix(self):
        return self._scatter(self.local_stiffness())
