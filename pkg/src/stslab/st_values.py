"""Space-time element evaluation on one (cell, interval) pair.

Local space-time DoFs follow the same space-major rule as the global
numbering, ``i = i_x + n_x * i_t`` with ``n_x`` the spatial DoFs per cell,
and quadrature points are ordered ``q = q_x + n_qx * q_t``.

Typical use mirrors a cell loop with an inner loop over intervals::

    fev = StFeValues(basis, element)
    for cell in range(mesh.n_cells):
        fev.reinit_space(dof, cell)
        for m in range(slab.n_intervals):
            fev.reinit_time(slab, m)
            ...
"""
from __future__ import annotations

import numpy as np

from .slab import Slab
from .spatial_fe import QLagrangeElement, SpatialDoFHandler, gauss_rule
from .temporal_fe import TemporalBasis, TemporalQuadrature


class NotReinitializedError(RuntimeError):
    pass


class StQuadrature:
    """Tensor product of a temporal and a spatial Gauss rule on (0,1)^(1+d)."""

    def __init__(self, n_time: int | TemporalQuadrature, n_space: int, dim: int):
        self.time = n_time if isinstance(n_time, TemporalQuadrature) else TemporalQuadrature.gauss(n_time)
        self.space_points, self.space_weights = gauss_rule(n_space, dim)
        self.dim = dim

    @property
    def n_time(self) -> int:
        return self.time.size

    @property
    def n_space(self) -> int:
        return len(self.space_weights)

    @property
    def size(self) -> int:
        return self.n_time * self.n_space

    @property
    def weights(self) -> np.ndarray:
        return (self.time.weights[:, None] * self.space_weights[None, :]).ravel()

    def split(self, q: int) -> tuple[int, int]:
        return q % self.n_space, q // self.n_space


def get_local_dof_indices(slab: Slab, cell: int, m: int) -> np.ndarray:
    """Global slab indices of the local DoFs of ``(cell, interval m)``."""
    spatial = slab.spatial.local_dof_indices(cell)
    i_t = slab.temporal_offset(m) + np.arange(slab.basis.n_dofs)
    return (spatial[None, :] + slab.N_x * i_t[:, None]).ravel()


class StFeValues:
    """Shape values, derivatives and weights on the current space-time element."""

    def __init__(self, basis: TemporalBasis, element: QLagrangeElement, quadrature: StQuadrature | None = None):
        self.basis = basis
        self.element = element
        self.quadrature = quadrature or StQuadrature(basis.degree + 2, element.degree + 2, element.dim)
        q = self.quadrature
        self._phi_t = basis.values(q.time.points)  # (nqt, r+1)
        self._dphi_t = basis.derivatives(q.time.points)
        self._phi_x = element.values(q.space_points)  # (nqx, nloc)
        self._ref_grad_x = element.gradients(q.space_points)  # (nqx, nloc, dim)
        self._cell = None
        self._interval = None

    # -- geometry ------------------------------------------------------------

    def reinit_space(self, dof: SpatialDoFHandler, cell: int) -> None:
        mesh = dof.mesh
        h = mesh.cell_size(cell)
        if np.any(h <= 0.0):
            raise ValueError(f"degenerate cell {cell}")
        self._dof = dof
        self._cell = cell
        self._spatial_indices = dof.local_dof_indices(cell)
        self._det_j = float(np.prod(h))
        self._grad_x = self._ref_grad_x / h[None, None, :]
        self._x_points = mesh.cell_origin(cell)[None, :] + self.quadrature.space_points * h[None, :]

    def reinit_time(self, slab: Slab, m: int) -> None:
        if not 0 <= m < slab.n_intervals:
            raise IndexError(f"interval {m} outside slab with {slab.n_intervals} intervals")
        self._slab = slab
        self._interval = m
        self._t0 = float(slab.breaks[m])
        self._k = float(slab.breaks[m + 1] - slab.breaks[m])
        self._t_points = self._t0 + self._k * self.quadrature.time.points

    def _require(self) -> None:
        if self._cell is None or self._interval is None:
            raise NotReinitializedError("call reinit_space and reinit_time first")

    @property
    def n_space_dofs(self) -> int:
        return self.element.n_dofs

    @property
    def n_dofs(self) -> int:
        return self.basis.n_dofs * self.element.n_dofs

    @property
    def n_quadrature_points(self) -> int:
        return self.quadrature.size

    def _split(self, i: int, q: int) -> tuple[int, int, int, int]:
        if not 0 <= i < self.n_dofs:
            raise IndexError(f"local DoF {i} out of range")
        if not 0 <= q < self.n_quadrature_points:
            raise IndexError(f"quadrature point {q} out of range")
        n = self.n_space_dofs
        qx, qt = self.quadrature.split(q)
        return i % n, i // n, qx, qt

    def time_quadrature_point(self, q: int) -> float:
        self._require()
        return float(self._t_points[self.quadrature.split(q)[1]])

    def space_quadrature_point(self, q: int) -> np.ndarray:
        self._require()
        return self._x_points[self.quadrature.split(q)[0]]

    @property
    def interval_length(self) -> float:
        return self._k

    # -- per-entry evaluation --------------------------------------------------

    def shape_value(self, i: int, q: int) -> float:
        self._require()
        ix, it, qx, qt = self._split(i, q)
        return float(self._phi_t[qt, it] * self._phi_x[qx, ix])

    def shape_dt(self, i: int, q: int) -> float:
        self._require()
        ix, it, qx, qt = self._split(i, q)
        return float(self._dphi_t[qt, it] * self._phi_x[qx, ix] / self._k)

    def shape_space_grad(self, i: int, q: int) -> np.ndarray:
        self._require()
        ix, it, qx, qt = self._split(i, q)
        return self._phi_t[qt, it] * self._grad_x[qx, ix]

    def JxW(self, q: int) -> float:
        self._require()
        qx, qt = self.quadrature.split(q)
        return float(self.quadrature.time.weights[qt] * self._k * self.quadrature.space_weights[qx] * self._det_j)

    # -- whole-table evaluation ------------------------------------------------

    def value_table(self) -> np.ndarray:
        """``(n_q, n_dofs)`` with rows ordered like ``q`` and columns like ``i``."""
        self._require()
        return np.einsum("ti,xa->txia", self._phi_t, self._phi_x).reshape(self.n_quadrature_points, self.n_dofs)

    def dt_table(self) -> np.ndarray:
        self._require()
        t = np.einsum("ti,xa->txia", self._dphi_t, self._phi_x) / self._k
        return t.reshape(self.n_quadrature_points, self.n_dofs)

    def grad_table(self) -> np.ndarray:
        self._require()
        g = np.einsum("ti,xad->txiad", self._phi_t, self._grad_x)
        return g.reshape(self.n_quadrature_points, self.n_dofs, self.element.dim)

    def jxw_table(self) -> np.ndarray:
        self._require()
        return (self.quadrature.time.weights[:, None] * self._k * self.quadrature.space_weights[None, :] * self._det_j).ravel()

    def quadrature_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical ``(t, x)`` of all points, shapes ``(n_q,)`` and ``(n_q, dim)``."""
        self._require()
        nqx = self.quadrature.n_space
        return np.repeat(self._t_points, nqx), np.tile(self._x_points, (self.quadrature.n_time, 1))

    # -- global mapping and function evaluation --------------------------------

    def get_local_dof_indices(self) -> np.ndarray:
        self._require()
        return get_local_dof_indices(self._slab, self._cell, self._interval)

    def _local_coefficients(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape[0] != self._slab.n_dofs:
            raise ValueError(f"vector of length {u.shape[0]} does not match slab with {self._slab.n_dofs} DoFs")
        return u[self.get_local_dof_indices()]

    def get_function_values(self, u: np.ndarray) -> np.ndarray:
        return self.value_table() @ self._local_coefficients(u)

    def get_function_dt(self, u: np.ndarray) -> np.ndarray:
        return self.dt_table() @ self._local_coefficients(u)

    def get_function_space_gradients(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("qid,i->qd", self.grad_table(), self._local_coefficients(u))


class StJumpValues:
    """One-sided temporal limits at the lower end of interval ``m``.

    ``shape_value_plus`` evaluates the limit from above of the DoFs of
    interval ``m`` and ``shape_value_minus`` the limit from below of the DoFs
    of interval ``m - 1``.  Both are indexed by the local space-time index of
    the respective interval and by a spatial quadrature point.
    """

    def __init__(self, basis: TemporalBasis, element: QLagrangeElement, n_space_points: int | None = None):
        self.basis = basis
        self.element = element
        self.points, self.weights = gauss_rule(n_space_points or element.degree + 2, element.dim)
        self._phi_x = element.values(self.points)
        self._cell = None
        self._interval = None

    def reinit_space(self, dof: SpatialDoFHandler, cell: int) -> None:
        h = dof.mesh.cell_size(cell)
        self._dof = dof
        self._cell = cell
        self._det_j = float(np.prod(h))

    def reinit_time(self, slab: Slab, m: int) -> None:
        if not 0 <= m < slab.n_intervals:
            raise IndexError(f"interval {m} outside slab with {slab.n_intervals} intervals")
        self._slab = slab
        self._interval = m

    @property
    def has_minus(self) -> bool:
        """Whether the earlier interval lies in the same slab."""
        return self._interval is not None and self._interval > 0

    @property
    def n_dofs(self) -> int:
        return self.basis.n_dofs * self.element.n_dofs

    @property
    def n_quadrature_points(self) -> int:
        return len(self.weights)

    def _split(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.n_dofs:
            raise IndexError(f"local DoF {i} out of range")
        n = self.element.n_dofs
        return i % n, i // n

    def shape_value_plus(self, i: int, q: int) -> float:
        ix, it = self._split(i)
        return float(self.basis.limit_left[it] * self._phi_x[q, ix])

    def shape_value_minus(self, i: int, q: int) -> float:
        ix, it = self._split(i)
        return float(self.basis.limit_right[it] * self._phi_x[q, ix])

    def plus_table(self) -> np.ndarray:
        return np.einsum("i,xa->xia", self.basis.limit_left, self._phi_x).reshape(self.n_quadrature_points, self.n_dofs)

    def minus_table(self) -> np.ndarray:
        return np.einsum("i,xa->xia", self.basis.limit_right, self._phi_x).reshape(self.n_quadrature_points, self.n_dofs)

    def JxW(self, q: int) -> float:
        return float(self.weights[q] * self._det_j)

    def jxw_table(self) -> np.ndarray:
        return self.weights * self._det_j

    def spatial_values(self) -> np.ndarray:
        return self._phi_x

    def get_local_dof_indices_plus(self) -> np.ndarray:
        return get_local_dof_indices(self._slab, self._cell, self._interval)

    def get_local_dof_indices_minus(self) -> np.ndarray:
        if not self.has_minus:
            raise IndexError("no earlier interval inside this slab")
        return get_local_dof_indices(self._slab, self._cell, self._interval - 1)

    def get_function_plus(self, u: np.ndarray) -> np.ndarray:
        return self.plus_table() @ np.asarray(u)[self.get_local_dof_indices_plus()]

    def get_function_minus(self, u: np.ndarray) -> np.ndarray:
        return self.minus_table() @ np.asarray(u)[self.get_local_dof_indices_minus()]

    def get_trace_values(self, trace: np.ndarray) -> np.ndarray:
        """Evaluate a spatial vector (e.g. the slab's initial value) at the points."""
        return self._phi_x @ np.asarray(trace)[self._dof.local_dof_indices(self._cell)]
