"""Temporal meshing, slab collections and space-major DoF numbering.

A slab couples a run of consecutive temporal intervals with the fixed
spatial discretisation.  Space-time DoFs of a slab are numbered
``i = i_x + N_x * i_t`` so every temporal DoF owns a contiguous block of
spatial DoFs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import SparsityPattern
from .spatial_fe import SpatialDoFHandler
from .temporal_fe import TemporalBasis

JUMP_THRESHOLD = 1e-13


@dataclass(frozen=True)
class TemporalMesh:
    breaks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0.0):
            raise ValueError("temporal break points must be strictly increasing")
        object.__setattr__(self, "breaks", b)

    @property
    def n_intervals(self) -> int:
        return len(self.breaks) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    @property
    def T(self) -> float:
        return float(self.breaks[-1])

    def interval(self, m: int) -> tuple[float, float]:
        return float(self.breaks[m]), float(self.breaks[m + 1])

    def refine(self) -> "TemporalMesh":
        mids = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        out = np.empty(2 * self.n_intervals + 1)
        out[0::2] = self.breaks
        out[1::2] = mids
        return TemporalMesh(out)


def make_temporal_mesh(T: float, M: int) -> TemporalMesh:
    if M < 1:
        raise ValueError("need at least one temporal interval")
    if T <= 0.0:
        raise ValueError("end time must be positive")
    return TemporalMesh(np.linspace(0.0, T, M + 1))


@dataclass(eq=False)
class Slab:
    """Consecutive temporal intervals paired with the shared spatial DoFs."""

    intervals: list[int]
    breaks: np.ndarray
    basis: TemporalBasis
    spatial: SpatialDoFHandler
    index: int = 0
    prev: "Slab | None" = field(default=None, repr=False)
    next: "Slab | None" = field(default=None, repr=False)

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def start(self) -> float:
        return float(self.breaks[0])

    @property
    def end(self) -> float:
        return float(self.breaks[-1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    @property
    def N_t(self) -> int:
        return self.n_intervals * self.basis.n_dofs

    @property
    def N_x(self) -> int:
        return self.spatial.n_dofs

    @property
    def n_dofs(self) -> int:
        return self.N_t * self.N_x

    def temporal_offset(self, m: int) -> int:
        """Index of the first temporal DoF of local interval ``m``."""
        return m * self.basis.n_dofs

    def dof_times(self) -> np.ndarray:
        """Physical time of each temporal DoF, length ``N_t``."""
        k = self.lengths
        return (self.breaks[:-1, None] + k[:, None] * self.basis.nodes[None, :]).ravel()

    def signature(self) -> tuple:
        """Key identifying slabs whose matrices coincide."""
        return (self.n_intervals, tuple(np.round(self.lengths, 15)))


class SpaceTimeTriangulation:
    """Ordered, doubly linked slabs covering (0, T).

    ``N_max = 0`` keeps all intervals in one slab; otherwise slabs hold at
    most ``N_max`` intervals, filled greedily from the front.
    """

    def __init__(self, mesh: TemporalMesh, spatial: SpatialDoFHandler, basis: TemporalBasis, N_max: int = 0):
        if N_max < 0:
            raise ValueError("N_max must be non-negative")
        self.mesh = mesh
        self.spatial = spatial
        self.basis = basis
        self.N_max = N_max
        M = mesh.n_intervals
        size = M if N_max == 0 else N_max
        self.slabs: list[Slab] = []
        for idx, lo in enumerate(range(0, M, size)):
            ids = list(range(lo, min(lo + size, M)))
            self.slabs.append(Slab(ids, mesh.breaks[ids[0] : ids[-1] + 2], basis, spatial, idx))
        for a, b in zip(self.slabs, self.slabs[1:]):
            a.next, b.prev = b, a

    @property
    def first(self) -> Slab:
        return self.slabs[0]

    @property
    def last(self) -> Slab:
        return self.slabs[-1]

    def __len__(self) -> int:
        return len(self.slabs)

    def __iter__(self):
        slab = self.first
        while slab is not None:
            yield slab
            slab = slab.next

    def __reversed__(self):
        slab = self.last
        while slab is not None:
            yield slab
            slab = slab.prev

    def __getitem__(self, i: int) -> Slab:
        return self.slabs[i]

    @property
    def n_dofs(self) -> int:
        return sum(s.n_dofs for s in self.slabs)

    def locate(self, t: float) -> tuple[Slab, int]:
        """Slab and local interval containing ``t`` (right-closed intervals)."""
        m = int(np.clip(np.searchsorted(self.mesh.breaks, t, side="left") - 1, 0, self.mesh.n_intervals - 1))
        for slab in self.slabs:
            if slab.intervals[0] <= m <= slab.intervals[-1]:
                return slab, m - slab.intervals[0]
        raise ValueError(f"time {t} outside the temporal mesh")


def partition_into_slabs(mesh: TemporalMesh, N_max: int, spatial: SpatialDoFHandler, basis: TemporalBasis) -> SpaceTimeTriangulation:
    return SpaceTimeTriangulation(mesh, spatial, basis, N_max)


def refine_temporal(tri: SpaceTimeTriangulation) -> SpaceTimeTriangulation:
    return SpaceTimeTriangulation(tri.mesh.refine(), tri.spatial, tri.basis, tri.N_max)


def st_dof_index(i_x: int, i_t: int, N_x: int) -> int:
    if not 0 <= i_x < N_x or i_t < 0:
        raise IndexError(f"invalid space-time index ({i_x}, {i_t}) for N_x={N_x}")
    return i_x + N_x * i_t


def st_dof_split(i: int, N_x: int) -> tuple[int, int]:
    return i % N_x, i // N_x


def jump_coupling(basis: TemporalBasis) -> np.ndarray:
    """Boolean ``(r+1, r+1)`` mask: later-interval row i couples to earlier column j."""
    plus = np.abs(basis.limit_left) > JUMP_THRESHOLD
    minus = np.abs(basis.limit_right) > JUMP_THRESHOLD
    return plus[:, None] & minus[None, :]


def temporal_pattern(n_intervals: int, basis: TemporalBasis) -> SparsityPattern:
    """Block pattern of the temporal coupling inside one slab."""
    if n_intervals < 1:
        raise ValueError("need at least one interval")
    n = basis.n_dofs
    local = np.arange(n)
    rows, cols = [], []
    jr, jc = np.nonzero(jump_coupling(basis))
    for m in range(n_intervals):
        off = m * n
        rows.append(np.repeat(local, n) + off)
        cols.append(np.tile(local, n) + off)
        if m > 0:
            rows.append(jr + off)
            cols.append(jc + off - n)
    N_t = n_intervals * n
    return SparsityPattern.from_coo(np.concatenate(rows), np.concatenate(cols), (N_t, N_t))


def build_spacetime_sparsity(S_x: SparsityPattern, S_t: SparsityPattern, N_x: int) -> SparsityPattern:
    """Cartesian product of temporal and spatial patterns in space-major order."""
    if S_x.shape != (N_x, N_x):
        raise ValueError(f"spatial pattern has shape {S_x.shape}, expected ({N_x}, {N_x})")
    xr, xc = S_x.rows, S_x.indices
    tr, tc = S_t.rows, S_t.indices
    rows = (tr[:, None] * N_x + xr[None, :]).ravel()
    cols = (tc[:, None] * N_x + xc[None, :]).ravel()
    shape = (S_t.shape[0] * N_x, S_t.shape[1] * N_x)
    return SparsityPattern.from_coo(rows, cols, shape)


class TimeIteratorCollection:
    """Cursors over parallel slab-indexed sequences that move in lock step.

    >>> tic = TimeIteratorCollection()
    >>> tic.add_iterator(["a", "b"]); tic.add_iterator([1, 2])
    >>> tic.current()
    ('a', 1)
    """

    def __init__(self):
        self._sequences: list = []
        self._pos = 0

    def add_iterator(self, sequence) -> None:
        seq = list(sequence)
        if self._sequences and len(seq) != len(self._sequences[0]):
            raise ValueError(f"sequence length {len(seq)} differs from registered length {len(self._sequences[0])}")
        self._sequences.append(seq)

    def __len__(self) -> int:
        return len(self._sequences[0]) if self._sequences else 0

    @property
    def position(self) -> int:
        return self._pos

    def increment(self) -> None:
        self._pos += 1

    def decrement(self) -> None:
        self._pos -= 1

    def to_begin(self) -> None:
        self._pos = 0

    def to_last(self) -> None:
        self._pos = len(self) - 1

    def at_end(self) -> bool:
        return self._pos >= len(self)

    def before_begin(self) -> bool:
        return self._pos < 0

    def current(self) -> tuple:
        if self.at_end() or self.before_begin():
            raise IndexError("iterator collection is outside the slab range")
        return tuple(seq[self._pos] for seq in self._sequences)
