"""Discontinuous Lagrange bases on the reference interval (0, 1).

A dG(r) temporal element carries r + 1 nodal basis functions whose support
points are taken from one of four Gauss-type families.  The family decides
where the temporal degrees of freedom sit and therefore how the one-sided
limits at the element boundaries are built from them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as leg

MAX_DEGREE = 10
NEWTON_TOL = 1e-14


class SupportType(enum.Enum):
    LOBATTO = "lobatto"
    LEGENDRE = "legendre"
    RADAU_LEFT = "radau-left"
    RADAU_RIGHT = "radau-right"

    @classmethod
    def parse(cls, value: "SupportType | str") -> "SupportType":
        """Accept an enum member or a name such as ``"RadauLeft"``/``"radau-left"``."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value.replace("-", "") == key:
                return member
        raise ValueError(f"unknown support type {value!r}")


def _legendre_series(n: int) -> np.ndarray:
    c = np.zeros(n + 1)
    c[n] = 1.0
    return c


def _newton_polish(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    dcoef = leg.legder(coef)
    x = x.copy()
    for _ in range(50):
        dx = leg.legval(x, coef) / leg.legval(x, dcoef)
        x -= dx
        if np.max(np.abs(dx), initial=0.0) < NEWTON_TOL:
            break
    return x


def _roots(coef: np.ndarray) -> np.ndarray:
    # companion-matrix eigenvalues only seed the Newton iteration
    guess = np.sort(np.real(leg.legroots(coef)))
    return np.sort(_newton_polish(coef, guess))


def make_support_points(r: int, support_type: SupportType | str = SupportType.LOBATTO) -> np.ndarray:
    """Return the ``r + 1`` support points of a family, mapped to [0, 1].

    Lobatto points are the endpoints plus the roots of P_r'.  Legendre
    points are the roots of P_{r+1}.  Left Radau points are the roots of
    P_r + P_{r+1} (which include -1); right Radau points are their mirror.
    For ``r = 0`` Legendre gives the midpoint, left Radau gives 0, and both
    right Radau and Lobatto give 1 (the implicit Euler evaluation point).
    """
    support_type = SupportType.parse(support_type)
    if not isinstance(r, (int, np.integer)) or r < 0:
        raise ValueError(f"temporal degree must be a non-negative integer, got {r!r}")
    if r > MAX_DEGREE:
        raise ValueError(f"temporal degree {r} exceeds the supported maximum {MAX_DEGREE}")

    if r == 0:
        single = {
            SupportType.LOBATTO: 1.0,
            SupportType.LEGENDRE: 0.5,
            SupportType.RADAU_LEFT: 0.0,
            SupportType.RADAU_RIGHT: 1.0,
        }[support_type]
        return np.array([single])

    if support_type is SupportType.LOBATTO:
        interior = _roots(leg.legder(_legendre_series(r))) if r > 1 else np.empty(0)
        x = np.concatenate(([-1.0], interior, [1.0]))
    elif support_type is SupportType.LEGENDRE:
        x = _roots(_legendre_series(r + 1))
    else:
        coef = leg.legadd(_legendre_series(r), _legendre_series(r + 1))
        guess = np.sort(np.real(leg.legroots(coef)))
        # the root at -1 is exact; polish only the interior ones
        x = np.concatenate(([-1.0], np.sort(_newton_polish(coef, guess[1:]))))
        if support_type is SupportType.RADAU_RIGHT:
            x = -x[::-1]
    return 0.5 * (x + 1.0)


@dataclass(frozen=True)
class TemporalQuadrature:
    """Gauss-Legendre rule on (0, 1); weights sum to one."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, n_points: int) -> "TemporalQuadrature":
        if n_points < 1:
            raise ValueError("quadrature needs at least one point")
        x, w = leg.leggauss(n_points)
        return cls(points=0.5 * (x + 1.0), weights=0.5 * w)

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TemporalBasis:
    """Nodal dG(r) basis on (0, 1) evaluated in barycentric form.

    Parameters
    ----------
    degree : int
        Polynomial degree r, ``0 <= r <= 10``.
    support_type : SupportType or str
        Node family; Lobatto by default.
    """

    degree: int
    support_type: SupportType = SupportType.LOBATTO
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        st = SupportType.parse(self.support_type)
        object.__setattr__(self, "support_type", st)
        object.__setattr__(self, "nodes", make_support_points(self.degree, st))

    @property
    def n_dofs(self) -> int:
        return self.degree + 1

    @cached_property
    def barycentric_weights(self) -> np.ndarray:
        x = self.nodes
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        return 1.0 / np.prod(diff, axis=1)

    @cached_property
    def differentiation_matrix(self) -> np.ndarray:
        """``D[i, j] = phi_j'(nodes[i])``."""
        x, w = self.nodes, self.barycentric_weights
        n = len(x)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
            D[i, i] = -np.sum(D[i])
        return D

    def values(self, t) -> np.ndarray:
        """Basis values at points ``t``, shape ``(len(t), r + 1)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x, w = self.nodes, self.barycentric_weights
        if len(x) == 1:
            return np.ones((len(t), 1))
        diff = t[:, None] - x[None, :]
        exact = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = w[None, :] / diff
            out = terms / np.sum(terms, axis=1, keepdims=True)
        rows = np.any(exact, axis=1)
        out[rows] = exact[rows].astype(float)
        return out

    def derivatives(self, t) -> np.ndarray:
        """Basis derivatives at points ``t``, shape ``(len(t), r + 1)``."""
        # phi_j' has degree r - 1, so interpolating it at the nodes is exact
        return self.values(t) @ self.differentiation_matrix

    def _check_index(self, i: int) -> None:
        if not 0 <= i <= self.degree:
            raise IndexError(f"basis index {i} out of range for degree {self.degree}")

    def shape_value(self, i: int, t: float) -> float:
        self._check_index(i)
        return float(self.values(t)[0, i])

    def shape_dt(self, i: int, t: float) -> float:
        self._check_index(i)
        return float(self.derivatives(t)[0, i])

    @cached_property
    def limit_left(self) -> np.ndarray:
        """Coefficients of the limit from above at t = 0."""
        return self.values(0.0)[0]

    @cached_property
    def limit_right(self) -> np.ndarray:
        """Coefficients of the limit from below at t = 1."""
        return self.values(1.0)[0]

    def mass_matrix(self, n_points: int | None = None) -> np.ndarray:
        """``M[i, j] = int_0^1 phi_j phi_i dt``."""
        quad = TemporalQuadrature.gauss(n_points or self.degree + 2)
        phi = self.values(quad.points)
        return phi.T @ (quad.weights[:, None] * phi)

    def derivative_matrix(self, n_points: int | None = None) -> np.ndarray:
        """``D[i, j] = int_0^1 phi_j' phi_i dt``."""
        quad = TemporalQuadrature.gauss(n_points or self.degree + 2)
        phi = self.values(quad.points)
        dphi = self.derivatives(quad.points)
        return phi.T @ (quad.weights[:, None] * dphi)


def shape_value(basis: TemporalBasis, i: int, t: float) -> float:
    return basis.shape_value(i, t)


def shape_dt(basis: TemporalBasis, i: int, t: float) -> float:
    return basis.shape_dt(i, t)


def limit_left(basis: TemporalBasis) -> np.ndarray:
    return basis.limit_left


def limit_right(basis: TemporalBasis) -> np.ndarray:
    return basis.limit_right


def temporal_mass_matrix(basis: TemporalBasis) -> np.ndarray:
    return basis.mass_matrix()


def temporal_derivative_matrix(basis: TemporalBasis) -> np.ndarray:
    return basis.derivative_matrix()
