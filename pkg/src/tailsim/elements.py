"""Bar and rotational-spring potentials and their finite-difference stiffness.

All potentials broadcast over leading batch axes so a whole stencil of
finite-difference probes is evaluated in one call. Positions may be 2D or
3D; the element matrices are ``(n_nodes * dim)`` square.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np


class DegenerateElementError(ValueError):
    """An element whose rest or current geometry has a zero-length arm."""


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BarElement:
    node_ids: tuple[int, int]
    EA_over_L0: float
    L0: float

    def __post_init__(self):
        if not self.L0 > 0:
            raise DegenerateElementError(f"bar {self.node_ids}: L0 must be positive, got {self.L0}")
        if not self.EA_over_L0 > 0:
            raise ValueError(f"bar {self.node_ids}: EA/L0 must be positive, got {self.EA_over_L0}")


@dataclass(frozen=True)
class SpringElement:
    node_ids: tuple[int, int, int]  # vertex in the middle
    k_theta: float
    theta0: float

    def __post_init__(self):
        if not self.k_theta > 0:
            raise ValueError(f"spring {self.node_ids}: k_theta must be positive, got {self.k_theta}")
        if not 0 < self.theta0 <= np.pi:
            raise ValueError(f"spring {self.node_ids}: theta0 must lie in (0, pi], got {self.theta0}")


@dataclass(frozen=True)
class LocalStiffness:
    matrix: np.ndarray
    node_ids: tuple[int, ...]
    dim: int

    @property
    def dof_map(self) -> np.ndarray:
        """Global DoF index of every row/column of ``matrix``."""
        return np.array([n * self.dim + c for n in self.node_ids for c in range(self.dim)])


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def bar_potential(x_i, x_j, u_i, u_j, bar: BarElement) -> np.ndarray:
    """0.5 * EA/L0 * (L - L0)^2, with L0 from the rest nodes."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    L0 = _norm(x_i - x_j)
    if np.any(L0 == 0):
        raise DegenerateElementError(f"bar {bar.node_ids}: coincident rest nodes")
    L = _norm((x_i + u_i) - (x_j + u_j))
    return 0.5 * bar.EA_over_L0 * (L - L0) ** 2


def angle_at_vertex(x_i, x_j, x_k) -> np.ndarray:
    """Angle i-j-k at vertex j, from the clamped arccos of the normalised dot product."""
    a = np.asarray(x_i, dtype=float) - x_j
    b = np.asarray(x_k, dtype=float) - x_j
    na = _norm(a)
    nb = _norm(b)
    if np.any(na == 0) or np.any(nb == 0):
        raise DegenerateElementError("zero-length arm at vertex")
    c = np.sum(a * b, axis=-1) / (na * nb)
    return np.arccos(np.clip(c, -1.0, 1.0))


def spring_potential(x_i, x_j, x_k, u_i, u_j, u_k, spring: SpringElement) -> np.ndarray:
    """0.5 * k_theta * (theta - theta0)^2 with theta0 from the rest nodes."""
    theta0 = angle_at_vertex(x_i, x_j, x_k)
    theta = angle_at_vertex(
        np.asarray(x_i) + u_i, np.asarray(x_j) + u_j, np.asarray(x_k) + u_k
    )
    return 0.5 * spring.k_theta * (theta - theta0) ** 2


def element_energy(element, rest: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Energy of ``element`` as a function of its nodal displacements.

    ``rest`` holds the element's own rest nodes, shape ``(n, dim)``. The
    returned callable takes ``u`` of shape ``(..., n, dim)``.
    """
    rest = np.asarray(rest, dtype=float)
    if isinstance(element, BarElement):
        if np.linalg.norm(rest[0] - rest[1]) == 0:
            raise DegenerateElementError(f"bar {element.node_ids}: coincident rest nodes")
        return lambda u: bar_potential(rest[0], rest[1], u[..., 0, :], u[..., 1, :], element)
    if isinstance(element, SpringElement):
        if np.linalg.norm(rest[0] - rest[1]) == 0 or np.linalg.norm(rest[2] - rest[1]) == 0:
            raise DegenerateElementError(f"spring {element.node_ids}: zero-length rest arm")
        return lambda u: spring_potential(
            rest[0], rest[1], rest[2], u[..., 0, :], u[..., 1, :], u[..., 2, :], element
        )
    raise TypeError(f"unknown element type {type(element).__name__}")


def default_delta(rest: np.ndarray) -> float:
    """1e-4 of the shortest arm of the element."""
    rest = np.asarray(rest, dtype=float)
    lengths = np.linalg.norm(np.diff(rest, axis=0), axis=-1)
    return 1e-4 * float(lengths.min())


def _check_finite(values: np.ndarray, probes: np.ndarray):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"non-finite potential at probe displacement {probes[idx].tolist()}")


@lru_cache(maxsize=None)
def _hessian_stencil(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(N, k=1)
    eye = np.eye(N)
    offsets = np.concatenate(
        [
            np.zeros((1, N)),
            eye,
            -eye,
            eye[iu] + eye[ju],
            eye[iu] - eye[ju],
            -eye[iu] + eye[ju],
            -eye[iu] - eye[ju],
        ]
    )
    return offsets, iu, ju


@lru_cache(maxsize=None)
def _gradient_stencil(N: int) -> np.ndarray:
    eye = np.eye(N)
    return np.concatenate([eye, -eye])


def hessian_fd(potential, rest_positions, delta: float | None = None, at=None) -> np.ndarray:
    """Central-difference Hessian of ``potential`` w.r.t. the displacements.

    Diagonal terms use the three-point stencil, off-diagonal terms the
    four-point cross stencil, both with step ``delta``. ``at`` is the
    displacement about which to expand (zero by default).
    """
    rest = np.asarray(rest_positions, dtype=float)
    n, dim = rest.shape
    N = n * dim
    if delta is None:
        delta = default_delta(rest)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    u0 = np.zeros(N) if at is None else np.asarray(at, dtype=float).reshape(N)

    offsets, iu, ju = _hessian_stencil(N)
    probes = u0 + delta * offsets
    vals = np.asarray(potential(probes.reshape(-1, n, dim)), dtype=float)
    _check_finite(vals, probes)
    m = len(iu)
    f0 = vals[0]
    fp = vals[1 : 1 + N]
    fm = vals[1 + N : 1 + 2 * N]
    pp, pm, mp, mm = vals[1 + 2 * N :].reshape(4, m)

    H = np.empty((N, N))
    H[np.diag_indices(N)] = (fp - 2 * f0 + fm) / delta**2
    off = (pp - pm - mp + mm) / (4 * delta**2)
    H[iu, ju] = off
    H[ju, iu] = off
    return H


def gradient_fd(potential, rest_positions, delta: float | None = None, at=None) -> np.ndarray:
    """Central-difference gradient of ``potential`` w.r.t. the displacements."""
    rest = np.asarray(rest_positions, dtype=float)
    n, dim = rest.shape
    N = n * dim
    if delta is None:
        delta = default_delta(rest)
    u0 = np.zeros(N) if at is None else np.asarray(at, dtype=float).reshape(N)
    probes = u0 + delta * _gradient_stencil(N)
    vals = np.asarray(potential(probes.reshape(-1, n, dim)), dtype=float)
    _check_finite(vals, probes)
    return (vals[:N] - vals[N:]) / (2 * delta)


def element_stiffness(element, rest: np.ndarray, u=None, delta: float | None = None) -> LocalStiffness:
    """Stiffness matrix of one element, expanded about displacement ``u``."""
    rest = np.asarray(rest, dtype=float)
    H = hessian_fd(element_energy(element, rest), rest, delta, at=u)
    return LocalStiffness(H, tuple(element.node_ids), rest.shape[1])


def element_force(element, rest: np.ndarray, u, delta: float | None = None) -> np.ndarray:
    """Internal nodal force (energy gradient) of one element, flattened."""
    rest = np.asarray(rest, dtype=float)
    return gradient_fd(element_energy(element, rest), rest, delta, at=u)
