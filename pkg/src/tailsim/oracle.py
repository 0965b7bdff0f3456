"""Equilibrium by direct minimisation of total potential energy.

Independent of the stiffness-matrix path: the gradient is a plain central
difference of the summed energy and the search is a first-order
(Polak-Ribiere conjugate gradient) descent with Armijo backtracking, so
energy decreases monotonically over the iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TailModel

GRAD_STEP = 1e-6


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


def _angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # atan2 form stays accurate near 0 and pi, unlike arccos
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


def total_potential(model: TailModel, u, load=None) -> np.ndarray:
    """Sum of element energies minus the work of dead nodal loads.

    ``u`` has shape ``(..., N, 3)``; ``load`` is an ``(N, 3)`` force field.
    """
    x = model.nodes
    u = np.asarray(u, dtype=float)
    p = x + u
    energy = np.zeros(u.shape[:-2])
    for el in model.all_bars():
        i, j = el.node_ids
        L = np.linalg.norm(p[..., i, :] - p[..., j, :], axis=-1)
        L0 = np.linalg.norm(x[i] - x[j])
        energy = energy + 0.5 * el.EA_over_L0 * (L - L0) ** 2
    for el in model.all_springs():
        i, j, k = el.node_ids
        th = _angle(p[..., i, :] - p[..., j, :], p[..., k, :] - p[..., j, :])
        th0 = _angle(x[i] - x[j], x[k] - x[j])
        energy = energy + 0.5 * el.k_theta * (th - th0) ** 2
    if load is not None:
        energy = energy - np.einsum("...ij,ij->...", u, np.asarray(load, dtype=float))
    return energy


@dataclass
class EnergyLandscape:
    """Total potential over the free DoF.

    With ``plane`` set to a unit radial direction, every free node moves
    only in the vertical plane through that direction. A bar/angle-spring
    chain has zero-stiffness swing modes out of its bending plane, so the
    unrestrained 3D problem is only meaningful for a single joint.
    """

    model: TailModel
    load: np.ndarray
    plane: np.ndarray | None = None
    evaluations: int = 0
    free: np.ndarray = field(init=False)
    basis: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.model.n_nodes
        self.load = np.zeros((n, 3)) if self.load is None else np.asarray(self.load, dtype=float)
        fixed = self.model.fixed_node_ids
        if not fixed:
            raise ValueError("model has no fixed nodes")
        self.free = np.array([i for i in range(n) if i not in fixed])
        if self.plane is None:
            self.basis = np.eye(3)
        else:
            r = np.asarray(self.plane, dtype=float)
            r = np.array([r[0], r[1], 0.0])
            if np.linalg.norm(r) == 0:
                raise ValueError("plane direction must have a horizontal component")
            self.basis = np.array([r / np.linalg.norm(r), [0.0, 0.0, 1.0]])

    @property
    def n_dof(self) -> int:
        return len(self.free) * len(self.basis)

    def _full(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(q)
        u = np.zeros((len(q), self.model.n_nodes, 3))
        u[:, self.free] = q.reshape(len(q), len(self.free), len(self.basis)) @ self.basis
        return u

    def reduce(self, u) -> np.ndarray:
        """Free coordinates of a full ``(N, 3)`` displacement field."""
        return (np.asarray(u, dtype=float)[self.free] @ self.basis.T).reshape(-1)

    def energy(self, q) -> float:
        self.evaluations += 1
        return float(total_potential(self.model, self._full(q), self.load)[0])

    def gradient(self, q) -> np.ndarray:
        m = len(q)
        steps = np.eye(m) * GRAD_STEP
        probes = np.concatenate([q + steps, q - steps])
        self.evaluations += len(probes)
        e = total_potential(self.model, self._full(probes), self.load)
        return (e[:m] - e[m:]) / (2 * GRAD_STEP)

    def curvature(self, q, h: float = 1e-3) -> np.ndarray:
        """Central-difference Hessian of the energy, used only to scale the search."""
        m = len(q)
        eye = np.eye(m) * h
        iu, ju = np.triu_indices(m, k=1)
        probes = np.concatenate(
            [q[None], q + eye, q - eye, q + eye[iu] + eye[ju], q + eye[iu] - eye[ju],
             q - eye[iu] + eye[ju], q - eye[iu] - eye[ju]]
        )
        self.evaluations += len(probes)
        e = total_potential(self.model, self._full(probes), self.load)
        H = np.empty((m, m))
        H[np.diag_indices(m)] = (e[1 : m + 1] + e[m + 1 : 2 * m + 1] - 2 * e[0]) / h**2
        pp, pm, mp, mm = e[2 * m + 1 :].reshape(4, -1)
        H[iu, ju] = H[ju, iu] = (pp - pm - mp + mm) / (4 * h**2)
        return H


def _preconditioner(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    w = np.maximum(w, 1e-8 * max(w.max(), 1e-12))
    return (V / w) @ V.T


@dataclass
class Equilibrium:
    positions: np.ndarray
    displacement: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    energy_history: list = field(repr=False, default_factory=list)


def minimize_total_energy(
    model: TailModel,
    load=None,
    tol: float = 1e-5,
    max_iter: int = 5000,
    x0=None,
    refresh: int = 25,
    plane="auto",
) -> Equilibrium:
    """Find the equilibrium under dead nodal loads ``load`` (N, 3).

    Stops once the gradient norm drops below ``tol * (1 + |load|)``; the
    load scaling keeps the target above the round-off floor of the energy.
    ``plane="auto"`` restricts multi-joint tails to the vertical plane that
    contains the load; pass ``None`` for unrestrained 3D or a direction.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if isinstance(plane, str) and plane == "auto":
        plane = None if model.n_joints == 1 else _load_plane(model, load)
    land = EnergyLandscape(model, load, plane)
    q = np.zeros(land.n_dof) if x0 is None else land.reduce(np.asarray(x0, dtype=float) - model.nodes)
    E = land.energy(q)
    g = land.gradient(q)
    # the penalty elements make the raw problem badly conditioned, so the
    # search runs in the metric of the (clipped) local curvature
    precond = _preconditioner(land.curvature(q))
    s = precond @ g
    d = -s
    history = [E]
    step = 1.0
    it = 0
    target = tol * (1.0 + float(np.linalg.norm(land.load)))
    while np.linalg.norm(g) >= target:
        if it >= max_iter:
            raise NonConvergenceError(
                f"no convergence after {max_iter} iterations, |grad|={np.linalg.norm(g):.3e}",
                float(np.linalg.norm(g)),
            )
        it += 1
        slope = g @ d
        if slope >= 0:
            d = -s
            slope = g @ d
        t = step
        while True:
            E_new = land.energy(q + t * d)
            if E_new <= E + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                # no decrease possible along d: restart along steepest descent
                if np.array_equal(d, -s):
                    raise NonConvergenceError(
                        f"line search failed, |grad|={np.linalg.norm(g):.3e}", float(np.linalg.norm(g))
                    )
                d = -s
                slope = g @ d
                t = step
        q = q + t * d
        E = E_new
        history.append(E)
        g_new = land.gradient(q)
        if it % refresh == 0:
            precond = _preconditioner(land.curvature(q))
            d = np.zeros_like(d)
        s_new = precond @ g_new
        beta = max(0.0, s_new @ (g_new - g) / (s @ g))
        d = -s_new + beta * d
        g, s = g_new, s_new
        step = min(t * 4.0, 1e3)
    u = land._full(q)[0]
    return Equilibrium(
        positions=model.nodes + u,
        displacement=u,
        energy=E,
        grad_norm=float(np.linalg.norm(g)),
        iterations=it,
        energy_history=history,
    )


def _load_plane(model: TailModel, load) -> np.ndarray | None:
    if load is None:
        return None
    horiz = np.asarray(load, dtype=float)[:, :2]
    k = int(np.argmax(np.linalg.norm(horiz, axis=1)))
    if np.linalg.norm(horiz[k]) == 0:
        return None
    return np.array([horiz[k, 0], horiz[k, 1], 0.0])


def numerical_gradient(model: TailModel, u, load=None, plane=None) -> np.ndarray:
    """Central-difference gradient of the total potential over the free coordinates."""
    land = EnergyLandscape(model, load, plane)
    return land.gradient(land.reduce(u))
