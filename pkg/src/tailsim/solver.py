"""Global stiffness assembly and incremental (Euler) load stepping.

Each load case is solved in the plane spanned by the tail axis and the
bending direction of the pulled tract(s). Node coordinates in that plane
are ``(r, z)``: ``r`` towards the pulled side, ``z`` along the tail axis.
Results are embedded back into 3D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .elements import default_delta, element_force, element_stiffness
from .geometry import JointProfile, TailModel, moment_arm, tendon_excursion


class AssemblyError(IndexError):
    pass


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    pass


class DivergenceError(ConvergenceError):
    pass


@dataclass
class GlobalSystem:
    K: np.ndarray
    dim: int
    free_dofs: np.ndarray
    f: np.ndarray = None
    # relative stiffness the finite-difference stencil can fake on a mechanism
    fd_floor: float = 0.0

    def __post_init__(self):
        if self.f is None:
            self.f = np.zeros(len(self.K))


@dataclass
class ReducedSystem:
    K: np.ndarray
    f: np.ndarray
    free_dofs: np.ndarray
    n_total: int

    def solve(self) -> np.ndarray:
        """Full-length displacement vector with zeros on fixed DoF."""
        u = np.zeros(self.n_total)
        u[self.free_dofs] = np.linalg.solve(self.K, self.f)
        return u


def _elements(model: TailModel):
    return list(model.all_bars()) + list(model.all_springs())


def assemble_global(
    model: TailModel,
    u: np.ndarray | None = None,
    rest: np.ndarray | None = None,
    delta: float | None = None,
) -> GlobalSystem:
    """Sum element stiffness matrices into the global matrix.

    ``rest`` defaults to the model's 3D nodes; pass planar ``(N, 2)`` rest
    coordinates to assemble the in-plane system. ``u`` is the displacement
    about which the element potentials are expanded.
    """
    rest = model.nodes if rest is None else np.asarray(rest, dtype=float)
    n, dim = rest.shape
    u = np.zeros_like(rest) if u is None else np.asarray(u, dtype=float).reshape(n, dim)
    K = np.zeros((n * dim, n * dim))
    floor = 0.0
    for el in _elements(model):
        ids = list(el.node_ids)
        if min(ids) < 0 or max(ids) >= n:
            raise AssemblyError(f"element {tuple(ids)} references a node outside 0..{n - 1}")
        local = element_stiffness(el, rest[ids], u[ids], delta)
        dofs = local.dof_map
        K[np.ix_(dofs, dofs)] += local.matrix
        step = delta if delta is not None else default_delta(rest[ids])
        floor = max(floor, (step / (1e4 * default_delta(rest[ids]))) ** 2)
    return GlobalSystem(K=K, dim=dim, free_dofs=np.arange(n * dim), fd_floor=floor)


def internal_force(model: TailModel, u: np.ndarray, rest: np.ndarray, delta: float | None = None) -> np.ndarray:
    n, dim = rest.shape
    u = np.asarray(u, dtype=float).reshape(n, dim)
    g = np.zeros(n * dim)
    for el in _elements(model):
        ids = list(el.node_ids)
        dofs = np.array([i * dim + c for i in ids for c in range(dim)])
        g[dofs] += element_force(el, rest[ids], u[ids], delta)
    return g


def apply_constraints(system: GlobalSystem, fixed: Sequence[int], check: bool = True) -> ReducedSystem:
    """Remove fixed nodes' DoF; optionally verify the rest is positive definite."""
    fixed = sorted(set(int(i) for i in fixed))
    dim = system.dim
    n_total = len(system.K)
    if not fixed:
        raise RankDeficiencyError("no fixed nodes: rigid-body translation is unconstrained")
    fixed_dofs = {i * dim + c for i in fixed for c in range(dim)}
    free = np.array([d for d in range(n_total) if d not in fixed_dofs], dtype=int)
    if len(free) == 0:
        raise ValueError("every DoF is fixed; nothing to solve")
    K = system.K[np.ix_(free, free)]
    if check:
        w, v = np.linalg.eigh(0.5 * (K + K.T))
        scale = max(abs(w).max(), 1e-300)
        if w[0] <= max(1e-10, 2.0 * system.fd_floor) * scale:
            mode = v[:, 0]
            top = np.argsort(-abs(mode))[:3]
            names = ", ".join(
                f"node {free[t] // dim} dof {'xyz'[free[t] % dim] if dim == 3 else 'rz'[free[t] % dim]}"
                for t in top
            )
            raise RankDeficiencyError(
                f"reduced stiffness is singular (eigenvalue {w[0]:.3g}); unconstrained mode dominated by {names}"
            )
    return ReducedSystem(K=K, f=system.f[free], free_dofs=free, n_total=n_total)


def decompose_tendon_load(F: float, profile: JointProfile, gamma: float) -> tuple[float, float]:
    """Split tendon tension into the force along the pull and the transverse force.

    The tendon moment ``M = F*l`` is carried by a transverse force at the
    joint's distal node, lever ``h/2`` about the neck: ``F_perp = 2M/h``.
    """
    if F < 0:
        raise ValueError(f"tendon force must be non-negative, got {F}")
    M = F * moment_arm(profile, gamma)
    return F, 2 * M / profile.h


# --- load cases -----------------------------------------------------------


def tract_direction(model: TailModel, tracts: Sequence[int]) -> np.ndarray:
    """Unit radial direction (in the xy plane) the tail bends towards."""
    tracts = tuple(tracts)
    if len(tracts) not in (1, 2):
        raise ValueError(f"one or two tracts expected, got {tracts}")
    for t in tracts:
        if t not in range(4):
            raise ValueError(f"tract id {t} not in 0..3")
    if len(tracts) == 2 and (tracts[0] - tracts[1]) % 4 not in (1, 3):
        raise ValueError(f"tracts {tracts} are not azimuth-adjacent")
    az = model.spec.tract_azimuths
    v = sum(np.array([math.cos(az[t]), math.sin(az[t]), 0.0]) for t in tracts)
    return v / np.linalg.norm(v)


def tension_multiplier(model: TailModel, tracts: Sequence[int]) -> tuple[float, float]:
    """(axial, moment) multipliers of the single-tendon tension for a tract set.

    Two adjacent tendons add their axial pulls and vector-sum their moments,
    giving ``2 cos(half the azimuth gap)`` along the bisector.
    """
    tracts = tuple(tracts)
    if len(tracts) == 1:
        return 1.0, 1.0
    az = model.spec.tract_azimuths
    gap = abs(math.remainder(az[tracts[0]] - az[tracts[1]], 2 * math.pi))
    return 2.0, 2.0 * math.cos(gap / 2)


@dataclass(frozen=True)
class LoadCase:
    """Tendon pull on one tract or an azimuth-adjacent pair.

    Exactly one of ``force`` (N, per tendon) or ``displacement`` (mm) is
    given; displacements are converted through a calibration fit.
    """

    tracts: tuple[int, ...] = (0,)
    force: float | None = None
    displacement: float | None = None
    steps: int = 200
    record_history: bool = True
    body_force: tuple[float, float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tracts", tuple(int(t) for t in self.tracts))
        if (self.force is None) == (self.displacement is None):
            raise ValueError("give exactly one of force or displacement")
        if self.force is not None and self.force < 0:
            raise ValueError(f"force must be non-negative, got {self.force}")
        if self.displacement is not None and self.displacement < 0:
            raise ValueError(f"displacement must be non-negative, got {self.displacement}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if len(self.tracts) not in (1, 2):
            raise ValueError(f"one or two tracts expected, got {self.tracts}")
        if len(self.tracts) == 2 and (self.tracts[0] - self.tracts[1]) % 4 not in (1, 3):
            raise ValueError(f"tracts {self.tracts} are not azimuth-adjacent")


@dataclass
class SolveResult:
    node_history: np.ndarray  # (steps+1, N, 3), or first/last only
    force_history: np.ndarray  # tendon tension per increment
    gamma_history: np.ndarray  # (steps+1, n_joints) bend angles
    final_load: np.ndarray  # (N, 3) nodal forces at the last increment
    direction: np.ndarray  # bending direction in the xy plane
    profile: JointProfile = field(repr=False)
    tendon_history: np.ndarray = None  # tendon displacement per recorded increment

    @property
    def final_pose(self) -> np.ndarray:
        return self.node_history[-1]

    @property
    def final_gamma(self) -> np.ndarray:
        return self.gamma_history[-1]

    @property
    def tendon_displacement(self) -> float:
        """Tendon travel (mm) work-conjugate to the applied tendon tension.

        Accumulated along the load path as the unit-tension nodal load
        dotted with each displacement increment, i.e. what a test machine
        pulling the tendon would record.
        """
        return float(self.tendon_history[-1])

    @property
    def excursion_from_bends(self) -> float:
        """Tendon travel from the moment-arm integral of the final joint bends."""
        return float(sum(tendon_excursion(self.profile, min(abs(g), math.pi / 2)) for g in self.final_gamma))

    def tip_displacement(self, node: int) -> np.ndarray:
        return self.node_history[-1][node] - self.node_history[0][node]


def planar_rest(model: TailModel) -> np.ndarray:
    return np.column_stack([np.zeros(model.n_nodes), model.nodes[:, 2]])


def embed(planar: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Map ``(r, z)`` coordinates to 3D points."""
    planar = np.asarray(planar)
    return planar[..., :1] * direction + planar[..., 1:2] * np.array([0.0, 0.0, 1.0])


def bend_angles(model: TailModel, x: np.ndarray) -> np.ndarray:
    """Signed bend of every joint (pi minus the vertex angle), positive towards +r."""
    out = np.empty(model.n_joints)
    for j, (b, n, t) in enumerate(model.joint_nodes):
        a = x[b] - x[n]
        c = x[t] - x[n]
        cosv = np.dot(a, c) / (np.linalg.norm(a) * np.linalg.norm(c))
        ang = math.pi - math.acos(max(-1.0, min(1.0, cosv)))
        # sign from the turn direction: distal arm rotated towards +r
        cross = (-a[0]) * c[1] - (-a[1]) * c[0]
        out[j] = -ang if cross > 0 else ang
    return out


def planar_load(
    model: TailModel, x: np.ndarray, F: float, axial_mult: float = 1.0, moment_mult: float = 1.0
) -> np.ndarray:
    """Nodal force vector for tendon tension ``F`` in the current planar geometry.

    For every joint the pull acts along the proximal half towards the base
    and the transverse force ``2M/h`` acts at the joint's distal node. In a
    multi-joint tail the tendon moment acts between the two bones meeting
    at a joint: each pair is balanced at the joint's neck and its couple is
    reacted on the proximal bone, so every joint carries only its own
    tendon moment.
    """
    prof = model.profile
    n = len(x)
    f = np.zeros((n, 2))
    multi = model.n_joints > 1
    for b, nk, t in model.joint_nodes:
        a = x[b] - x[nk]
        c = x[t] - x[nk]
        p = a / np.linalg.norm(a)
        perp = np.array([-p[1], p[0]])
        cosv = np.dot(a, c) / (np.linalg.norm(a) * np.linalg.norm(c))
        gamma = math.pi - math.acos(max(-1.0, min(1.0, cosv)))
        gamma = min(max(gamma, 0.0), math.pi / 2)
        F_par, F_perp = decompose_tendon_load(F, prof, gamma)
        load = axial_mult * F_par * p + moment_mult * F_perp * perp
        f[t] += load
        if multi:
            f[nk] -= load
            if b - 1 not in model.fixed_node_ids or b not in model.fixed_node_ids:
                # equal and opposite couple across the proximal bone (b-1 -> b)
                M = c[0] * load[1] - c[1] * load[0]
                s = x[b] - x[b - 1]
                L = np.linalg.norm(s)
                q = np.array([-s[1], s[0]]) / L
                f[b] -= (M / L) * q
                f[b - 1] += (M / L) * q
    return f.reshape(-1)


def load_jacobian(
    model: TailModel, x: np.ndarray, axial_mult: float = 1.0, moment_mult: float = 1.0, h: float = 1e-6
) -> np.ndarray:
    """Derivative of the unit-tension load vector with respect to the planar coordinates.

    The tendon load follows the geometry, so this term belongs in the
    tangent; it is not symmetric.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    J = np.empty((flat.size, flat.size))
    for i in range(flat.size):
        xp, xm = flat.copy(), flat.copy()
        xp[i] += h
        xm[i] -= h
        fp = planar_load(model, xp.reshape(x.shape), 1.0, axial_mult, moment_mult)
        fm = planar_load(model, xm.reshape(x.shape), 1.0, axial_mult, moment_mult)
        J[:, i] = (fp - fm) / (2 * h)
    return J


def commanded_force(model: TailModel, case: LoadCase, fit=None) -> float:
    """Tendon tension for a load case.

    A displacement command is shared equally by the joints, so the
    single-joint calibration is evaluated at ``d / n_joints``.
    """
    if case.force is not None:
        return case.force
    if fit is None:
        raise ValueError("displacement-commanded case needs a calibration fit")
    return fit.force(case.displacement / model.n_joints)


def euler_solve(
    model: TailModel,
    case: LoadCase,
    fit=None,
    delta: float | None = None,
    correct_drift: bool = True,
    equilibrate: bool = True,
    max_corrections: int = 25,
) -> SolveResult:
    """Track the tendon-loaded equilibrium by incrementing the load in equal steps.

    Every increment recomputes joint angles and moment arms from the
    current geometry, re-evaluates the tangent there (element stiffnesses
    plus the stiffness of the follower tendon load) and solves the
    linearised system for the displacement increment. With
    ``correct_drift`` the out-of-balance force of the previous increment is
    added to the right-hand side. With ``equilibrate`` the final state is
    iterated at full load until the out-of-balance force is below
    ``1e-6 * (1 + |f|)``; the near-rigid penalty bars otherwise leave a
    residual of one increment's linearisation error.
    """
    F_total = commanded_force(model, case, fit)
    direction = tract_direction(model, case.tracts)
    ax_mult, mo_mult = tension_multiplier(model, case.tracts)

    rest = planar_rest(model)
    n = len(rest)
    fixed_dofs = {i * 2 + c for i in model.fixed_node_ids for c in range(2)}
    free = np.array([d for d in range(2 * n) if d not in fixed_dofs])
    if len(free) == 0:
        raise ValueError("every DoF is fixed")

    body = np.zeros(2 * n)
    if case.body_force is not None:
        g = np.asarray(case.body_force, dtype=float)
        per_node = np.array([g @ direction, g[2]])
        body = np.tile(per_node, n)
        body[list(fixed_dofs)] = 0.0

    u = np.zeros(2 * n)
    hist = [rest.copy()]
    forces = [0.0]
    gammas = [np.zeros(model.n_joints)]
    travel = [0.0]
    d_tendon = 0.0
    unit = planar_load(model, rest, 1.0, ax_mult, mo_mult)
    for k in range(1, case.steps + 1):
        Fk = F_total * k / case.steps
        x = rest + u.reshape(n, 2)
        f_ext = unit * Fk + body * (k / case.steps)
        if F_total == 0 and case.body_force is None:
            if case.record_history or k == case.steps:
                hist.append(x.copy())
                forces.append(Fk)
                gammas.append(np.zeros(model.n_joints))
                travel.append(0.0)
            continue
        K = assemble_global(model, u, rest, delta).K - Fk * load_jacobian(model, x, ax_mult, mo_mult)
        K = K[np.ix_(free, free)]
        if correct_drift:
            rhs = f_ext - internal_force(model, u, rest, delta)
        else:
            rhs = (unit * F_total + body) / case.steps
        try:
            du = np.linalg.solve(K, rhs[free])
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular tangent stiffness at increment {k}") from exc
        if not np.all(np.isfinite(du)):
            raise DivergenceError(f"non-finite displacement at increment {k}")
        u[free] += du
        x = rest + u.reshape(n, 2)
        unit_new = planar_load(model, x, 1.0, ax_mult, mo_mult)
        # per tendon: paired tendons share the work equally
        d_tendon += 0.5 * (unit + unit_new)[free] @ du / len(case.tracts)
        unit = unit_new
        if case.record_history or k == case.steps:
            hist.append(x.copy())
            forces.append(Fk)
            gammas.append(bend_angles(model, x))
            travel.append(d_tendon)

    x = rest + u.reshape(n, 2)
    if equilibrate and (F_total > 0 or case.body_force is not None):
        for it in range(max_corrections + 1):
            f_ext = unit * F_total + body
            r = (f_ext - internal_force(model, u, rest, delta))[free]
            if np.linalg.norm(r) <= 1e-6 * (1.0 + np.linalg.norm(f_ext[free])):
                break
            if it == max_corrections:
                raise ConvergenceError(
                    f"equilibrium not reached after {max_corrections} corrections, |r|={np.linalg.norm(r):.3e}"
                )
            K = assemble_global(model, u, rest, delta).K - F_total * load_jacobian(model, x, ax_mult, mo_mult)
            try:
                du = np.linalg.solve(K[np.ix_(free, free)], r)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError("singular tangent stiffness while equilibrating") from exc
            u[free] += du
            x = rest + u.reshape(n, 2)
            unit_new = planar_load(model, x, 1.0, ax_mult, mo_mult)
            d_tendon += 0.5 * (unit + unit_new)[free] @ du / len(case.tracts)
            unit = unit_new
        hist[-1] = x.copy()
        travel[-1] = d_tendon
        gammas[-1] = bend_angles(model, x)
    f_final = planar_load(model, x, F_total, ax_mult, mo_mult) + body
    hist3 = embed(np.array(hist), direction)
    load3 = embed(f_final.reshape(n, 2), direction)
    return SolveResult(
        node_history=hist3,
        force_history=np.array(forces),
        gamma_history=np.array(gammas),
        final_load=load3,
        direction=direction,
        profile=model.profile,
        tendon_history=np.array(travel),
    )


def linear_solve(model: TailModel, case: LoadCase, fit=None, delta: float | None = None) -> np.ndarray:
    """Single linear solve at the rest configuration; returns 3D final nodes."""
    F = commanded_force(model, case, fit)
    direction = tract_direction(model, case.tracts)
    ax_mult, mo_mult = tension_multiplier(model, case.tracts)
    rest = planar_rest(model)
    system = assemble_global(model, rest=rest, delta=delta)
    system.f = planar_load(model, rest, F, ax_mult, mo_mult)
    reduced = apply_constraints(system, model.fixed_node_ids)
    u = reduced.solve()
    return embed(rest + u.reshape(-1, 2), direction)
