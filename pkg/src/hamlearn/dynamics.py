"""Analytic Hamiltonian systems and trajectory generation.

Systems are separable, H(q, p) = T(p) + V(q) with T(p) = p^T M^-1 p / 2 and a
diagonal mass matrix M, so Hamilton's equations read qdot = M^-1 p and
pdot = -grad V(q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

# Distance to a singularity (r=0, the outer wall, coincident charges) below
# which evaluation aborts instead of returning huge or non-finite values.
SINGULARITY_TOL = 1e-8

SHO = "sho"
DOUBLE_WELL = "double_well"
CENTRAL_FORCE = "central_force"
COULOMB = "coulomb"
FREE = "free"

_DIMS = {SHO: 1, DOUBLE_WELL: 1, CENTRAL_FORCE: 3, COULOMB: 6}

RK4 = "rk4"
VERLET = "verlet"


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal mass matrix; entries strictly positive."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ConfigError("mass diagonal must be a 1-d vector")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ConfigError("mass entries must be finite and strictly positive")
        object.__setattr__(self, "diag", d)

    @property
    def inv_diag(self) -> np.ndarray:
        return 1.0 / self.diag


@dataclass(frozen=True)
class SystemSpec:
    """An analytic system: kind tag, masses, named parameters."""

    kind: str
    mass: MassMatrix
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (_DIMS | {FREE: None}):
            raise ConfigError(f"unknown system kind {self.kind!r}")
        if len(self.mass.diag) != self.dim:
            raise ConfigError(
                f"mass matrix has dimension {len(self.mass.diag)}, "
                f"system {self.kind!r} needs {self.dim}"
            )

    @property
    def dim(self) -> int:
        if self.kind == FREE:
            return int(self.params["dim"])
        return _DIMS[self.kind]


def harmonic_oscillator() -> SystemSpec:
    return SystemSpec(SHO, MassMatrix(np.ones(1)))


def double_well() -> SystemSpec:
    return SystemSpec(DOUBLE_WELL, MassMatrix(np.ones(1)))


def central_force(wall_radius: float = 10.0) -> SystemSpec:
    return SystemSpec(CENTRAL_FORCE, MassMatrix(np.ones(3)), {"wall_radius": wall_radius})


def coulomb_pair() -> SystemSpec:
    # per-particle masses (1, 1/2) expanded across the three coordinates of each
    mass = MassMatrix(np.array([1.0, 1.0, 1.0, 0.5, 0.5, 0.5]))
    return SystemSpec(COULOMB, mass, {"coulomb_constant": 1.0 / (4.0 * math.pi)})


def free_particle(dim: int = 1) -> SystemSpec:
    return SystemSpec(FREE, MassMatrix(np.ones(dim)), {"dim": dim})


@dataclass(frozen=True)
class PhaseState:
    """Position, momentum, and time of one recorded state."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1 or q.size < 1:
            raise ConfigError("q and p must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and math.isfinite(self.t)):
            raise ConfigError("state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size


class Trajectory:
    """Equispaced recorded states, stored as (n_states, d) arrays."""

    def __init__(self, qs: np.ndarray, ps: np.ndarray, step: float, t0: float = 0.0):
        qs = np.asarray(qs, dtype=float)
        ps = np.asarray(ps, dtype=float)
        if qs.ndim != 2 or qs.shape != ps.shape or qs.shape[0] < 1:
            raise ConfigError("qs and ps must be (n_states, d) arrays of equal shape")
        if not (step > 0 and math.isfinite(step)):
            raise ConfigError("step must be positive and finite")
        if not (np.all(np.isfinite(qs)) and np.all(np.isfinite(ps))):
            raise ConfigError("trajectory entries must be finite")
        self.qs = qs
        self.ps = ps
        self.step = float(step)
        self.t0 = float(t0)

    def __len__(self) -> int:
        return self.qs.shape[0]

    @property
    def dim(self) -> int:
        return self.qs.shape[1]

    @property
    def n_transitions(self) -> int:
        return len(self) - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(len(self))

    def state(self, i: int) -> PhaseState:
        return PhaseState(self.qs[i], self.ps[i], self.t0 + i * self.step)

    @property
    def states(self) -> list[PhaseState]:
        return [self.state(i) for i in range(len(self))]


@dataclass(frozen=True)
class RadialTrajectory:
    """Reduced radial coordinates of a 3-d orbit plus its angular momentum."""

    r: np.ndarray
    rdot: np.ndarray
    step: float
    ell: float

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        rdot = np.asarray(self.rdot, dtype=float)
        if r.shape != rdot.shape or r.ndim != 1:
            raise ConfigError("r and rdot must be 1-d arrays of equal length")
        if np.any(r <= 0):
            raise DomainError("radius must stay strictly positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "rdot", rdot)

    def as_trajectory(self) -> Trajectory:
        """View (r, rdot) as a d=1 trajectory with unit mass (momentum = rdot)."""
        return Trajectory(self.r[:, None], self.rdot[:, None], self.step)


# ---------------------------------------------------------------------------
# Potentials and forces.  All evaluators accept a (d,) vector or an (m, d)
# batch; batched rows go through the same per-row arithmetic as single calls.
# ---------------------------------------------------------------------------


def _as_batch(q: np.ndarray, d: int) -> tuple[np.ndarray, bool]:
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        if q.size != d:
            raise ConfigError(f"point has dimension {q.size}, system needs {d}")
        return q[None, :], True
    if q.ndim != 2 or q.shape[1] != d:
        raise ConfigError(f"points must be (m, {d}), got shape {q.shape}")
    return q, False


def eval_potential(spec: SystemSpec, q: np.ndarray):
    """Analytic potential V(q); raises DomainError near a singularity."""
    Q, single = _as_batch(q, spec.dim)
    if spec.kind == SHO:
        v = 0.5 * Q[:, 0] ** 2
    elif spec.kind == DOUBLE_WELL:
        x = Q[:, 0]
        v = x * x * (x - 2.0) ** 2 - (x - 1.0) ** 2
    elif spec.kind == CENTRAL_FORCE:
        wall = spec.params["wall_radius"]
        r = np.sqrt(np.sum(Q * Q, axis=1))
        if np.any(r <= SINGULARITY_TOL) or np.any(wall - r <= SINGULARITY_TOL):
            raise DomainError("central-force point at or beyond a singular radius")
        v = 1.0 / r + 1.0 / (wall - r)
    elif spec.kind == COULOMB:
        k = spec.params["coulomb_constant"]
        delta = Q[:, :3] - Q[:, 3:]
        r = np.sqrt(np.sum(delta * delta, axis=1))
        if np.any(r <= SINGULARITY_TOL):
            raise DomainError("coulomb charges coincident")
        v = -k / r
    elif spec.kind == FREE:
        v = np.zeros(Q.shape[0])
    else:  # pragma: no cover
        raise ConfigError(f"unknown system kind {spec.kind!r}")
    return float(v[0]) if single else v


def eval_force(spec: SystemSpec, q: np.ndarray):
    """Exact analytic force -grad V(q)."""
    Q, single = _as_batch(q, spec.dim)
    if spec.kind == SHO:
        f = -Q
    elif spec.kind == DOUBLE_WELL:
        x = Q[:, 0]
        f = -(4.0 * x**3 - 12.0 * x**2 + 6.0 * x + 2.0)[:, None]
    elif spec.kind == CENTRAL_FORCE:
        wall = spec.params["wall_radius"]
        r = np.sqrt(np.sum(Q * Q, axis=1))
        if np.any(r <= SINGULARITY_TOL) or np.any(wall - r <= SINGULARITY_TOL):
            raise DomainError("central-force point at or beyond a singular radius")
        # dV/dr = -r^-2 + (wall-r)^-2, force = -dV/dr * q/r
        coeff = (1.0 / r**2 - 1.0 / (wall - r) ** 2) / r
        f = coeff[:, None] * Q
    elif spec.kind == COULOMB:
        k = spec.params["coulomb_constant"]
        delta = Q[:, :3] - Q[:, 3:]
        r = np.sqrt(np.sum(delta * delta, axis=1))
        if np.any(r <= SINGULARITY_TOL):
            raise DomainError("coulomb charges coincident")
        g1 = (k / r**3)[:, None] * delta  # grad wrt first particle
        f = np.concatenate([-g1, g1], axis=1)
    elif spec.kind == FREE:
        f = np.zeros_like(Q)
    else:  # pragma: no cover
        raise ConfigError(f"unknown system kind {spec.kind!r}")
    return f[0] if single else f


def total_energy(spec: SystemSpec, q: np.ndarray, p: np.ndarray):
    """H(q, p) = p^T M^-1 p / 2 + V(q), batched like eval_potential."""
    Q, single = _as_batch(q, spec.dim)
    P, _ = _as_batch(p, spec.dim)
    kinetic = 0.5 * np.sum(P * P * spec.mass.inv_diag, axis=1)
    v = eval_potential(spec, Q)
    h = kinetic + v
    return float(h[0]) if single else h


# ---------------------------------------------------------------------------
# Integrators.  Internal array steppers work on (m, d) batches; the public
# single-step operations wrap them in PhaseState.
# ---------------------------------------------------------------------------


def _rk4_arrays(spec, Q, P, h):
    minv = spec.mass.inv_diag
    k1q = P * minv
    k1p = eval_force(spec, Q)
    k2q = (P + 0.5 * h * k1p) * minv
    k2p = eval_force(spec, Q + 0.5 * h * k1q)
    k3q = (P + 0.5 * h * k2p) * minv
    k3p = eval_force(spec, Q + 0.5 * h * k2q)
    k4q = (P + h * k3p) * minv
    k4p = eval_force(spec, Q + h * k3q)
    Qn = Q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    Pn = P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return Qn, Pn


def _verlet_arrays(spec, Q, P, h):
    # half-kick, drift, half-kick
    minv = spec.mass.inv_diag
    Ph = P + 0.5 * h * eval_force(spec, Q)
    Qn = Q + h * (Ph * minv)
    Pn = Ph + 0.5 * h * eval_force(spec, Qn)
    return Qn, Pn


_STEPPERS = {RK4: _rk4_arrays, VERLET: _verlet_arrays}


def rk4_step(spec: SystemSpec, s: PhaseState, h: float) -> PhaseState:
    """One classical 4th-order Runge-Kutta step of Hamilton's equations."""
    Q, P = _rk4_arrays(spec, s.q[None, :], s.p[None, :], h)
    return PhaseState(Q[0], P[0], s.t + h)


def stormer_verlet_step(spec: SystemSpec, s: PhaseState, h: float) -> PhaseState:
    """One symplectic half-kick / drift / half-kick step."""
    Q, P = _verlet_arrays(spec, s.q[None, :], s.p[None, :], h)
    return PhaseState(Q[0], P[0], s.t + h)


def simulate(
    spec: SystemSpec, ic: PhaseState, h: float, n_steps: int, method: str = RK4
) -> Trajectory:
    """Integrate n_steps steps from ic; returns n_steps+1 states including ic."""
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if not h > 0:
        raise ConfigError("h must be positive")
    if method not in _STEPPERS:
        raise ConfigError(f"unknown method {method!r}")
    if ic.dim != spec.dim:
        raise ConfigError(f"initial condition has dimension {ic.dim}, system needs {spec.dim}")
    trajs = simulate_many(spec, ic.q[None, :], ic.p[None, :], h, n_steps, method, t0=ic.t)
    return trajs[0]


def simulate_many(
    spec: SystemSpec,
    q0s: np.ndarray,
    p0s: np.ndarray,
    h: float,
    n_steps: int,
    method: str = RK4,
    t0: float = 0.0,
) -> list[Trajectory]:
    """Integrate a batch of initial conditions in lockstep.

    Row-wise arithmetic is identical to per-trajectory simulate(), so results
    are bit-equal to integrating each initial condition on its own.
    """
    step = _STEPPERS[method]
    q0s = np.asarray(q0s, dtype=float)
    p0s = np.asarray(p0s, dtype=float)
    m = q0s.shape[0]
    qs = np.empty((n_steps + 1, m, spec.dim))
    ps = np.empty((n_steps + 1, m, spec.dim))
    qs[0], ps[0] = q0s, p0s
    Q, P = q0s, p0s
    for i in range(n_steps):
        try:
            Q, P = step(spec, Q, P, h)
        except DomainError as e:
            raise DomainError(f"integration left the domain at step {i + 1}: {e}") from e
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(P))):
            raise DomainError(f"integration produced non-finite state at step {i + 1}")
        qs[i + 1], ps[i + 1] = Q, P
    return [Trajectory(qs[:, j], ps[:, j], h, t0=t0) for j in range(m)]


def reduce_to_radial(traj: Trajectory, mass: MassMatrix) -> RadialTrajectory:
    """Reduce a d=3 orbit to (r, rdot) with the conserved |q x p| at t=0.

    rdot comes from the chain rule, q . (M^-1 p) / |q|, not from differencing.
    """
    if traj.dim != 3:
        raise ConfigError("radial reduction needs a 3-dimensional trajectory")
    r = np.sqrt(np.sum(traj.qs * traj.qs, axis=1))
    if np.any(r == 0):
        raise DomainError("radius vanished along the trajectory")
    vel = traj.ps * mass.inv_diag
    rdot = np.sum(traj.qs * vel, axis=1) / r
    ell = float(np.linalg.norm(np.cross(traj.qs[0], traj.ps[0])))
    return RadialTrajectory(r, rdot, traj.step, ell)


def angular_momentum(traj: Trajectory) -> np.ndarray:
    """|q x p| at every recorded state of a d=3 trajectory."""
    if traj.dim != 3:
        raise ConfigError("angular momentum needs a 3-dimensional trajectory")
    return np.linalg.norm(np.cross(traj.qs, traj.ps), axis=1)


def sho_exact(q0: float, p0: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form harmonic oscillator solution for unit mass and stiffness."""
    t = np.asarray(t, dtype=float)
    return q0 * np.cos(t) + p0 * np.sin(t), p0 * np.cos(t) - q0 * np.sin(t)
