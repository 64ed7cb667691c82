"""Three degree-of-freedom bench helicopter and a cascaded tracking controller.

Equations of motion (travel ``psi``, pitch ``theta``, roll ``phi``)::

    J_zz psi''   = T_col L cos(theta) sin(phi) - T_cyc l_h sin(theta) sin(phi) - Drag
    J_yy theta'' = -M g l_theta sin(theta + theta_0) + T_col L cos(phi)
    J_xx phi''   = -m g l_phi sin(phi) + T_cyc l_h

with ``T_col = T_L + T_R``, ``T_cyc = T_L - T_R`` and the signed drag
``Drag = rho/2 psi' |psi'| L**3 (S0 + S0p sin(phi))``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .dmp import Trajectory
from .exceptions import DataError, DivergenceError, NonFiniteError, RollGuardError

DIVERGENCE_LIMIT = 1e3


@dataclass(frozen=True)
class HeliParams:
    """Physical constants (SI units).

    The defaults are plausible bench-helicopter magnitudes, not
    measurements.  ``l_theta`` is larger than a near-balanced rig would
    have so that the hover thrust, and with it the travel authority, is
    large enough for the obstacle maneuver.
    """
    J_xx: float = 0.0364
    J_yy: float = 0.91
    J_zz: float = 0.91
    M: float = 3.57
    m: float = 1.15
    L: float = 0.66
    l_h: float = 0.177
    l_theta: float = 0.1
    l_phi: float = 0.002
    theta_0: float = 0.3
    S0: float = 0.01
    S0p: float = 0.005
    rho: float = 1.225
    g_grav: float = 9.81
    T_max: float = 20.0

    def __post_init__(self):
        for name in ("J_xx", "J_yy", "J_zz", "M", "m", "L", "l_h", "l_theta", "l_phi",
                     "rho", "g_grav", "T_max"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DataError(f"{name} must be strictly positive, got {v}")
        if not (self.S0 >= 0 and self.S0p >= 0):
            raise DataError("drag coefficients must be non-negative")
        if not np.isfinite(self.theta_0):
            raise DataError("theta_0 must be finite")

    @classmethod
    def from_dict(cls, values: dict) -> HeliParams:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise DataError(f"unknown helicopter parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def to_dict(self) -> dict:
        return asdict(self)

    def hover_thrust(self, theta: float = 0.0, phi: float = 0.0) -> float:
        """Collective thrust holding pitch ``theta`` at rest."""
        return self.M * self.g_grav * self.l_theta * np.sin(theta + self.theta_0) / (
            self.L * np.cos(phi))


@dataclass(frozen=True)
class Gains:
    """Controller gains.

    Pitch and travel use ``k_p = 16``, ``k_d = 8``.  The inner roll loop must
    be clearly faster than the travel loop it serves, so it defaults to
    ``k_p = 100``, ``k_d = 20`` (natural frequency 10 rad/s against 4 rad/s).
    """
    kp_theta: float = 16.0
    kd_theta: float = 8.0
    kp_psi: float = 16.0
    kd_psi: float = 8.0
    kp_phi: float = 100.0
    kd_phi: float = 20.0
    phi_max: float = 0.6
    roll_guard: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v >= 0):
                raise DataError(f"gain {f.name} must be a non-negative number")
        if not 0 < self.phi_max < np.pi / 2 - self.roll_guard:
            raise DataError("phi_max must lie inside the roll guard")

    @classmethod
    def from_dict(cls, values: dict) -> Gains:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise DataError(f"unknown gains: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HeliState:
    psi: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    psi_dot: float = 0.0
    theta_dot: float = 0.0
    phi_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.psi, self.theta, self.phi,
                         self.psi_dot, self.theta_dot, self.phi_dot])

    @classmethod
    def from_array(cls, x) -> HeliState:
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class ControlInput:
    T_col: float
    T_cyc: float

    @property
    def T_left(self) -> float:
        return 0.5 * (self.T_col + self.T_cyc)

    @property
    def T_right(self) -> float:
        return 0.5 * (self.T_col - self.T_cyc)


def drag(psi_dot, phi, p: HeliParams):
    """Aerodynamic drag torque on the travel axis, opposing ``psi_dot``."""
    return 0.5 * p.rho * psi_dot * np.abs(psi_dot) * p.L ** 3 * (p.S0 + p.S0p * np.sin(phi))


def _rhs(x, T_col, T_cyc, p: HeliParams):
    psi, theta, phi, psi_d, theta_d, phi_d = x
    s_phi = np.sin(phi)
    psi_dd = (T_col * p.L * np.cos(theta) * s_phi - T_cyc * p.l_h * np.sin(theta) * s_phi
              - drag(psi_d, phi, p)) / p.J_zz
    theta_dd = (-p.M * p.g_grav * p.l_theta * np.sin(theta + p.theta_0)
                + T_col * p.L * np.cos(phi)) / p.J_yy
    phi_dd = (-p.m * p.g_grav * p.l_phi * s_phi + T_cyc * p.l_h) / p.J_xx
    return np.array([psi_d, theta_d, phi_d, psi_dd, theta_dd, phi_dd])


def dynamics(state, u: ControlInput, p: HeliParams) -> np.ndarray:
    """State derivative ``[psi', theta', phi', psi'', theta'', phi'']``."""
    x = state.as_array() if isinstance(state, HeliState) else np.asarray(state, dtype=float)
    return _rhs(x, u.T_col, u.T_cyc, p)


def energy(state, p: HeliParams) -> float:
    """Mechanical energy of the unforced, drag-free system."""
    x = state.as_array() if isinstance(state, HeliState) else np.asarray(state, dtype=float)
    psi, theta, phi, psi_d, theta_d, phi_d = x
    return (0.5 * p.J_zz * psi_d ** 2 + 0.5 * p.J_yy * theta_d ** 2 + 0.5 * p.J_xx * phi_d ** 2
            - p.M * p.g_grav * p.l_theta * np.cos(theta + p.theta_0)
            - p.m * p.g_grav * p.l_phi * np.cos(phi))


def _clip(v, limit):
    return float(np.clip(v, -limit, limit))


def controller(state, ref, p: HeliParams, gains: Gains = Gains()) -> ControlInput:
    """Cascaded feedback-linearizing tracking law.

    Parameters
    ----------
    state : HeliState or array
    ref : array-like, shape (6,)
        ``(psi_r, theta_r, psi_r', theta_r', psi_r'', theta_r'')``.

    Notes
    -----
    Pitch is feedback linearized through ``T_col``.  Travel has no direct
    authority at level roll, so its PD law is converted into a desired
    roll angle (clamped to ``+-phi_max``) that an inner roll loop tracks
    with ``T_cyc``.  Both inputs are saturated at ``T_max``.
    """
    x = state.as_array() if isinstance(state, HeliState) else np.asarray(state, dtype=float)
    psi, theta, phi, psi_d, theta_d, phi_d = x
    psi_r, theta_r, psi_rd, theta_rd, psi_rdd, theta_rdd = np.asarray(ref, dtype=float)
    if abs(phi) >= np.pi / 2 - gains.roll_guard:
        raise RollGuardError(f"roll angle {phi:.3f} rad too close to +-pi/2")

    v_theta = theta_rdd + gains.kd_theta * (theta_rd - theta_d) + gains.kp_theta * (theta_r - theta)
    T_col = (p.J_yy * v_theta + p.M * p.g_grav * p.l_theta * np.sin(theta + p.theta_0)) / (
        p.L * np.cos(phi))
    T_col = _clip(T_col, p.T_max)

    v_psi = psi_rdd + gains.kd_psi * (psi_rd - psi_d) + gains.kp_psi * (psi_r - psi)
    authority = T_col * p.L * np.cos(theta)
    if abs(authority) > 1e-9:
        s = (p.J_zz * v_psi + drag(psi_d, phi, p)) / authority
        phi_des = float(np.arcsin(np.clip(s, -np.sin(gains.phi_max), np.sin(gains.phi_max))))
    else:
        phi_des = 0.0
    T_cyc = (p.J_xx * (gains.kd_phi * (0.0 - phi_d) + gains.kp_phi * (phi_des - phi))
             + p.m * p.g_grav * p.l_phi * np.sin(phi)) / p.l_h
    return ControlInput(T_col, _clip(T_cyc, p.T_max))


@dataclass(frozen=True)
class TrackingResult:
    """Closed-loop simulation output.

    ``actual`` holds ``psi``, ``theta`` and ``phi``; ``controls`` has
    columns ``T_col, T_cyc``; ``rms`` maps ``psi``/``theta`` to the RMS
    tracking error in radians.
    """
    actual: Trajectory
    controls: np.ndarray
    rms: dict


def _reference_columns(reference: Trajectory):
    names = reference.dof_names
    try:
        i_psi, i_theta = names.index("psi"), names.index("theta")
    except ValueError:
        if reference.n_dof < 2:
            raise DataError("reference needs psi and theta DOFs") from None
        i_psi, i_theta = 0, 1
    r = reference
    return np.column_stack([r.y[:, i_psi], r.y[:, i_theta], r.ydot[:, i_psi],
                            r.ydot[:, i_theta], r.yddot[:, i_psi], r.yddot[:, i_theta]])


def simulate(x0, control, p: HeliParams, dt: float, n_steps: int):
    """Fixed-step RK4 with zero-order-hold control ``control(k, x) -> ControlInput``.

    Returns ``(states, controls)`` with ``n_steps + 1`` state rows.
    """
    X = np.empty((n_steps + 1, 6))
    U = np.empty((n_steps + 1, 2))
    x = np.asarray(x0, dtype=float).copy()
    for k in range(n_steps + 1):
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"non-finite helicopter state at step {k}")
        if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"helicopter state exceeded {DIVERGENCE_LIMIT:g} at step {k}")
        X[k] = x
        u = control(k, x)
        U[k] = u.T_col, u.T_cyc
        if k == n_steps:
            break
        k1 = _rhs(x, u.T_col, u.T_cyc, p)
        k2 = _rhs(x + 0.5 * dt * k1, u.T_col, u.T_cyc, p)
        k3 = _rhs(x + 0.5 * dt * k2, u.T_col, u.T_cyc, p)
        k4 = _rhs(x + dt * k3, u.T_col, u.T_cyc, p)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X, U


def simulate_tracking(reference: Trajectory, p: HeliParams = HeliParams(),
                      gains: Gains = Gains(), dt: float | None = None,
                      initial: HeliState | None = None) -> TrackingResult:
    """Track the ``psi`` and ``theta`` DOFs of ``reference`` in closed loop.

    ``dt`` defaults to the reference step and must divide it into an
    integer number of substeps; the reference is interpolated linearly in
    between.  The helicopter starts on the reference at level roll unless
    ``initial`` is given.
    """
    ref = _reference_columns(reference)
    dt = reference.dt if dt is None else float(dt)
    ratio = reference.dt / dt
    sub = int(round(ratio))
    if sub < 1 or abs(ratio - sub) > 1e-9:
        raise DataError("simulation step must divide the reference step")
    n_steps = (reference.n_samples - 1) * sub
    if sub > 1:
        t_ref = reference.t
        t_sim = np.arange(n_steps + 1) * dt
        ref = np.column_stack([np.interp(t_sim, t_ref, ref[:, j]) for j in range(6)])
    if initial is None:
        initial = HeliState(psi=ref[0, 0], theta=ref[0, 1], psi_dot=ref[0, 2],
                            theta_dot=ref[0, 3])
    X, U = simulate(initial.as_array(), lambda k, x: controller(x, ref[k], p, gains),
                    p, dt, n_steps)
    acc = np.array([_rhs(x, u[0], u[1], p)[3:] for x, u in zip(X, U)])
    actual = Trajectory(dt, X[:, :3], X[:, 3:], acc, ("psi", "theta", "phi"))
    rms = {"psi": float(np.sqrt(np.mean((X[:, 0] - ref[:, 0]) ** 2))),
           "theta": float(np.sqrt(np.mean((X[:, 1] - ref[:, 1]) ** 2)))}
    return TrackingResult(actual, U, rms)
