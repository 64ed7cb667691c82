"""Learning primitives from demonstrations.

The weights are fitted by per-basis locally weighted regression of the
forcing term that the demonstration requires, and demonstrations can be
split at the peak of one DOF into two primitives.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import dmp
from .dmp import DISCRETE, FILTERED, RHYTHMIC, PrimitiveParams, Trajectory
from .exceptions import BoundaryPeakError, DataError, TooFewSamplesError

MIN_DEMO_SAMPLES = 10
REGULARIZATION = 1e-8


@dataclass(frozen=True, eq=False)
class Demonstration:
    """Uniformly sampled demonstration; derivatives are optional.

    Arrays have shape ``(n_samples, n_dof)``.
    """
    dt: float
    y: np.ndarray
    ydot: np.ndarray | None = None
    yddot: np.ndarray | None = None
    dof_names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, np.newaxis]
        if y.shape[0] < MIN_DEMO_SAMPLES:
            raise TooFewSamplesError(
                f"a demonstration needs at least {MIN_DEMO_SAMPLES} samples, got {y.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise DataError("demonstration positions must be finite")
        if not self.dt > 0:
            raise DataError("dt must be positive")
        object.__setattr__(self, "y", y)
        for name in ("ydot", "yddot"):
            a = getattr(self, name)
            if a is not None:
                a = np.asarray(a, dtype=float).reshape(y.shape)
                if not np.all(np.isfinite(a)):
                    raise DataError(f"demonstration {name} must be finite")
                object.__setattr__(self, name, a)
        names = tuple(self.dof_names) or tuple(f"y{i}" for i in range(y.shape[1]))
        if len(names) != y.shape[1]:
            raise DataError("dof_names does not match the number of DOFs")
        object.__setattr__(self, "dof_names", names)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> Demonstration:
        return cls(traj.dt, traj.y, traj.ydot, traj.yddot, traj.dof_names)

    @property
    def n_samples(self) -> int:
        return self.y.shape[0]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def has_derivatives(self) -> bool:
        return self.ydot is not None and self.yddot is not None

    def to_trajectory(self) -> Trajectory:
        d = differentiate(self)
        return Trajectory(d.dt, d.y, d.ydot, d.yddot, d.dof_names)

    def slice(self, start, stop) -> Demonstration:
        cut = (lambda a: None if a is None else a[start:stop])
        return Demonstration(self.dt, self.y[start:stop], cut(self.ydot),
                             cut(self.yddot), self.dof_names)


def resample(t, y, dt: float):
    """Linearly interpolate samples at times ``t`` onto a uniform ``dt`` grid."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, np.newaxis]
    if np.any(np.diff(t) <= 0):
        raise DataError("sample times must be strictly increasing")
    n = dmp.n_samples_for(t[-1] - t[0], dt)
    grid = t[0] + np.arange(n) * dt
    return np.column_stack([np.interp(grid, t, y[:, d]) for d in range(y.shape[1])])


def differentiate(demo: Demonstration) -> Demonstration:
    """Fill velocities and accelerations by finite differences.

    Central differences in the interior, one-sided at the two ends.
    Demonstrations that already carry both derivatives are returned as is.
    """
    if demo.has_derivatives:
        return demo
    y, dt = demo.y, demo.dt
    if y.shape[0] < 3:
        raise TooFewSamplesError("need at least three samples to differentiate")
    ydot = demo.ydot
    if ydot is None:
        ydot = np.empty_like(y)
        ydot[1:-1] = (y[2:] - y[:-2]) / (2 * dt)
        ydot[0] = (y[1] - y[0]) / dt
        ydot[-1] = (y[-1] - y[-2]) / dt
    yddot = np.empty_like(y)
    yddot[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / dt ** 2
    yddot[0] = (y[2] - 2 * y[1] + y[0]) / dt ** 2
    yddot[-1] = (y[-1] - 2 * y[-2] + y[-3]) / dt ** 2
    return replace(demo, ydot=ydot, yddot=yddot)


def _integrate_z(params, y_fun, goal, dt, n, z0):
    """RK4 for ``tau z' = alpha_z (beta_z (goal - y(t)) - z)`` along ``y(t)``."""
    a, b, tau = params.alpha_z, params.beta_z, params.tau
    drive = a * b * (goal - y_fun(np.arange(2 * n - 1) * (0.5 * dt))) / tau
    c = a / tau
    z = np.empty((n, goal.size))
    z[0] = z0
    for k in range(n - 1):
        u0, um, u1 = drive[2 * k], drive[2 * k + 1], drive[2 * k + 2]
        zk = z[k]
        k1 = u0 - c * zk
        k2 = um - c * (zk + 0.5 * dt * k1)
        k3 = um - c * (zk + 0.5 * dt * k2)
        k4 = u1 - c * (zk + dt * k3)
        z[k + 1] = zk + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


def compute_f_target(demo: Demonstration, params: PrimitiveParams) -> np.ndarray:
    """Forcing values that make the primitive reproduce the demonstration.

    For discrete and rhythmic primitives the z-subsystem is integrated with
    the demonstrated positions as input (cubic Hermite interpolation between
    samples) and ``f = tau * ydot - z``.  Rhythmic demonstrations are
    treated as one period and the periodic solution for ``z`` is used.
    Filtered primitives invert the cascade algebraically.

    Returns
    -------
    array, shape (n_samples, n_dof)
    """
    demo = differentiate(demo)
    if demo.y.shape[1] != params.n_dof:
        raise DataError("demonstration and primitive differ in DOF count")
    tau = params.tau
    if params.kind == FILTERED:
        return (tau ** 2 * demo.yddot + tau * (params.a1 + params.a2) * demo.ydot
                + params.a1 * params.a2 * demo.y - params.g)
    n, dt = demo.n_samples, demo.dt
    t = np.arange(n) * dt
    spline = CubicHermiteSpline(t, demo.y, demo.ydot, axis=0)
    goal = params.attractor
    if params.kind == RHYTHMIC:
        # z(T) = E z0 + P, solved for the periodic z0 = P / (1 - E)
        p = _integrate_z(params, spline, goal, dt, n, np.zeros(params.n_dof))[-1]
        e = _integrate_z(params, spline, goal, dt, n, np.ones(params.n_dof))[-1] - p
        z0 = p / (1.0 - e)
    else:
        z0 = tau * demo.ydot[0]
    z = _integrate_z(params, spline, goal, dt, n, z0)
    return tau * demo.ydot - z


def _regularizer(denominators):
    scale = float(np.max(np.abs(denominators))) if np.size(denominators) else 0.0
    return REGULARIZATION * scale if scale > 0 else np.finfo(float).tiny


def fit_weights(f_target, phase_trace, params: PrimitiveParams) -> np.ndarray:
    """Per-basis locally weighted least squares.

    Discrete and filtered primitives use the scalar regressor ``v`` (the
    displacement-scaled canonical velocity)::

        w_i = sum_t psi_i v f / (sum_t psi_i v**2 + lambda)

    Rhythmic primitives regress on ``r [cos phi, sin phi]`` with the 2x2
    normal equations of each basis.

    Parameters
    ----------
    f_target : array, shape (n_samples, n_dof)
    phase_trace : tuple of arrays
        Output of :func:`dmp.canonical_trace` on the same grid.
    params : PrimitiveParams
        Supplies basis, kind and goals.

    Returns
    -------
    array, shape (n_dof, N) or (n_dof, N, 2)
    """
    f_target = np.asarray(f_target, dtype=float)
    if f_target.ndim == 1:
        f_target = f_target[:, np.newaxis]
    a, b = (np.asarray(p, dtype=float) for p in phase_trace)
    if a.shape[0] != f_target.shape[0]:
        raise DataError("phase trace and f_target differ in length")
    basis = params.basis
    if params.kind == RHYTHMIC:
        psi = np.exp(basis.widths * (np.cos(a[:, None] - basis.centers) - 1.0))
        reg = b[:, None] * np.column_stack([np.cos(a), np.sin(a)])      # (n, 2)
        gram = np.einsum("ti,tj,tk->ijk", psi, reg, reg)                # (N, 2, 2)
        lam = _regularizer(np.trace(gram, axis1=1, axis2=2))
        gram = gram + lam * np.eye(2)
        rhs = np.einsum("ti,tj,td->dij", psi, reg, f_target)            # (n_dof, N, 2)
        return np.linalg.solve(gram[None], rhs[..., None])[..., 0]
    psi = np.exp(-basis.widths * (a[:, None] - basis.centers) ** 2)     # (n, N)
    drive = b[:, None] * dmp.amplitude(params)[None, :]                 # (n, n_dof)
    num = np.einsum("ti,td,td->di", psi, drive, f_target)
    den = np.einsum("ti,td->di", psi, drive ** 2)
    return num / (den + _regularizer(den))


def weighted_residual(w_i: float, i: int, f_target, phase_trace, params, dof: int = 0):
    """Objective minimized by :func:`fit_weights` for one discrete basis and DOF."""
    a, b = (np.asarray(p, dtype=float) for p in phase_trace)
    f = np.asarray(f_target, dtype=float).reshape(a.size, -1)[:, dof]
    psi = np.exp(-params.basis.widths[i] * (a - params.basis.centers[i]) ** 2)
    amp = dmp.amplitude(params)
    v = b * amp[dof]
    den = np.einsum("ti,td->di",
                    np.exp(-params.basis.widths * (a[:, None] - params.basis.centers) ** 2),
                    (b[:, None] * amp[None, :]) ** 2)
    lam = _regularizer(den)
    return float(np.sum(psi * (f - w_i * v) ** 2) + lam * w_i ** 2)


def learn(demo: Demonstration, n_basis: int = dmp.DEFAULT_N_BASIS, kind: str = DISCRETE,
          **gains) -> PrimitiveParams:
    """Learn a primitive reproducing ``demo``.

    ``tau`` is the demonstration duration (discrete/filtered) or the
    duration over ``2 pi`` (rhythmic, the demonstration being one period).
    Extra keyword arguments override gains such as ``alpha_z`` or ``a1``.
    """
    demo = differentiate(demo)
    if kind == RHYTHMIC:
        basis = dmp.rhythmic_basis(n_basis)
        tau = demo.duration / (2 * np.pi)
        weights = np.zeros((demo.y.shape[1], n_basis, 2))
        fields = dict(g=demo.y[-1], y_m=demo.y[:-1].mean(axis=0), r0=1.0)
    elif kind in (DISCRETE, FILTERED):
        basis = dmp.discrete_basis(n_basis)
        tau = demo.duration
        weights = np.zeros((demo.y.shape[1], n_basis))
        g = demo.y[-1]
        if kind == FILTERED:
            g = g * gains.get("a1", 1.0) * gains.get("a2", 1.0)
        fields = dict(g=g)
    else:
        raise DataError(f"unknown primitive kind {kind!r}")
    fields.update(gains)
    fields.setdefault("tau", tau)
    params = PrimitiveParams(kind=kind, basis=basis, weights=weights, y0=demo.y[0],
                             ydot0=demo.ydot[0],
                             dof_names=demo.dof_names, **fields)
    if kind != RHYTHMIC:
        dmp._check_goal(params)
    f_target = compute_f_target(demo, params)
    phase = dmp.canonical_trace(params, demo.dt, demo.n_samples)
    return params.with_weights(fit_weights(f_target, phase, params))


def reproduction_rms(params: PrimitiveParams, demo: Demonstration, dt=None) -> np.ndarray:
    """RMS error of the rollout against the demonstration, relative to its range per DOF."""
    demo = differentiate(demo)
    dt = demo.dt if dt is None else dt
    traj = dmp.rollout(params, demo.y[0], demo.ydot[0], dt, demo.duration)
    n = min(traj.n_samples, demo.n_samples)
    err = np.sqrt(np.mean((traj.y[:n] - demo.y[:n]) ** 2, axis=0))
    span = np.ptp(demo.y, axis=0)
    return err / np.where(span > 0, span, 1.0)


@dataclass(frozen=True)
class SegmentationResult:
    split_index: int
    first: Demonstration
    second: Demonstration


def segment_at_peak(demo: Demonstration, dof=0) -> SegmentationResult:
    """Split at the global maximum of one DOF; both parts share the peak sample."""
    idx_dof = demo.dof_names.index(dof) if isinstance(dof, str) else int(dof)
    k = int(np.argmax(demo.y[:, idx_dof]))
    if k == 0 or k == demo.n_samples - 1:
        raise BoundaryPeakError(
            f"maximum of {demo.dof_names[idx_dof]} lies at sample {k}, an end of the demonstration")
    return SegmentationResult(k, demo.slice(0, k + 1), demo.slice(k, None))


def minimum_jerk(y0, y1, duration: float, dt: float):
    """Minimum-jerk profile between two rest states: positions, velocities, accelerations."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    n = dmp.n_samples_for(duration, dt)
    s = (np.arange(n) * dt / duration)[:, None]
    d = (y1 - y0)[None, :]
    pos = y0 + d * (10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5)
    vel = d * (30 * s ** 2 - 60 * s ** 3 + 30 * s ** 4) / duration
    acc = d * (60 * s - 180 * s ** 2 + 120 * s ** 3) / duration ** 2
    return pos, vel, acc


def waypoint_demonstration(waypoints, durations, dt: float, dof_names=()) -> Demonstration:
    """Piecewise minimum-jerk demonstration through rest waypoints.

    ``waypoints`` has shape (n_points, n_dof); ``durations`` one entry per leg.
    """
    waypoints = np.asarray(waypoints, dtype=float)
    if waypoints.ndim == 1:
        waypoints = waypoints[:, np.newaxis]
    if len(durations) != len(waypoints) - 1:
        raise DataError("need one duration per leg")
    parts = [minimum_jerk(a, b, T, dt) for a, b, T in zip(waypoints[:-1], waypoints[1:], durations)]
    y = np.vstack([parts[0][0]] + [p[0][1:] for p in parts[1:]])
    yd = np.vstack([parts[0][1]] + [p[1][1:] for p in parts[1:]])
    ydd = np.vstack([parts[0][2]] + [p[2][1:] for p in parts[1:]])
    return Demonstration(dt, y, yd, ydd, dof_names)
