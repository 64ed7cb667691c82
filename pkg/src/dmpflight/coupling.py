"""Coupling of primitives: one-way convergence, two-way synchronization, blending.

All coupling terms act on accelerations in physical coordinates.  For a
receiving primitive with linear spring-damper part
``h(y, ydot) = -s y - d ydot`` (``s = alpha_z beta_z / tau**2``,
``d = alpha_z / tau``) the coupling function of a state ``x_i`` is::

    u(x_i) = (yddot_i - h(x_i)) + c s y_i

The bracket is the goal and forcing contribution of the primitive that owns
``x_i``; ``c`` is an extra coupling stiffness.  One-way coupling adds
``K (u(x_leader) - u(x_follower))`` to the follower's acceleration, so
with ``K = 1`` the position gap obeys ``e'' = -(1 + c) s e - d e'``.

Two-way coupling uses the state-only part ``u(x_i) = c s y_i``; the
goal and forcing parts of two different primitives cannot both be matched
by a symmetric law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import contraction as ct
from . import dmp
from .dmp import FILTERED, RHYTHMIC, PrimitiveParams, Trajectory
from .exceptions import BasisMismatchError, DataError, NonFiniteError

ONE_WAY = "one_way"
TWO_WAY = "two_way"
MODES = (ONE_WAY, TWO_WAY)
DEFAULT_S_ON = 0.85
DEFAULT_STIFFNESS = {ONE_WAY: 1.0, TWO_WAY: 20.0}


@dataclass(frozen=True)
class CouplingSpec:
    """How two primitives are coupled.

    Parameters
    ----------
    mode : {'one_way', 'two_way'}
    gain : float
        Coupling gain ``K``.  Two-way coupling needs ``K >= 0``; one-way
        coupling accepts any finite value so that destabilizing gains can
        be studied.
    s_on : float
        Normalized phase ``t / tau_follower`` in ``[0, 1]`` at which
        one-way coupling switches on.  ``s_on = 1`` never activates.
    stiffness : float, optional
        Extra stiffness ``c`` of the coupling function; defaults per mode.
    """
    mode: str = ONE_WAY
    gain: float = 1.0
    s_on: float = DEFAULT_S_ON
    stiffness: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DataError(f"unknown coupling mode {self.mode!r}")
        if not math.isfinite(self.gain):
            raise DataError("coupling gain must be finite")
        if self.mode == TWO_WAY and self.gain < 0:
            raise DataError("two-way coupling gain must be non-negative")
        if not 0.0 <= self.s_on <= 1.0:
            raise DataError("s_on must lie in [0, 1]")
        c = DEFAULT_STIFFNESS[self.mode] if self.stiffness is None else float(self.stiffness)
        if not c >= 0:
            raise DataError("coupling stiffness must be non-negative")
        object.__setattr__(self, "stiffness", c)

    @property
    def never_active(self) -> bool:
        return self.mode == ONE_WAY and self.s_on >= 1.0


@dataclass(frozen=True)
class CoupledRollout:
    """Leader and follower trajectories on a common time grid.

    For two-way coupling ``leader`` and ``follower`` are simply the first
    and second primitive.  ``activation_index`` is the first sample at which
    the coupling acts (``None`` when it never does).  The primitives
    actually integrated (with their origins moved to the start states) and
    the follower's starting phase are kept for the certificates.
    """
    leader: Trajectory
    follower: Trajectory
    spec: CouplingSpec
    activation_index: int | None = None
    leader_params: PrimitiveParams | None = None
    follower_params: PrimitiveParams | None = None
    follower_phase: object = None
    gap: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.leader.n_samples != self.follower.n_samples:
            raise DataError("leader and follower must have equal lengths")
        gap = np.linalg.norm(self.follower.y - self.leader.y, axis=1)
        object.__setattr__(self, "gap", gap)

    @property
    def t(self) -> np.ndarray:
        return self.follower.t


def linear_part(params: PrimitiveParams):
    """Stiffness ``s`` and damping ``d`` of the primitive's spring-damper part."""
    tau = params.tau
    if params.kind == FILTERED:
        return params.a1 * params.a2 / tau ** 2, (params.a1 + params.a2) / tau
    return params.alpha_z * params.beta_z / tau ** 2, params.alpha_z / tau


def acceleration(params: PrimitiveParams, y, ydot, f, f_rate):
    """Uncoupled acceleration at physical state ``(y, ydot)`` and given forcing."""
    tau = params.tau
    if params.kind == FILTERED:
        x = tau * ydot + params.a1 * y
        return ((params.g + f - params.a2 * x) / tau - params.a1 * ydot) / tau
    z = tau * ydot - f
    return (params.alpha_z * (params.beta_z * (params.attractor - y) - z) / tau + f_rate) / tau


class _Driven:
    """A primitive with its canonical run and forcing precomputed on a grid.

    The transformation system is affine in ``(y, z, f)``::

        tau y' = cyz z - cyy y + cyf f
        tau z' = c0 + czf f - czy y - czz z

    which lets several primitives be stepped together with array arithmetic.
    """

    def __init__(self, params, dt, n, phase=None):
        dmp._check_dt(params, dt)
        dmp._check_goal(params)
        self.p = params
        self.states, stages = dmp._canonical_run(params, dt, n, phase)
        self.fs = dmp.forcing_batch(params, stages[..., 0], stages[..., 1])
        self.frs = dmp.forcing_rate_batch(params, stages[..., 0], stages[..., 1])
        self.f = dmp.forcing_batch(params, self.states[:, 0], self.states[:, 1])
        self.fr = dmp.forcing_rate_batch(params, self.states[:, 0], self.states[:, 1])
        one = np.ones(params.n_dof)
        if params.kind == FILTERED:
            coef = (1.0, params.a1, 0.0, params.g, 1.0, 0.0, params.a2, 0.0)
        else:
            k = params.alpha_z * params.beta_z
            coef = (1.0, 0.0, 1.0, k * params.attractor, 0.0, k, params.alpha_z, 1.0)
        # cyz, cyy, cyf, c0, czf, czy, czz, cfr
        self.coef = [c * one for c in coef]


def _stack(systems, name):
    return np.stack([getattr(sys, name) for sys in systems])


def _joint_integrate(systems, starts, dt, n, coupling):
    """RK4 of several primitives with coupling accelerations.

    ``coupling(k, Y, Yd, Ydd)`` receives arrays whose first axis indexes the
    systems and returns an acceleration array of the same shape (or None).
    ``k`` is the step index during integration and an array of sample
    indices when accelerations are evaluated at the samples afterwards.
    The acceleration enters the ``z`` equation scaled by ``tau``.
    Returns per-system ``(Y, Yd, Ydd)``.
    """
    m = len(systems)
    tau = np.array([sys.p.tau for sys in systems])[:, None]
    cyz, cyy, cyf, c0, czf, czy, czz, cfr = (np.stack(c) for c in zip(*[s.coef for s in systems]))
    fs, frs = _stack(systems, "fs"), _stack(systems, "frs")       # (m, n-1, 4, dof)

    coefs = (cyz, cyy, cyf, c0, czf, czy, czz, cfr)

    def field(y, z, f, fr, t, coefs=coefs):
        cyz, cyy, cyf, c0, czf, czy, czz, cfr = coefs
        dy = (cyz * z - cyy * y + cyf * f) / t
        dz = (c0 + czf * f - czy * y - czz * z) / t
        return dy, dz, (dz + cfr * fr - cyy * dy) / t

    def rhs(k, i, y, z):
        dy, dz, ydd = field(y, z, fs[:, k, i], frs[:, k, i], tau)
        acc = coupling(k, y, dy, ydd)
        return dy, dz if acc is None else dz + tau * acc

    y = np.stack([np.asarray(s[0], dtype=float) for s in starts])
    z = np.stack([np.asarray(s[1], dtype=float) for s in starts])
    Y = np.empty((m, n, y.shape[1]))
    Z = np.empty_like(Y)
    h = 0.5 * dt
    for k in range(n):
        Y[:, k], Z[:, k] = y, z
        if k + 1 == n:
            break
        k1 = rhs(k, 0, y, z)
        k2 = rhs(k, 1, y + h * k1[0], z + h * k1[1])
        k3 = rhs(k, 2, y + h * k2[0], z + h * k2[1])
        k4 = rhs(k, 3, y + dt * k3[0], z + dt * k3[1])
        y = y + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        z = z + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(f"coupled integration diverged at step {k}")

    t3 = tau[:, :, None]
    f, fr = _stack(systems, "f"), _stack(systems, "fr")
    Yd, _, Ydd = field(Y, Z, f, fr, t3, tuple(c[:, None] for c in coefs))
    acc = coupling(np.arange(n), Y, Yd, Ydd)
    if acc is not None:
        Ydd = Ydd + acc
    return [(Y[j], Yd[j], Ydd[j]) for j in range(m)]


def _one_way_law(leader_sys, follower_sys, spec, k_act):
    K, c = spec.gain, spec.stiffness
    s, d = linear_part(follower_sys.p)

    stiff = (1.0 + c) * s
    buf = np.zeros((2, follower_sys.p.n_dof))

    def coupling(k, ys, yds, ydds):
        """``k`` is a step index, or an array of sample indices."""
        if k_act is None:
            return None
        if np.ndim(k) == 0:
            if k < k_act:
                return None
            buf[1] = K * (ydds[0] - ydds[1] + stiff * (ys[0] - ys[1]) + d * (yds[0] - yds[1]))
            return buf
        a = K * (ydds[0] - ydds[1] + stiff * (ys[0] - ys[1]) + d * (yds[0] - yds[1]))
        return np.stack([np.zeros_like(a), a * (k >= k_act)[:, None]])

    return coupling


def _activation_index(spec, tau, dt):
    if spec.never_active:
        return None
    return max(0, math.ceil(spec.s_on * tau / dt - 1e-9))


def _start(params, y0, ydot0):
    """``(params, y0, ydot0)`` with the primitive's origin moved to ``y0``."""
    if y0 is None:
        y0 = params.y0 if params.y0 is not None else np.zeros(params.n_dof)
    elif params.kind != RHYTHMIC:
        params = dmp.starting_at(params, y0)
    if ydot0 is None:
        ydot0 = params.ydot0
    return params, y0, ydot0


def _check_pair(p1, p2):
    if p1.n_dof != p2.n_dof:
        raise DataError("coupled primitives must have the same number of DOFs")


def one_way_rollout(leader: PrimitiveParams, follower: PrimitiveParams, spec: CouplingSpec,
                    dt: float = dmp.DEFAULT_DT, duration: float | None = None,
                    leader_start=None, follower_start=None) -> CoupledRollout:
    """Drive ``follower`` towards ``leader`` from ``t = s_on * tau_follower`` on.

    Both primitives start at ``t = 0``.  ``leader_start`` and
    ``follower_start`` are optional ``(y0, ydot0)`` pairs; by default each
    primitive starts at its stored initial state.  ``duration`` defaults to
    the follower's ``tau``.
    """
    if spec.mode != ONE_WAY:
        raise DataError("one_way_rollout needs a one-way coupling spec")
    _check_pair(leader, follower)
    duration = follower.tau if duration is None else duration
    n = dmp.n_samples_for(duration, dt)
    leader, *ls = _start(leader, *(leader_start or (None, None)))
    follower, *fs = _start(follower, *(follower_start or (None, None)))
    lead_traj = dmp.rollout(leader, ls[0], ls[1], dt, duration)
    if spec.never_active:
        return CoupledRollout(lead_traj, dmp.rollout(follower, fs[0], fs[1], dt, duration),
                              spec, None, leader, follower)
    k_act = _activation_index(spec, follower.tau, dt)
    systems = [_Driven(leader, dt, n), _Driven(follower, dt, n)]
    starts = [_transform_start(leader, *ls), _transform_start(follower, *fs)]
    (yl, ydl, yddl), (yf, ydf, yddf) = _joint_integrate(
        systems, starts, dt, n, _one_way_law(*systems, spec, k_act))
    k_act = k_act if k_act < n else None
    return CoupledRollout(Trajectory(dt, yl, ydl, yddl, leader.dof_names),
                          Trajectory(dt, yf, ydf, yddf, follower.dof_names), spec, k_act,
                          leader, follower)


def _transform_start(params, y0, ydot0, phase=None):
    st = dmp.initial_transform(params, y0, ydot0, phase)
    return st.y, st.z


def two_way_rollout(p1: PrimitiveParams, p2: PrimitiveParams, spec: CouplingSpec,
                    dt: float = dmp.DEFAULT_DT, duration: float | None = None,
                    starts=None) -> CoupledRollout:
    """Symmetric coupling ``y_i'' = f_i + K (u(x_j) - u(x_i))`` from ``t = 0``.

    ``duration`` defaults to one period (rhythmic) or ``tau`` of ``p1``;
    ``starts`` optionally gives ``((y0, ydot0), (y0, ydot0))``.
    """
    if spec.mode != TWO_WAY:
        raise DataError("two_way_rollout needs a two-way coupling spec")
    _check_pair(p1, p2)
    if duration is None:
        duration = p1.tau * (2 * np.pi if p1.kind == RHYTHMIC else 1.0)
    n = dmp.n_samples_for(duration, dt)
    starts = starts or ((None, None), (None, None))
    p1, *s1 = _start(p1, *starts[0])
    p2, *s2 = _start(p2, *starts[1])
    systems = [_Driven(p1, dt, n), _Driven(p2, dt, n)]
    K, c = spec.gain, spec.stiffness
    k1s = c * linear_part(p1)[0]
    k2s = c * linear_part(p2)[0]

    gains = np.array([K * k1s, -K * k2s])

    def coupling(k, ys, yds, ydds):
        diff = ys[1] - ys[0]
        return gains.reshape((2,) + (1,) * diff.ndim) * diff

    (y1, yd1, ydd1), (y2, yd2, ydd2) = _joint_integrate(
        systems, [_transform_start(p1, *s1), _transform_start(p2, *s2)], dt, n, coupling)
    return CoupledRollout(Trajectory(dt, y1, yd1, ydd1, p1.dof_names),
                          Trajectory(dt, y2, yd2, ydd2, p2.dof_names), spec, 0, p1, p2)


# ---------------------------------------------------------------------------
# Concatenation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Junction:
    """Continuity measures at the hand-over from the first to the second primitive.

    ``position_jump`` and ``velocity_jump`` are the largest increment
    excesses (see :func:`increment_excess`) over the samples around the
    junction.  ``acceleration_jump`` is the largest change of acceleration
    between neighbouring samples there; switching a coupling law on steps
    the acceleration without breaking position or velocity continuity.
    """
    index: int
    time: float
    position_jump: float
    velocity_jump: float
    peak_acceleration: float
    transient: float
    coupled: bool
    acceleration_jump: float = 0.0

    def is_continuous(self, pos_tol: float = 1e-3, vel_tol: float = 1e-2) -> bool:
        return self.position_jump < pos_tol and self.velocity_jump < vel_tol

    def to_dict(self) -> dict:
        return {"index": self.index, "time": self.time, "coupled": self.coupled,
                "position_jump": self.position_jump, "velocity_jump": self.velocity_jump,
                "acceleration_jump": self.acceleration_jump,
                "peak_acceleration": self.peak_acceleration, "transient": self.transient}


@dataclass(frozen=True)
class Concatenation:
    merged: Trajectory
    leader: Trajectory
    junction: Junction
    coupled: CoupledRollout | None


def increment_excess(traj: Trajectory):
    """Per-interval position and velocity increments not explained by the derivative.

    For an interval of length ``dt`` the position excess is
    ``max(0, |y[k+1] - y[k]| - dt max(|v[k]|, |v[k+1]|))`` and the velocity
    excess is the same with velocity and acceleration.  A continuous
    signal with a bounded, smooth derivative gives at most
    ``dt**2 max|y''| / 8``; a jump of size ``h`` gives about ``h``.  A step
    in the derivative itself gives no excess.
    """
    dt = traj.dt

    def excess(x, dx):
        bound = dt * np.maximum(np.abs(dx[1:]), np.abs(dx[:-1]))
        return np.maximum(np.abs(np.diff(x, axis=0)) - bound, 0.0).max(axis=1)

    return excess(traj.y, traj.ydot), excess(traj.ydot, traj.yddot)


def concatenate_detailed(first: PrimitiveParams, second: PrimitiveParams, spec: CouplingSpec,
                         dt: float = dmp.DEFAULT_DT, duration: float | None = None,
                         y0=None, ydot0=None, leader_y0=None, leader_ydot0=None,
                         window: int = 5) -> Concatenation:
    """Merge two primitives into one trajectory.

    The first primitive runs from ``(y0, ydot0)``.  At ``t_on = s_on * tau_1``
    the second primitive starts its own phase from ``leader_y0`` (default:
    the first primitive's goal) with velocity ``leader_ydot0`` (default:
    zero), and the first primitive's state is one-way coupled to it.  The
    merged output is the coupled first primitive.

    With ``s_on = 1`` no coupling happens: the merged output switches from
    the first primitive to the second at ``t = tau_1`` without smoothing, so
    any mismatch shows up as a discontinuity.

    ``duration`` defaults to ``t_on + tau_2``.
    """
    if spec.mode != ONE_WAY:
        raise DataError("concatenation needs a one-way coupling spec")
    _check_pair(first, second)
    dmp._check_dt(first, dt)
    dmp._check_dt(second, dt)
    k_on = math.ceil(min(spec.s_on, 1.0) * first.tau / dt - 1e-9)
    t_on = k_on * dt
    duration = t_on + second.tau if duration is None else duration
    n = dmp.n_samples_for(duration, dt)
    if k_on >= n - 1:
        raise DataError("concatenation duration ends before the junction")
    first, y0, ydot0 = _start(first, y0, ydot0)
    leader_y0 = first.g if leader_y0 is None else leader_y0
    leader_ydot0 = np.zeros(first.n_dof) if leader_ydot0 is None else leader_ydot0
    second, leader_y0, leader_ydot0 = _start(second, leader_y0, leader_ydot0)
    n_tail = n - k_on

    head = _Driven(first, dt, k_on + 1)
    state = dmp.initial_transform(first, y0, ydot0)
    Yh, Zh, _, _ = dmp.integrate(first, state, dt, k_on + 1)
    lead = dmp.rollout(second, leader_y0, leader_ydot0, dt, (n_tail - 1) * dt)

    if spec.never_active:
        yd, ydd = dmp._derivatives(first, Yh, Zh, head.f, head.fr)
        y = np.vstack([Yh[:k_on], lead.y])
        v = np.vstack([yd[:k_on], lead.ydot])
        a = np.vstack([ydd[:k_on], lead.yddot])
        merged = Trajectory(dt, y, v, a, first.dof_names)
        coupled = None
        transient = float(np.max(np.abs(Yh[k_on] - lead.y[0])))
    else:
        phase_on = head.states[k_on]
        phase_on = (dmp.CanonicalStateRhythmic(*phase_on) if first.kind == RHYTHMIC
                    else dmp.CanonicalStateDiscrete(*phase_on))
        systems = [_Driven(second, dt, n_tail), _Driven(first, dt, n_tail, phase_on)]
        starts = [_transform_start(second, leader_y0, leader_ydot0), (Yh[k_on], Zh[k_on])]
        (yl, ydl, yddl), (yf, ydf, yddf) = _joint_integrate(
            systems, starts, dt, n_tail, _one_way_law(*systems, spec, 0))
        yd, ydd = dmp._derivatives(first, Yh, Zh, head.f, head.fr)
        merged = Trajectory(dt, np.vstack([Yh[:k_on], yf]), np.vstack([yd[:k_on], ydf]),
                            np.vstack([ydd[:k_on], yddf]), first.dof_names)
        lead = Trajectory(dt, yl, ydl, yddl, second.dof_names)
        follow = Trajectory(dt, yf, ydf, yddf, first.dof_names)
        coupled = CoupledRollout(lead, follow, spec, 0, second, first, phase_on)
        transient = float(np.max(coupled.gap))
    dpos, dvel = increment_excess(merged)
    lo, hi = max(k_on - window, 0), min(k_on + window, n - 1)
    dacc = np.abs(np.diff(merged.yddot[lo:hi + 1], axis=0))
    tail = merged.yddot[k_on:]
    junction = Junction(index=k_on, time=t_on, position_jump=float(dpos[lo:hi].max()),
                        velocity_jump=float(dvel[lo:hi].max()),
                        peak_acceleration=float(np.max(np.abs(tail))),
                        transient=transient, coupled=not spec.never_active,
                        acceleration_jump=float(dacc.max()))
    return Concatenation(merged, lead, junction, coupled)


def concatenate(first: PrimitiveParams, second: PrimitiveParams, spec: CouplingSpec,
                dt: float = dmp.DEFAULT_DT, **kwargs) -> Trajectory:
    """Merged trajectory of :func:`concatenate_detailed`."""
    return concatenate_detailed(first, second, spec, dt, **kwargs).merged


# ---------------------------------------------------------------------------
# Blending
# ---------------------------------------------------------------------------

def blend_weights(w_a, w_b, alpha: float, beta: float):
    """Element-wise ``alpha w_a + beta w_b``.

    Accepts weight arrays or :class:`PrimitiveParams`; for primitives the
    bases must match and a primitive carrying the blended weights (and the
    remaining fields of ``w_a``) is returned.
    """
    if isinstance(w_a, PrimitiveParams) or isinstance(w_b, PrimitiveParams):
        if not (isinstance(w_a, PrimitiveParams) and isinstance(w_b, PrimitiveParams)):
            raise DataError("blend either two primitives or two weight arrays")
        if w_a.kind != w_b.kind or w_a.basis != w_b.basis:
            raise BasisMismatchError("primitives must share kind and basis to be blended")
        return w_a.with_weights(blend_weights(w_a.weights, w_b.weights, alpha, beta))
    a = np.asarray(w_a, dtype=float)
    b = np.asarray(w_b, dtype=float)
    if a.shape != b.shape:
        raise BasisMismatchError(f"weight shapes differ: {a.shape} vs {b.shape}")
    return alpha * a + beta * b


def blend_primitives(a: PrimitiveParams, b: PrimitiveParams, alpha: float,
                     beta: float) -> PrimitiveParams:
    """Blend weights and also the affine fields ``g``, ``y_m``, ``y0`` and ``ydot0``.

    For rhythmic primitives the rollout of the result equals
    ``alpha * rollout(a) + beta * rollout(b)``, because the dynamics are
    linear in state, attractor and forcing.  Discrete primitives scale the
    forcing term by ``g - y0``, so the equality only holds when both
    primitives have the same amplitude.
    """
    blended = blend_weights(a, b, alpha, beta)

    def mix(name):
        va, vb = getattr(a, name), getattr(b, name)
        if va is None or vb is None:
            return va
        return alpha * np.asarray(va) + beta * np.asarray(vb)

    return replace(blended, g=mix("g"), y_m=mix("y_m"), y0=mix("y0"),
                   ydot0=mix("ydot0"))


# ---------------------------------------------------------------------------
# Certificates and measurements
# ---------------------------------------------------------------------------

def _sample_indices(start, n, count):
    return np.unique(np.linspace(start, n - 1, count).round().astype(int))


def _block_metric(A, n_dof):
    """Block-diagonal Lyapunov metric of ``A`` (or identity if it is not Hurwitz)."""
    theta = ct.lyapunov_metric(A).theta if ct.is_hurwitz(A) else np.eye(2)
    big = np.zeros((2 * n_dof, 2 * n_dof))
    for j in range(n_dof):
        idx = np.array([j, n_dof + j])
        big[np.ix_(idx, idx)] = theta
    return ct.Metric(big)


def _reduced_field(params, phases, extra_stiffness):
    """Field ``x -> [ydot, yddot - extra_stiffness * y]`` with ``x = [y, ydot]``."""
    n = params.n_dof
    f_all = dmp.forcing_batch(params, phases[:, 0], phases[:, 1])
    fr_all = dmp.forcing_rate_batch(params, phases[:, 0], phases[:, 1])

    def fun(x, k):
        k = int(k)
        y, yd = x[:n], x[n:]
        acc = acceleration(params, y, yd, f_all[k], fr_all[k]) - extra_stiffness * y
        return np.concatenate([yd, acc])

    return fun


def one_way_certificate(coupled: CoupledRollout, n_checks: int = 50,
                        margin: float = ct.DEFAULT_MARGIN) -> ct.ContractionReport:
    """Check that ``f - K u`` is contracting along the follower after activation.

    ``f - K u`` has the follower's own Jacobian with the stiffness raised to
    ``s (1 + K c)``.  The metric is the Lyapunov metric of that linear part
    when it is Hurwitz; otherwise no constant metric can certify it and the
    identity is used, so the verdict is negative.
    """
    k0 = coupled.activation_index
    if k0 is None:
        raise DataError("coupling never activates; nothing to certify")
    follower, spec = coupled.follower_params, coupled.spec
    n = coupled.follower.n_samples
    states, _ = dmp._canonical_run(follower, coupled.follower.dt, n, coupled.follower_phase)
    s, d = linear_part(follower)
    extra = spec.gain * spec.stiffness * s
    A = np.array([[0.0, 1.0], [-(s + extra), -d]])
    fun = _reduced_field(follower, states, extra)
    idx = _sample_indices(k0, n, n_checks)
    X = np.hstack([coupled.follower.y[idx], coupled.follower.ydot[idx]])
    rep = ct.check_trajectory(fun, _block_metric(A, follower.n_dof), idx.astype(float), X, margin)
    return ct.ContractionReport(idx * coupled.follower.dt, rep.lambda_max, margin)


def two_way_certificate(coupled: CoupledRollout, n_checks: int = 50,
                        margin: float = ct.DEFAULT_MARGIN) -> ct.ContractionReport:
    """Check ``f - 2 K u`` contracting for both primitives along the coupled run.

    The returned report holds, per sample, the larger ``lambda_max`` of the two.
    """
    spec = coupled.spec
    n = coupled.leader.n_samples
    idx = _sample_indices(0, n, n_checks)
    lams = []
    for p, traj in ((coupled.leader_params, coupled.leader),
                    (coupled.follower_params, coupled.follower)):
        s, d = linear_part(p)
        extra = 2.0 * spec.gain * spec.stiffness * s
        A = np.array([[0.0, 1.0], [-(s + extra), -d]])
        states, _ = dmp._canonical_run(p, traj.dt, n)
        X = np.hstack([traj.y[idx], traj.ydot[idx]])
        rep = ct.check_trajectory(_reduced_field(p, states, extra), _block_metric(A, p.n_dof),
                                  idx.astype(float), X, margin)
        lams.append(rep.lambda_max)
    return ct.ContractionReport(idx * coupled.leader.dt, np.maximum(*lams), margin)


def gap_decay_rate(coupled: CoupledRollout, start_index: int | None = None,
                   floor: float = 1e-9) -> float:
    """Exponential decay rate of the gap after activation.

    Fits ``log`` of the gap's upper envelope (running maximum taken from the
    end) against time, over the samples where the envelope is above
    ``floor`` times its initial value.  Returns the slope (negative when the
    gap decays).
    """
    k0 = coupled.activation_index if start_index is None else start_index
    if k0 is None:
        raise DataError("coupling never activates")
    gap = coupled.gap[k0:]
    env = np.maximum.accumulate(gap[::-1])[::-1]
    if env[0] <= 0:
        return -np.inf
    keep = env > floor * env[0]
    if keep.sum() < 3:
        raise DataError("gap decays too quickly to fit a rate")
    t = coupled.t[k0:][keep]
    return float(np.polyfit(t, np.log(env[keep]), 1)[0])


def settled_gap(coupled: CoupledRollout, fraction: float = 0.5) -> float:
    """Largest gap over the last ``fraction`` of the run."""
    k = int(round(coupled.leader.n_samples * (1 - fraction)))
    return float(np.max(coupled.gap[k:]))


def hierarchy_certificate(params: PrimitiveParams, dt: float = dmp.DEFAULT_DT,
                          duration: float | None = None, n_checks: int = 50,
                          margin: float = ct.DEFAULT_MARGIN) -> ct.HierarchyReport:
    """Check a single primitive as a cascade: canonical system over transformation system.

    Both blocks are linear in their own state, so each gets the Lyapunov
    metric of its Jacobian (the identity when that Jacobian is not Hurwitz,
    which happens for the neutrally stable rhythmic phase).  The
    interconnection bound is the largest weighted norm of the forcing
    term's sensitivity to the phase along a nominal rollout.
    """
    dmp._check_dt(params, dt)
    dmp._check_goal(params)
    if duration is None:
        duration = params.tau * (2 * np.pi if params.kind == RHYTHMIC else 1.0)
    n = dmp.n_samples_for(duration, dt)
    y0 = params.y0 if params.y0 is not None else np.zeros(params.n_dof)
    state = dmp.initial_transform(params, y0, params.ydot0)
    Y, Z, phases, _ = dmp.integrate(params, state, dt, n)
    idx = _sample_indices(0, n, n_checks)
    top_rhs = (dmp._canonical_rhythmic_rhs if params.kind == RHYTHMIC
               else dmp._canonical_discrete_rhs)
    n_dof = params.n_dof

    def f_top(x, t):
        return np.array(top_rhs(params, x[0], x[1]), dtype=float)

    def f_bottom(x2, x1, t):
        f = dmp.forcing_batch(params, x1[0], x1[1])
        dy, dz = dmp._transform_rhs(params, x2[:n_dof], x2[n_dof:], f)
        return np.concatenate([dy, dz])

    A_top = ct.numeric_jacobian(f_top, phases[0])
    m_top = ct.lyapunov_metric(A_top) if ct.is_hurwitz(A_top) else ct.Metric.identity(2)
    A_bottom = ct.numeric_jacobian(lambda x, t: f_bottom(x, phases[0], t),
                                   np.concatenate([Y[0], Z[0]]))[::n_dof, ::n_dof]
    m_bottom = _block_metric(A_bottom, n_dof)
    return ct.check_hierarchy(f_top, f_bottom, (m_top, m_bottom), idx * dt, phases[idx],
                              np.hstack([Y[idx], Z[idx]]), margin)
