"""Discrete, rhythmic and filtered dynamic movement primitives.

Every primitive is a transformation system driven by a canonical (phase)
system through a normalized Gaussian forcing term::

    tau * dz = alpha_z * (beta_z * (goal - y) - z)
    tau * dy = z + f

The discrete canonical system is a critically damped point attractor that
is integrated in normalized coordinates (``x / A``, ``v / A`` with the
displacement ``A = g - y0``) so that several DOFs with different goals can
share one phase.  With a start at zero this is the familiar ``x / g``
normalization; measuring from the start makes primitives translation
invariant.  The rhythmic
canonical system is a phase oscillator with an amplitude that relaxes to
``r0``.  The filtered variant replaces the transformation system by two
cascaded first-order filters.

All integration is fixed-step classical RK4.  The canonical system is
advanced on its own and its RK4 stage values are handed to the
transformation system, so the phase trace never depends on whether a
transformation system is integrated alongside it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    BasisMismatchError,
    DataError,
    DegenerateNormalizerError,
    GoalZeroError,
    NonFiniteError,
    StepSizeError,
)

DISCRETE = "discrete"
RHYTHMIC = "rhythmic"
FILTERED = "filtered"
KINDS = (DISCRETE, RHYTHMIC, FILTERED)

NORMALIZER_FLOOR = 1e-10
DEFAULT_DT = 1e-3
DEFAULT_N_BASIS = 50


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisSet:
    """Gaussian (discrete) or von Mises (rhythmic) basis functions.

    Parameters
    ----------
    centers : array, shape (N,)
        Normalized phase ``x / A`` for discrete systems, angle in radians
        for rhythmic systems.
    widths : array, shape (N,)
        Positive concentration parameters ``h_i``.
    """
    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1)
        h = np.asarray(self.widths, dtype=float).reshape(-1)
        if c.shape != h.shape:
            raise BasisMismatchError("centers and widths differ in length")
        if c.size < 2:
            raise DataError("a basis needs at least two functions")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(h))):
            raise DataError("basis parameters must be finite")
        if np.any(h <= 0):
            raise DataError("basis widths must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", h)

    @property
    def n(self) -> int:
        return self.centers.size

    def __eq__(self, other):
        if not isinstance(other, BasisSet):
            return NotImplemented
        return (np.array_equal(self.centers, other.centers)
                and np.array_equal(self.widths, other.widths))


def discrete_basis(n_basis: int = DEFAULT_N_BASIS) -> BasisSet:
    """Centers equally spaced on [0, 1]; ``h_i = 1 / (c_{i+1} - c_i)**2``."""
    if n_basis < 2:
        raise DataError("n_basis must be >= 2")
    c = np.linspace(0.0, 1.0, n_basis)
    h = np.empty(n_basis)
    h[:-1] = 1.0 / np.diff(c) ** 2
    h[-1] = h[-2]
    return BasisSet(c, h)


def rhythmic_basis(n_basis: int = DEFAULT_N_BASIS) -> BasisSet:
    """Centers equally spaced on [0, 2pi); neighbours cross at activation 0.5."""
    if n_basis < 2:
        raise DataError("n_basis must be >= 2")
    c = np.arange(n_basis) * (2.0 * np.pi / n_basis)
    half_gap = np.pi / n_basis
    h = np.full(n_basis, np.log(2.0) / (1.0 - np.cos(half_gap)))
    return BasisSet(c, h)


def _as_vector(value, n_dof=None, name="value"):
    arr = np.atleast_1d(np.asarray(value, dtype=float)).reshape(-1)
    if n_dof is not None:
        if arr.size == 1 and n_dof > 1:
            arr = np.full(n_dof, arr[0])
        if arr.size != n_dof:
            raise DataError(f"{name} must have {n_dof} entries, got {arr.size}")
    return arr


@dataclass(frozen=True, eq=False)
class PrimitiveParams:
    """A learned movement primitive for one or more DOFs sharing a phase.

    ``weights`` has shape ``(n_dof, N)`` for discrete and filtered
    primitives and ``(n_dof, N, 2)`` for rhythmic ones, where the last axis
    multiplies ``r cos(phi)`` and ``r sin(phi)``.  ``y0`` is the start
    position and ``ydot0`` the start velocity the primitive was learned
    from; both are only defaults for rollouts.
    """
    kind: str
    basis: BasisSet
    weights: np.ndarray
    g: np.ndarray
    tau: float = 1.0
    alpha_z: float = 25.0
    beta_z: float = 6.25
    alpha_v: float = 8.0
    beta_v: float = 2.0
    y_m: np.ndarray | None = None
    mu: float = 1.0
    r0: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    y0: np.ndarray | None = None
    dof_names: tuple = field(default=())
    ydot0: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown primitive kind {self.kind!r}")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 1:
            w = w[np.newaxis]
        if self.kind == RHYTHMIC and w.ndim == 2 and w.shape[-1] == 2 \
                and w.shape[0] == self.basis.n:
            w = w[np.newaxis]
        expected_tail = (self.basis.n, 2) if self.kind == RHYTHMIC else (self.basis.n,)
        if w.shape[1:] != expected_tail:
            raise BasisMismatchError(
                f"weights shape {w.shape} does not match basis of {self.basis.n} "
                f"for kind {self.kind}")
        n_dof = w.shape[0]
        g = _as_vector(self.g, n_dof, "g")
        y_m = _as_vector(0.0 if self.y_m is None else self.y_m, n_dof, "y_m")
        y0 = None if self.y0 is None else _as_vector(self.y0, n_dof, "y0")
        ydot0 = None if self.ydot0 is None else _as_vector(self.ydot0, n_dof, "ydot0")
        names = tuple(self.dof_names) or tuple(f"y{i}" for i in range(n_dof))
        if len(names) != n_dof:
            raise DataError("dof_names does not match the number of DOFs")
        for name in ("tau", "alpha_z", "beta_z", "alpha_v", "beta_v"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive")
        if self.kind == RHYTHMIC and not self.mu > 0:
            raise DataError("mu must be positive for rhythmic primitives")
        if self.kind == FILTERED and not (self.a1 > 0 and self.a2 > 0):
            raise DataError("a1 and a2 must be positive for filtered primitives")
        if self.kind != RHYTHMIC and np.any(np.diff(self.basis.centers) <= 0):
            raise DataError("discrete basis centers must be strictly increasing")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
            raise DataError("weights and goals must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "y_m", y_m)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "ydot0", ydot0)
        object.__setattr__(self, "dof_names", names)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n_dof(self) -> int:
        return self.weights.shape[0]

    @property
    def attractor(self) -> np.ndarray:
        """Point the transformation system is pulled towards."""
        return self.y_m if self.kind == RHYTHMIC else self.g

    def with_goal(self, g) -> PrimitiveParams:
        return replace(self, g=_as_vector(g, self.n_dof, "g"))

    def with_weights(self, weights) -> PrimitiveParams:
        return replace(self, weights=weights)

    def __eq__(self, other):
        if not isinstance(other, PrimitiveParams):
            return NotImplemented
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


@dataclass(frozen=True)
class CanonicalStateDiscrete:
    """Normalized phase: ``x`` stands for ``x / A`` and ``v`` for ``v / A``.

    ``A`` is the displacement returned by :func:`amplitude`.
    """
    x: float = 0.0
    v: float = 0.0


@dataclass(frozen=True)
class CanonicalStateRhythmic:
    phi: float = 0.0
    r: float = 1.0


@dataclass(frozen=True, eq=False)
class TransformState:
    """Transformation state; for filtered primitives ``z`` is the inner filter state."""
    y: np.ndarray
    z: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled multi-DOF trajectory, arrays of shape (n_samples, n_dof)."""
    dt: float
    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray
    dof_names: tuple = ()

    def __post_init__(self):
        arrays = []
        for name in ("y", "ydot", "yddot"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, np.newaxis]
            arrays.append(a)
            object.__setattr__(self, name, a)
        if not all(a.shape == arrays[0].shape for a in arrays):
            raise DataError("position, velocity and acceleration shapes differ")
        if arrays[0].shape[0] < 2:
            raise DataError("a trajectory needs at least two samples")
        if not self.dt > 0:
            raise DataError("dt must be positive")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise NonFiniteError("trajectory contains non-finite samples")
        names = tuple(self.dof_names) or tuple(f"y{i}" for i in range(arrays[0].shape[1]))
        if len(names) != arrays[0].shape[1]:
            raise DataError("dof_names does not match the number of DOFs")
        object.__setattr__(self, "dof_names", names)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_samples(self) -> int:
        return self.y.shape[0]

    @property
    def n_dof(self) -> int:
        return self.y.shape[1]

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    def dof(self, name) -> int:
        return self.dof_names.index(name)

    def select(self, dofs) -> Trajectory:
        idx = [self.dof(d) if isinstance(d, str) else int(d) for d in dofs]
        return Trajectory(self.dt, self.y[:, idx], self.ydot[:, idx],
                          self.yddot[:, idx], tuple(self.dof_names[i] for i in idx))

    def slice(self, start, stop) -> Trajectory:
        return Trajectory(self.dt, self.y[start:stop], self.ydot[start:stop],
                          self.yddot[start:stop], self.dof_names)


def n_samples_for(duration: float, dt: float) -> int:
    """Number of samples ``floor(duration / dt) + 1`` of a rollout."""
    if duration < dt * (1 - 1e-9):
        raise DataError("duration must be at least one step")
    return int(np.floor(duration / dt + 1e-9)) + 1


# ---------------------------------------------------------------------------
# Basis and forcing
# ---------------------------------------------------------------------------

def amplitude(params: PrimitiveParams) -> np.ndarray:
    """Displacement that scales the discrete forcing term.

    The canonical state ``x`` runs from the origin to the goal and is
    normalized by this displacement, so the forcing is ``(g - y0) v_hat``.
    The origin is ``params.y0`` (zero when unset); for filtered primitives
    the goal input ``g`` is compared with ``a1 a2 y0``.
    """
    origin = 0.0 if params.y0 is None else params.y0
    if params.kind == FILTERED:
        return params.g - params.a1 * params.a2 * origin
    return params.g - origin


def starting_at(params: PrimitiveParams, y0) -> PrimitiveParams:
    """The same primitive with its origin moved to ``y0``."""
    if y0 is None:
        return params
    y0 = _as_vector(y0, params.n_dof, "y0")
    if params.y0 is not None and np.array_equal(params.y0, y0):
        return params
    return replace(params, y0=y0)


def _check_goal(params: PrimitiveParams):
    if params.kind != RHYTHMIC and np.any(amplitude(params) == 0.0):
        raise GoalZeroError(
            "discrete phase normalization is undefined when the goal equals the start")


def _phase_pair(params, phase):
    return (phase.phi, phase.r) if params.kind == RHYTHMIC else (phase.x, phase.v)


def _activations(basis: BasisSet, kind: str, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)[..., np.newaxis]
    if kind == RHYTHMIC:
        return np.exp(basis.widths * (np.cos(a - basis.centers) - 1.0))
    return np.exp(-basis.widths * (a - basis.centers) ** 2)


def _normalizer(psi):
    s = psi.sum(axis=-1)
    if not np.all(s > NORMALIZER_FLOOR):
        raise DegenerateNormalizerError(
            f"sum of activations {np.min(s):.3g} below floor {NORMALIZER_FLOOR}")
    return s


def basis_activation(params: PrimitiveParams, phase) -> np.ndarray:
    """Activation of every basis function at the given phase.

    For discrete and filtered primitives ``phase.x`` is already the
    normalized phase.
    """
    _check_goal(params)
    return _activations(params.basis, params.kind, _phase_pair(params, phase)[0])


def forcing_from_activations(psi, weights, drive) -> np.ndarray:
    """Normalized weighted combination ``sum(psi * w * drive) / sum(psi)``.

    ``weights`` has shape ``(..., N)`` with a scalar ``drive``, or shape
    ``(..., N, 2)`` with a 2-vector ``drive``.
    """
    psi = np.asarray(psi, dtype=float)
    s = _normalizer(psi)
    w = np.asarray(weights, dtype=float)
    if np.ndim(drive) == 1:
        w = w @ np.asarray(drive, dtype=float)
        return w @ psi / s
    return (w @ psi) * drive / s


def forcing_batch(params: PrimitiveParams, a, b) -> np.ndarray:
    """Forcing term at many phases at once.

    ``a``, ``b`` are ``(phi, r)`` for rhythmic and normalized ``(x, v)``
    otherwise, of any common shape ``S``; the result has shape
    ``S + (n_dof,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)[..., np.newaxis]
    psi = _activations(params.basis, params.kind, a)
    s = _normalizer(psi)[..., np.newaxis]
    w = params.weights
    if params.kind == RHYTHMIC:
        cos_part = psi @ w[..., 0].T
        sin_part = psi @ w[..., 1].T
        return b * (np.cos(a)[..., np.newaxis] * cos_part
                    + np.sin(a)[..., np.newaxis] * sin_part) / s
    return (psi @ w.T) / s * b * amplitude(params)


def forcing_rate_batch(params: PrimitiveParams, a, b) -> np.ndarray:
    """Time derivative of the forcing term along the canonical flow."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bs = params.basis
    d = a[..., np.newaxis] - bs.centers
    tau = params.tau
    if params.kind == RHYTHMIC:
        psi = np.exp(bs.widths * (np.cos(d) - 1.0))
        dpsi = -bs.widths * np.sin(d) * psi
    else:
        psi = np.exp(-bs.widths * d ** 2)
        dpsi = -2.0 * bs.widths * d * psi
    s = _normalizer(psi)[..., np.newaxis]
    ds = dpsi.sum(axis=-1)[..., np.newaxis]

    def shape_and_slope(w):
        m = psi @ w.T
        return m / s, (dpsi @ w.T) / s - m * ds / s ** 2

    if params.kind == RHYTHMIC:
        ca, da = shape_and_slope(params.weights[..., 0])
        cb, db = shape_and_slope(params.weights[..., 1])
        c, sn = np.cos(a)[..., np.newaxis], np.sin(a)[..., np.newaxis]
        shape = c * ca + sn * cb
        dshape = -sn * ca + c * da + c * cb + sn * db
        r = b[..., np.newaxis]
        r_dot = -params.mu * (r - params.r0) / tau
        return r_dot * shape + r * dshape / tau
    phi, dphi = shape_and_slope(params.weights)
    x_dot, v_dot = _canonical_discrete_rhs(params, a, b)
    v = b[..., np.newaxis]
    return amplitude(params) * (v_dot[..., np.newaxis] * phi + v * dphi * x_dot[..., np.newaxis])


def forcing_term(params: PrimitiveParams, phase, dof: int | None = None):
    """Forcing term ``f`` of one DOF (or all DOFs when ``dof`` is None)."""
    _check_goal(params)
    f = forcing_batch(params, *_phase_pair(params, phase))
    return f if dof is None else float(f[dof])


def forcing_rate(params: PrimitiveParams, phase) -> np.ndarray:
    _check_goal(params)
    return forcing_rate_batch(params, *_phase_pair(params, phase))


# ---------------------------------------------------------------------------
# Canonical systems
# ---------------------------------------------------------------------------

def _canonical_discrete_rhs(params, x, v):
    return v / params.tau, params.alpha_v * (params.beta_v * (1.0 - x) - v) / params.tau


def _canonical_rhythmic_rhs(params, phi, r):
    return 1.0 / params.tau + 0.0 * phi, -params.mu * (r - params.r0) / params.tau


def initial_phase(params: PrimitiveParams):
    if params.kind == RHYTHMIC:
        return CanonicalStateRhythmic(0.0, params.r0)
    return CanonicalStateDiscrete(0.0, 0.0)


def _canonical_rk4(params, a, b, dt):
    rhs = _canonical_rhythmic_rhs if params.kind == RHYTHMIC else _canonical_discrete_rhs
    k1 = rhs(params, a, b)
    a2, b2 = a + 0.5 * dt * k1[0], b + 0.5 * dt * k1[1]
    k2 = rhs(params, a2, b2)
    a3, b3 = a + 0.5 * dt * k2[0], b + 0.5 * dt * k2[1]
    k3 = rhs(params, a3, b3)
    a4, b4 = a + dt * k3[0], b + dt * k3[1]
    k4 = rhs(params, a4, b4)
    new = (a + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
           b + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))
    return new, ((a, b), (a2, b2), (a3, b3), (a4, b4))


def canonical_step(params: PrimitiveParams, phase, dt: float):
    """One RK4 step of the canonical system.

    Returns the new phase and the four stage phases at which the RK4 stages
    of a driven transformation system must be evaluated.
    """
    cls = CanonicalStateRhythmic if params.kind == RHYTHMIC else CanonicalStateDiscrete
    new, stages = _canonical_rk4(params, *_phase_pair(params, phase), dt)
    return cls(*new), tuple(cls(*st) for st in stages)


def _canonical_run(params, dt, n_samples, start=None):
    """Phase samples ``(n, 2)`` and RK4 stage phases ``(n - 1, 4, 2)``."""
    a, b = _phase_pair(params, initial_phase(params) if start is None else start)
    a, b = float(a), float(b)
    states = np.empty((n_samples, 2))
    stages = np.empty((max(n_samples - 1, 0), 4, 2))
    for k in range(n_samples):
        states[k] = a, b
        if k + 1 < n_samples:
            (a, b), st = _canonical_rk4(params, a, b, dt)
            stages[k] = st
    return states, stages


def canonical_trace(params: PrimitiveParams, dt: float, n_samples: int):
    """Canonical states at ``n_samples`` uniformly spaced times, as arrays.

    Returns ``(x, v)`` (normalized) for discrete/filtered primitives or
    ``(phi, r)`` for rhythmic ones.
    """
    _check_dt(params, dt)
    states, _ = _canonical_run(params, dt, n_samples)
    return states[:, 0], states[:, 1]


# ---------------------------------------------------------------------------
# Transformation systems
# ---------------------------------------------------------------------------

def _transform_rhs(params, y, z, f, goal=None):
    """Right-hand side ``(dy, dz)`` of the transformation system given ``f``."""
    tau = params.tau
    if params.kind == FILTERED:
        g = params.g if goal is None else goal
        return (z - params.a1 * y) / tau, (g + f - params.a2 * z) / tau
    attractor = params.attractor if goal is None else goal
    return (z + f) / tau, params.alpha_z * (params.beta_z * (attractor - y) - z) / tau


def _check_dt(params, dt):
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    if dt > params.tau / 10.0 * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds tau/10={params.tau / 10.0}")


def _rk4_transform(params, y, z, fs, dt, goal=None, extra=None):
    """RK4 step of (y, z) given the forcing at the four stage phases.

    ``extra(stage_index, y, z)`` may return additional ``(dy, dz)`` terms
    (the coupling module uses it); it is skipped entirely when None.
    """
    def rhs(i, yy, zz):
        dy, dz = _transform_rhs(params, yy, zz, fs[i], goal)
        if extra is not None:
            ey, ez = extra(i, yy, zz)
            dy, dz = dy + ey, dz + ez
        return dy, dz

    k1 = rhs(0, y, z)
    k2 = rhs(1, y + 0.5 * dt * k1[0], z + 0.5 * dt * k1[1])
    k3 = rhs(2, y + 0.5 * dt * k2[0], z + 0.5 * dt * k2[1])
    k4 = rhs(3, y + dt * k3[0], z + dt * k3[1])
    y_new = y + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    z_new = z + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y_new, z_new


def _stage_forcing(params, stages):
    st = np.asarray([_phase_pair(params, s) for s in stages], dtype=float)
    return forcing_batch(params, st[:, 0], st[:, 1])


def step(params: PrimitiveParams, transform: TransformState, phase, dt: float):
    """Advance transformation and canonical systems by one RK4 step.

    Returns ``(TransformState, phase)``.
    """
    _check_dt(params, dt)
    _check_goal(params)
    new_phase, stages = canonical_step(params, phase, dt)
    y, z = _rk4_transform(params, np.asarray(transform.y, float),
                          np.asarray(transform.z, float), _stage_forcing(params, stages), dt)
    return TransformState(y, z), new_phase


def step_filtered(params: PrimitiveParams, y, x, phase, dt: float, goal=None):
    """One RK4 step of the cascade ``tau y' + a1 y = x``, ``tau x' + a2 x = g + f``.

    ``goal`` overrides ``params.g`` for this step (time-varying goals).
    Returns ``(y, x, phase)``.
    """
    if params.kind != FILTERED:
        raise DataError("step_filtered needs a filtered primitive")
    _check_dt(params, dt)
    _check_goal(params)
    new_phase, stages = canonical_step(params, phase, dt)
    goal = None if goal is None else _as_vector(goal, params.n_dof, "goal")
    y, x = _rk4_transform(params, np.asarray(y, float), np.asarray(x, float),
                          _stage_forcing(params, stages), dt, goal)
    return y, x, new_phase


def initial_transform(params: PrimitiveParams, y0, ydot0=None, phase=None) -> TransformState:
    """Transformation state reproducing position ``y0`` and velocity ``ydot0``."""
    phase = initial_phase(params) if phase is None else phase
    y0 = _as_vector(y0, params.n_dof, "y0")
    ydot0 = np.zeros(params.n_dof) if ydot0 is None else _as_vector(ydot0, params.n_dof, "ydot0")
    if params.kind == FILTERED:
        return TransformState(y0, params.tau * ydot0 + params.a1 * y0)
    return TransformState(y0, params.tau * ydot0 - forcing_term(params, phase))


def _derivatives(params, y, z, f, f_rate, goal=None):
    dy, dz = _transform_rhs(params, y, z, f, goal)
    if params.kind == FILTERED:
        return dy, (dz - params.a1 * dy) / params.tau
    return dy, (dz + f_rate) / params.tau


def derivatives(params: PrimitiveParams, transform: TransformState, phase, goal=None):
    """Velocity and acceleration of ``y`` evaluated from the vector field."""
    pair = _phase_pair(params, phase)
    return _derivatives(params, transform.y, transform.z, forcing_batch(params, *pair),
                        forcing_rate_batch(params, *pair), goal)


def integrate(params: PrimitiveParams, state: TransformState, dt: float, n_samples: int,
              phase=None, extra=None):
    """Integrate from ``state``; returns ``(Y, Z, phase_samples, stage_forcing)``.

    ``phase`` is the starting canonical state (default: the initial phase).
    """
    states, stages = _canonical_run(params, dt, n_samples, phase)
    fs = forcing_batch(params, stages[..., 0], stages[..., 1])
    Y = np.empty((n_samples, params.n_dof))
    Z = np.empty_like(Y)
    y, z = np.array(state.y, dtype=float), np.array(state.z, dtype=float)
    for k in range(n_samples):
        Y[k], Z[k] = y, z
        if k + 1 < n_samples:
            if extra is None:
                y, z = _rk4_transform(params, y, z, fs[k], dt)
            else:
                y, z = _rk4_transform(params, y, z, fs[k], dt,
                                      extra=lambda i, yy, zz, k=k: extra(k, i, yy, zz))
    return Y, Z, states, fs


def rollout(params: PrimitiveParams, y0=None, ydot0=None, dt: float = DEFAULT_DT,
            duration: float | None = None) -> Trajectory:
    """Integrate a primitive from ``(y0, ydot0)``.

    Parameters
    ----------
    params : PrimitiveParams
    y0, ydot0 : array-like, optional
        Start position and velocity (default to ``params.y0`` and
        ``params.ydot0``, or zeros when those are unset).
    dt : float
        Fixed RK4 step, at most ``tau / 10``.
    duration : float, optional
        Defaults to ``tau`` for discrete/filtered and ``2 pi tau`` for
        rhythmic primitives.

    Returns
    -------
    Trajectory
        ``floor(duration / dt) + 1`` samples; accelerations come from the
        vector field, not from differencing.
    """
    _check_dt(params, dt)
    _check_goal(params)
    if duration is None:
        duration = params.tau * (2 * np.pi if params.kind == RHYTHMIC else 1.0)
    n = n_samples_for(duration, dt)
    if y0 is None:
        y0 = params.y0 if params.y0 is not None else np.zeros(params.n_dof)
    elif params.kind != RHYTHMIC:
        params = starting_at(params, y0)
    if ydot0 is None:
        ydot0 = params.ydot0
    state = initial_transform(params, y0, ydot0)
    Y, Z, ph, _ = integrate(params, state, dt, n)
    f = forcing_batch(params, ph[:, 0], ph[:, 1])
    f_rate = forcing_rate_batch(params, ph[:, 0], ph[:, 1])
    Yd, Ydd = _derivatives(params, Y, Z, f, f_rate)
    return Trajectory(dt, Y, Yd, Ydd, params.dof_names)
