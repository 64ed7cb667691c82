"""Numerical contraction checks along sampled trajectories.

A system ``x' = f(x, t)`` is certified contracting on a set of samples when
the symmetric part of the generalized Jacobian::

    F = (dTheta/dt + Theta df/dx) Theta^{-1}

is negative definite at every sample (largest eigenvalue below ``-margin``).
The check is only as strong as the sampling; it is not a proof.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import NonFiniteError, NotHurwitzError, SingularMetricError

DEFAULT_MARGIN = 1e-6
MAX_CONDITION = 1e12


def jacobi_eigh(S, tol: float = 1e-15, max_sweeps: int = 64):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as columns.
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                h = A[q, q] - A[p, p]
                if abs(apq) < 1e-18 * abs(h):
                    t = apq / h          # small-angle limit, avoids overflow
                else:
                    theta = h / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) \
                        if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
                V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def symmetric_part_max_eig(F) -> float:
    """Largest eigenvalue of ``(F + F^T) / 2``."""
    F = np.asarray(F, dtype=float)
    return float(jacobi_eigh(0.5 * (F + F.T))[0][-1])


@dataclass(frozen=True, eq=False)
class Metric:
    """Coordinate transform ``Theta`` of the generalized Jacobian.

    ``theta`` is either a constant square matrix or a callable ``t -> Theta``;
    for callables without ``theta_dot`` the derivative is obtained by
    central differences.
    """
    theta: np.ndarray | Callable
    theta_dot: np.ndarray | Callable | None = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if not callable(self.theta):
            th = np.atleast_2d(np.asarray(self.theta, dtype=float))
            _check_invertible(th)
            object.__setattr__(self, "theta", th)

    @classmethod
    def identity(cls, n: int) -> Metric:
        return cls(np.eye(n))

    def at(self, t: float = 0.0):
        """``(Theta, dTheta/dt)`` at time ``t``."""
        if callable(self.theta):
            th = np.atleast_2d(np.asarray(self.theta(t), dtype=float))
            _check_invertible(th)
            if self.theta_dot is None:
                h = self.fd_step
                th_dot = (np.asarray(self.theta(t + h)) - np.asarray(self.theta(t - h))) / (2 * h)
            else:
                th_dot = self.theta_dot(t) if callable(self.theta_dot) else self.theta_dot
        else:
            th = self.theta
            if self.theta_dot is None:
                th_dot = np.zeros_like(th)
            else:
                th_dot = self.theta_dot(t) if callable(self.theta_dot) else self.theta_dot
        return th, np.atleast_2d(np.asarray(th_dot, dtype=float))


def _check_invertible(theta):
    if theta.shape[0] != theta.shape[1]:
        raise SingularMetricError("metric must be square")
    if not np.all(np.isfinite(theta)):
        raise SingularMetricError("metric has non-finite entries")
    cond = np.linalg.cond(theta)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMetricError(f"metric is not uniformly invertible (cond={cond:.3g})")


def numeric_jacobian(fun, x, t: float = 0.0) -> np.ndarray:
    """Central-difference Jacobian of ``fun(x, t)`` with step ``1e-6 (1 + |x_i|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f0 = np.atleast_1d(np.asarray(fun(x, t), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise NonFiniteError("vector field returned non-finite values")
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp = np.atleast_1d(np.asarray(fun(xp, t), dtype=float))
        fm = np.atleast_1d(np.asarray(fun(xm, t), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteError("vector field returned non-finite values")
        J[:, i] = (fp - fm) / (2 * h)
    return J


def generalized_jacobian(metric: Metric, jac, t: float = 0.0) -> np.ndarray:
    """``F = (dTheta/dt + Theta J) Theta^{-1}``."""
    th, th_dot = metric.at(t)
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    # solve from the right instead of forming the inverse
    return np.linalg.solve(th.T, (th_dot + th @ jac).T).T


@dataclass(frozen=True)
class ContractionReport:
    times: np.ndarray
    lambda_max: np.ndarray
    margin: float = DEFAULT_MARGIN

    @property
    def sup_lambda(self) -> float:
        return float(np.max(self.lambda_max))

    @property
    def verdict(self) -> bool:
        return bool(self.sup_lambda < -self.margin)

    @property
    def rate(self) -> float:
        return abs(self.sup_lambda)

    def to_dict(self) -> dict:
        return {"contracting": self.verdict, "sup_lambda_max": self.sup_lambda,
                "rate": self.rate, "margin": self.margin, "n_samples": int(self.times.size)}


def check_trajectory(fun, metric: Metric, times, states, margin: float = DEFAULT_MARGIN,
                     jacobian=None) -> ContractionReport:
    """Evaluate ``lambda_max`` of the symmetric generalized Jacobian at every sample.

    ``fun(x, t)`` is the vector field; ``jacobian(x, t)`` may be given to
    skip finite differencing.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    states = np.asarray(states, dtype=float).reshape(times.size, -1)
    if not np.all(np.isfinite(states)):
        raise NonFiniteError("trajectory samples must be finite")
    lam = np.empty(times.size)
    for k, (t, x) in enumerate(zip(times, states)):
        J = jacobian(x, t) if jacobian is not None else numeric_jacobian(fun, x, t)
        lam[k] = symmetric_part_max_eig(generalized_jacobian(metric, J, t))
    return ContractionReport(times, lam, margin)


def lyapunov_solve(A, Q=None) -> np.ndarray:
    """Solve ``A^T P + P A = -Q`` (``Q`` defaults to identity) by vectorization."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    Q = np.eye(n) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    I = np.eye(n)
    # vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P), column-major vec
    K = np.kron(I, A.T) + np.kron(A.T, I)
    P = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def is_hurwitz(A, tol: float = 1e-12) -> bool:
    return bool(np.all(np.linalg.eigvals(np.atleast_2d(A)).real < -tol))


def lyapunov_metric(A) -> Metric:
    """Metric ``Theta = P^{1/2}`` with ``A^T P + P A = -I``.

    Under this metric the generalized Jacobian of ``x' = A x`` has symmetric
    part ``-P^{-1} / 2``, which is negative definite.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not is_hurwitz(A):
        raise NotHurwitzError("matrix has an eigenvalue with non-negative real part")
    P = lyapunov_solve(A)
    w, V = jacobi_eigh(P)
    if np.any(w <= 0):
        raise NotHurwitzError("Lyapunov solution is not positive definite")
    return Metric(V @ np.diag(np.sqrt(w)) @ V.T)


@dataclass(frozen=True)
class HierarchyReport:
    """Contraction of both diagonal blocks plus the size of the interconnection."""
    top: ContractionReport
    bottom: ContractionReport
    coupling_bound: float
    coupling_norms: np.ndarray = field(repr=False, default=None)

    @property
    def verdict(self) -> bool:
        return self.top.verdict and self.bottom.verdict and np.isfinite(self.coupling_bound)

    def to_dict(self) -> dict:
        return {"contracting": bool(self.verdict), "top": self.top.to_dict(),
                "bottom": self.bottom.to_dict(), "coupling_bound": self.coupling_bound}


def check_hierarchy(f_top, f_bottom, metrics, times, top_states, bottom_states,
                    margin: float = DEFAULT_MARGIN) -> HierarchyReport:
    """Check a cascade ``x1' = f_top(x1, t)``, ``x2' = f_bottom(x2, x1, t)``.

    Parameters
    ----------
    metrics : (Metric, Metric)
        Metrics of the top and bottom blocks.
    times, top_states, bottom_states : arrays
        Samples along a trajectory of the cascade.

    Returns
    -------
    HierarchyReport
        ``coupling_bound`` is ``sup ||Theta2 (df_bottom/dx1) Theta1^{-1}||_2``.
    """
    m_top, m_bottom = metrics
    times = np.atleast_1d(np.asarray(times, dtype=float))
    X1 = np.asarray(top_states, dtype=float).reshape(times.size, -1)
    X2 = np.asarray(bottom_states, dtype=float).reshape(times.size, -1)
    top = check_trajectory(f_top, m_top, times, X1, margin)
    lam = np.empty(times.size)
    norms = np.empty(times.size)
    for k, (t, x1, x2) in enumerate(zip(times, X1, X2)):
        J22 = numeric_jacobian(lambda x, tt: f_bottom(x, x1, tt), x2, t)
        J21 = numeric_jacobian(lambda x, tt: f_bottom(x2, x, tt), x1, t)
        lam[k] = symmetric_part_max_eig(generalized_jacobian(m_bottom, J22, t))
        th1, _ = m_top.at(t)
        th2, _ = m_bottom.at(t)
        norms[k] = np.linalg.norm(th2 @ J21 @ np.linalg.inv(th1), 2)
    bottom = ContractionReport(times, lam, margin)
    return HierarchyReport(top, bottom, float(np.max(norms)), norms)
