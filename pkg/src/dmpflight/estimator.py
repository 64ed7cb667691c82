"""Scikit-learn style wrapper around learning and rollout."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import dmp
from .learning import Demonstration, learn, reproduction_rms


class DMPEstimator(BaseEstimator):
    """Learn a primitive from one demonstration and roll it out.

    Parameters
    ----------
    n_basis : int
        Number of basis functions per DOF.
    kind : {'discrete', 'rhythmic', 'filtered'}
    dt : float
        Sample spacing of the demonstration passed to :meth:`fit`.
    dof_names : tuple of str, optional

    Attributes
    ----------
    params_ : PrimitiveParams
    rms_ : ndarray
        Reproduction RMS error per DOF, relative to the demonstrated range.
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> t = np.linspace(0.0, 1.0, 1001)[:, None]
    >>> est = DMPEstimator(dt=1e-3).fit(t ** 2)
    >>> est.predict(np.array([1.0])).shape
    (1, 1)
    """

    def __init__(self, n_basis: int = dmp.DEFAULT_N_BASIS, kind: str = dmp.DISCRETE,
                 dt: float = dmp.DEFAULT_DT, dof_names=None):
        self.n_basis = n_basis
        self.kind = kind
        self.dt = dt
        self.dof_names = dof_names

    def fit(self, X, y=None):
        """Learn from positions ``X`` of shape ``(n_samples, n_dof)``; ``y`` is ignored."""
        X = check_array(X, ensure_min_samples=2)
        demo = Demonstration(self.dt, X, dof_names=tuple(self.dof_names or ()))
        self.params_ = learn(demo, n_basis=self.n_basis, kind=self.kind)
        self.rms_ = reproduction_rms(self.params_, demo)
        self.n_features_in_ = X.shape[1]
        self.n_samples_fit_ = X.shape[0]
        return self

    def rollout(self, goal=None, y0=None, duration=None) -> dmp.Trajectory:
        """Full rollout, optionally with a new goal or start."""
        check_is_fitted(self, "params_")
        params = self.params_ if goal is None else self.params_.with_goal(goal)
        return dmp.rollout(params, y0, dt=self.dt, duration=duration)

    def predict(self, t, goal=None, y0=None):
        """Positions at times ``t`` (linear interpolation of the rollout)."""
        check_is_fitted(self, "params_")
        t = check_array(np.asarray(t, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        traj = self.rollout(goal, y0, duration=max(float(t.max()), self.dt))
        return np.column_stack([np.interp(t, traj.t, traj.y[:, j]) for j in range(traj.n_dof)])

    def score(self, X, y=None) -> float:
        """Negative mean relative reproduction RMS on demonstration ``X``."""
        check_is_fitted(self, "params_")
        X = check_array(X, ensure_min_samples=2)
        demo = Demonstration(self.dt, X, dof_names=self.params_.dof_names)
        return -float(np.mean(reproduction_rms(self.params_, demo)))
