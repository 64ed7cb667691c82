import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dmpflight import contraction as ct
from dmpflight import coupling
from dmpflight.exceptions import NonFiniteError, NotHurwitzError, SingularMetricError


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_jacobi_matches_numpy(a):
    s = 0.5 * (a + a.T)
    w, v = ct.jacobi_eigh(s)
    assert np.allclose(w, np.linalg.eigvalsh(s), atol=1e-9 * max(1.0, np.abs(s).max()))
    assert np.allclose(v.T @ v, np.eye(5), atol=1e-9)
    assert np.allclose(s @ v, v * w, atol=1e-8 * max(1.0, np.abs(s).max()))


def test_jacobi_tiny_off_diagonal():
    s = np.array([[1.0, 1e-310], [1e-310, -2.0]])
    w, _ = ct.jacobi_eigh(s)
    assert np.allclose(w, [-2.0, 1.0])


def test_symmetric_part_of_damped_oscillator():
    # symmetric part of [[0, 1], [-1, -1]] is [[0, 0], [0, -1]]
    assert ct.symmetric_part_max_eig([[0.0, 1.0], [-1.0, -1.0]]) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# jacobians
# ---------------------------------------------------------------------------

def test_numeric_jacobian_linear_exact():
    A = np.array([[1.0, -2.0, 0.5], [0.0, 3.0, 1.0], [4.0, 0.0, -1.0]])
    J = ct.numeric_jacobian(lambda x, t: A @ x, np.array([0.3, -1.0, 2.0]))
    assert np.allclose(J, A, atol=1e-8)


def test_numeric_jacobian_square():
    J = ct.numeric_jacobian(lambda x, t: x ** 2, np.array([3.0]))
    assert J[0, 0] == pytest.approx(6.0, abs=1e-6)


def test_numeric_jacobian_constant_field():
    J = ct.numeric_jacobian(lambda x, t: np.array([1.0, 2.0]), np.zeros(2))
    assert np.array_equal(J, np.zeros((2, 2)))


def test_numeric_jacobian_non_finite():
    with pytest.raises(NonFiniteError):
        ct.numeric_jacobian(lambda x, t: np.where(x > 0, x, np.nan), np.array([0.0]))


def test_generalized_jacobian_identity_and_scalar():
    jac = np.array([[0.0, 1.0], [-1.0, -1.0]])
    assert np.allclose(ct.generalized_jacobian(ct.Metric.identity(2), jac), jac)
    assert np.allclose(ct.generalized_jacobian(ct.Metric(2 * np.eye(2)), jac), jac)


def test_generalized_jacobian_diagonal_metric():
    F = ct.generalized_jacobian(ct.Metric(np.diag([1.0, 2.0])), [[0.0, 1.0], [-1.0, -1.0]])
    assert np.allclose(F, [[0.0, 0.5], [-2.0, -1.0]])


def test_time_varying_metric_derivative():
    # Theta(t) = e^t I gives F = J + I
    m = ct.Metric(lambda t: np.exp(t) * np.eye(2))
    F = ct.generalized_jacobian(m, -3 * np.eye(2), t=0.4)
    assert np.allclose(F, -2 * np.eye(2), atol=1e-6)


def test_singular_metric():
    with pytest.raises(SingularMetricError):
        ct.Metric(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMetricError):
        ct.Metric(lambda t: np.zeros((2, 2))).at(0.0)


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------

def test_scalar_decay_contracting():
    t = np.linspace(0, 1, 11)
    rep = ct.check_trajectory(lambda x, t: -x, ct.Metric.identity(1), t, np.exp(-t))
    assert np.allclose(rep.lambda_max, -1.0, atol=1e-8)
    assert rep.verdict and rep.rate == pytest.approx(1.0, abs=1e-8)


def test_damped_oscillator_identity_vs_lyapunov_metric():
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    t = np.linspace(0, 5, 20)
    X = np.column_stack([np.cos(t), np.sin(t)])
    rep = ct.check_trajectory(lambda x, t: A @ x, ct.Metric.identity(2), t, X)
    # symmetric part [[0, 0], [0, -1]] has largest eigenvalue exactly 0
    assert rep.sup_lambda == pytest.approx(0.0, abs=1e-8)
    assert not rep.verdict
    rep2 = ct.check_trajectory(lambda x, t: A @ x, ct.lyapunov_metric(A), t, X)
    assert rep2.verdict and rep2.sup_lambda < 0


def test_report_to_dict_consistent():
    rep = ct.ContractionReport(np.arange(3.0), np.array([-1.0, -2.0, -0.5]), 1e-6)
    d = rep.to_dict()
    assert d["contracting"] and d["sup_lambda_max"] == -0.5 and d["rate"] == 0.5


def test_margin_applies():
    rep = ct.ContractionReport(np.arange(2.0), np.array([-1e-7, -1.0]), 1e-6)
    assert not rep.verdict


def test_non_finite_samples():
    with pytest.raises(NonFiniteError):
        ct.check_trajectory(lambda x, t: -x, ct.Metric.identity(1), [0.0], [np.nan])


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-3, 3)),
       arrays(np.float64, (3, 3), elements=st.floats(-5, 5)))
def test_skew_term_does_not_change_lambda(a, b):
    skew = b - b.T
    t = np.linspace(0, 1, 4)
    X = np.outer(np.cos(t), [1.0, -0.5, 2.0])
    f1 = lambda x, t: a @ x + np.sin(x)
    f2 = lambda x, t: a @ x + np.sin(x) + (1 + t) * skew @ x
    r1 = ct.check_trajectory(f1, ct.Metric.identity(3), t, X)
    r2 = ct.check_trajectory(f2, ct.Metric.identity(3), t, X)
    assert np.allclose(r1.lambda_max, r2.lambda_max, atol=1e-8)


# ---------------------------------------------------------------------------
# Lyapunov construction
# ---------------------------------------------------------------------------

def test_lyapunov_of_minus_identity():
    A = -np.eye(3)
    assert np.allclose(ct.lyapunov_solve(A), 0.5 * np.eye(3))
    m = ct.lyapunov_metric(A)
    assert np.allclose(m.theta, np.eye(3) / np.sqrt(2))
    F = ct.generalized_jacobian(m, A)
    assert ct.symmetric_part_max_eig(F) == pytest.approx(-1.0)


@pytest.mark.parametrize("k, c", [(1.0, 0.1), (156.25, 25.0), (4.0, 4.0)])
def test_lyapunov_metric_certifies_spring_damper(k, c):
    A = np.array([[0.0, 1.0], [-k, -c]])
    F = ct.generalized_jacobian(ct.lyapunov_metric(A), A)
    assert ct.symmetric_part_max_eig(F) < 0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_lyapunov_solve_matches_scipy(a):
    A = a - (np.abs(np.linalg.eigvals(a)).max() + 1.0) * np.eye(4)
    Q = np.diag([1.0, 2.0, 3.0, 4.0])
    P = ct.lyapunov_solve(A, Q)
    # scipy solves A X + X A^H = Q
    P_ref = scipy.linalg.solve_continuous_lyapunov(A.T, -Q)
    assert np.allclose(P, P_ref, rtol=1e-8, atol=1e-10)


def test_non_hurwitz_rejected():
    with pytest.raises(NotHurwitzError):
        ct.lyapunov_metric(np.array([[0.0, 1.0], [0.0, -1.0]]))


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------

def test_hierarchy_zero_interconnection():
    t = np.linspace(0, 1, 5)
    rep = ct.check_hierarchy(lambda x, t: -x, lambda x2, x1, t: -2 * x2,
                             (ct.Metric.identity(1), ct.Metric.identity(1)), t,
                             np.exp(-t), np.exp(-2 * t))
    assert rep.verdict and rep.coupling_bound == 0.0


def test_rhythmic_canonical_form_rate():
    # tau x' = -mu (x - x0) - y, tau y' = -mu (y - y0) + x: the skew part cancels
    mu, tau, x0, y0 = 2.0, 0.5, 0.3, -0.2

    def f(s, t):
        x, y = s
        return np.array([-mu * (x - x0) - y, -mu * (y - y0) + x]) / tau

    t = np.linspace(0, 2, 15)
    X = np.column_stack([np.cos(3 * t), np.sin(3 * t)])
    rep = ct.check_trajectory(f, ct.Metric.identity(2), t, X)
    assert rep.verdict
    assert np.allclose(rep.lambda_max, -mu / tau, atol=1e-8)


def test_dmp_hierarchy_certificate(minjerk_params):
    rep = coupling.hierarchy_certificate(minjerk_params)
    assert rep.top.verdict and rep.bottom.verdict
    assert np.isfinite(rep.coupling_bound) and rep.coupling_bound > 0
    assert rep.verdict


def test_dmp_hierarchy_rhythmic_phase_is_only_neutral(sine_params):
    rep = coupling.hierarchy_certificate(sine_params)
    assert rep.bottom.verdict
    # the phase angle neither contracts nor expands
    assert rep.top.sup_lambda == pytest.approx(0.0, abs=1e-9)
    assert not rep.verdict


# ---------------------------------------------------------------------------
# rate consistency
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("A", [np.array([[-1.0, 2.0], [0.0, -3.0]]),
                               np.array([[0.0, 1.0], [-4.0, -2.0]]),
                               np.array([[-2.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.5, 0.0, -1.5]])])
def test_measured_rate_not_slower_than_certificate(A):
    m = ct.lyapunov_metric(A)
    lam = ct.symmetric_part_max_eig(ct.generalized_jacobian(m, A))
    t = np.linspace(0.0, 5.0, 501)
    dx0 = np.ones(A.shape[0])
    dist = np.array([np.linalg.norm(m.theta @ scipy.linalg.expm(A * tk) @ dx0) for tk in t])
    rate = -np.polyfit(t, np.log(dist), 1)[0]
    assert rate >= abs(lam) * 0.95
    # the metric distance never grows faster than the certified bound allows
    assert np.all(dist <= dist[0] * np.exp(lam * t) * (1 + 1e-9))
