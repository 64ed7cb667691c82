import numpy as np
import pytest

from dmpflight import dmp, io, learning


@pytest.fixture(scope="session")
def sine_params():
    return io.read_params(io.bundled("sine.params.json"))


@pytest.fixture(scope="session")
def cosine_params():
    return io.read_params(io.bundled("cosine.params.json"))


@pytest.fixture(scope="session")
def minjerk_demo():
    y, yd, ydd = learning.minimum_jerk([0.0], [1.0], 1.0, 1e-3)
    return learning.Demonstration(1e-3, y, yd, ydd, ("y",))


@pytest.fixture(scope="session")
def minjerk_params(minjerk_demo):
    return learning.learn(minjerk_demo)


def smooth_weights(rng, n_dof, n_basis, scale=10.0, n_modes=4):
    """Random smooth weight profiles with |w| <= scale."""
    c = np.linspace(0.0, 1.0, n_basis)
    w = np.zeros((n_dof, n_basis))
    for d in range(n_dof):
        for k in range(1, n_modes + 1):
            w[d] += rng.normal() * np.sin(k * np.pi * c + rng.uniform(0, 2 * np.pi)) / k
    return scale * w / max(np.abs(w).max(), 1e-12)


def discrete_params(weights, g, tau=1.0, **kw):
    weights = np.atleast_2d(weights)
    return dmp.PrimitiveParams(kind=dmp.DISCRETE, basis=dmp.discrete_basis(weights.shape[1]),
                               weights=weights, g=g, tau=tau, **kw)
