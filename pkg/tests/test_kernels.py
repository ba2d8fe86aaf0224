import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajsampler import kernels
from trajsampler.optimizer import OptimizerConfig, learning_rates

needs_numba = pytest.mark.skipif(kernels.NUMBA is None, reason="numba not installed")


def instance(seed, P=7, S=3, T=5):
    rng = np.random.default_rng(seed)
    points = rng.normal(0, 3, size=(P, T, 2)).cumsum(axis=1)
    w = rng.random(P)
    cands = rng.normal(0, 3, size=(S, T, 2)).cumsum(axis=1)
    return points, w / w.sum(), cands


@needs_numba
@given(st.integers(0, 10_000), st.booleans(), st.integers(1, 3))
def test_backends_agree_on_risk_and_grad(seed, final_only, k):
    points, w, cands = instance(seed)
    r0, g0 = kernels.risk_and_grad(points, w, cands, k, final_only, backend=kernels.NUMPY)
    r1, g1 = kernels.risk_and_grad(points, w, cands, k, final_only, backend=kernels.NUMBA)
    assert r0 == pytest.approx(r1, rel=1e-12, abs=1e-14)
    assert np.allclose(g0, g1, rtol=1e-12, atol=1e-14)


@needs_numba
@given(st.integers(0, 10_000), st.booleans())
def test_backends_agree_on_distances(seed, final_only):
    points, _, cands = instance(seed)
    a = kernels.distance_matrix(points, cands, final_only, backend=kernels.NUMPY)
    b = kernels.distance_matrix(points, cands, final_only, backend=kernels.NUMBA)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-13)


@needs_numba
@given(st.integers(0, 10_000))
def test_backends_agree_on_lloyd(seed):
    points, _, _ = instance(seed, P=12)
    X = points.reshape(12, -1)
    init = X[[0, 4, 9]]
    a = kernels.lloyd(X, init, 50, backend=kernels.NUMPY)
    b = kernels.lloyd(X, init, 50, backend=kernels.NUMBA)
    assert np.array_equal(a[1], b[1]) and a[2] == b[2]
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12)


@needs_numba
def test_backends_agree_on_short_descent():
    points, w, cands = instance(7, P=20, S=4)
    lrs, resets = learning_rates(OptimizerConfig(steps=40))
    a = kernels.adam_descent(points, w, cands, 4, False, lrs, resets, 0.9, 0.999, 1e-8, backend=kernels.NUMPY)
    b = kernels.adam_descent(points, w, cands, 4, False, lrs, resets, 0.9, 0.999, 1e-8, backend=kernels.NUMBA)
    assert np.allclose(a[0], b[0], atol=1e-10) and np.allclose(a[2], b[2], atol=1e-10)
    assert a[3] == b[3]


@pytest.mark.parametrize("backend", [kernels.NUMPY, kernels.NUMBA], ids=["numpy", "numba"])
def test_ties_route_to_lowest_index(backend):
    if backend is None:
        pytest.skip("numba not installed")
    points = np.array([[[1.0, 0.0], [2.0, 0.0]]])
    cands = np.zeros((2, 2, 2))  # identical candidates
    _, g = kernels.risk_and_grad(points, np.array([1.0]), cands, 2, False, backend=backend)
    assert np.all(g[1] == 0.0)
    assert np.allclose(g[0], [[-0.5, 0.0], [-0.5, 0.0]])


@pytest.mark.parametrize("backend", [kernels.NUMPY, kernels.NUMBA], ids=["numpy", "numba"])
def test_coincident_point_has_zero_gradient(backend):
    if backend is None:
        pytest.skip("numba not installed")
    points = np.array([[[1.0, 1.0], [2.0, 0.0]]])
    r, g = kernels.risk_and_grad(points, np.array([1.0]), points.copy(), 1, False, backend=backend)
    assert r == 0.0 and np.all(g == 0.0) and np.all(np.isfinite(g))


def _active_backend(env_value):
    env = dict(os.environ)
    env["TRAJSAMPLER_NO_NUMBA"] = env_value
    out = subprocess.run([sys.executable, "-c", "from trajsampler import kernels; print(kernels.ACTIVE.name)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy_path():
    assert _active_backend("1") == "numpy"
    if kernels.HAVE_NUMBA:
        assert _active_backend("") == "numba"
