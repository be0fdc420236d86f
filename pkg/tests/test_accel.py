import numpy as np
import pytest

from tsallis_lab import _kernels as K
from tsallis_lab._accel import ENV_FLAG, HAVE_NUMBA, numba_enabled
from tsallis_lab.mixtures import GaussianMixture


def test_env_flag_disables_numba(monkeypatch):
    monkeypatch.setenv(ENV_FLAG, "1")
    assert not numba_enabled()
    monkeypatch.setenv(ENV_FLAG, "off")
    assert numba_enabled() == HAVE_NUMBA
    assert not numba_enabled(False)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_logjet_paths_agree(rng, dim):
    m = GaussianMixture.random(rng, dim, 3)
    X = rng.normal(size=(500, dim)) * 2
    a = K.mixture_logjets(X, np.log(m.weights), m.means, m.variances, use_numba=False)
    b = K.mixture_logjets(X, np.log(m.weights), m.means, m.variances, use_numba=True)
    for x, y in zip(a, b):
        np.testing.assert_allclose(y, x, rtol=1e-12, atol=1e-12 * np.abs(x).max())


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_far_tail_log_sum_exp_is_stable():
    m = GaussianMixture([0.5, 0.5], [[0.0], [1.0]], [0.1, 0.1])
    X = np.array([[60.0], [-60.0]])
    for nb in (False, True):
        logphi, a, _, _ = K.mixture_logjets(X, np.log(m.weights), m.means, m.variances, use_numba=nb)
        assert np.all(np.isfinite(logphi)) and np.all(np.isfinite(a))


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("q", [0.7, 1.5, 2.894])
def test_power_sum_paths_agree(rng, q):
    m = GaussianMixture.random(rng, 2, 3)
    X = rng.normal(size=(400, 2)) * 3
    args = (X, np.log(m.weights), m.means, m.variances, q)
    a = K.mixture_power_sum(*args, use_numba=False)
    b = K.mixture_power_sum(*args, use_numba=True)
    assert b == pytest.approx(a, rel=1e-13)
    ref = np.sum(np.exp(q * K.mixture_logjets(X, *args[1:4])[0]))
    assert a == pytest.approx(ref, rel=1e-13)
