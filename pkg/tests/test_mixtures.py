import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint
from scipy.stats import multivariate_normal

from tsallis_lab import mixtures
from tsallis_lab.functionals import power_integral, shannon, tsallis
from tsallis_lab.mixtures import GaussianMixture, QuadratureBox


def test_validation():
    with pytest.raises(ValueError, match="sum"):
        GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        GaussianMixture([1.0], [[0.0]], [0.0])
    with pytest.raises(ValueError):
        GaussianMixture([1.0], [[0.0, 0, 0, 0]], [1.0])
    with pytest.raises(ValueError):
        GaussianMixture([1.0, 0.0], [[0.0], [1.0]], [1.0, 1.0])


def test_records_roundtrip_and_renormalize():
    m = GaussianMixture.from_records([{"weight": 2, "mean": [0, 1], "variance": 1},
                                      {"weight": 2, "mean": [1, 0], "variance": 0.5}])
    assert np.allclose(m.weights, 0.5)
    again = GaussianMixture.from_records(m.to_records())
    assert np.array_equal(again.means, m.means)
    with pytest.raises(ValueError):
        GaussianMixture.from_records([])


def test_heat_flow_adds_twice_time_to_variances():
    m = GaussianMixture([0.3, 0.7], [[0.0], [2.0]], [0.5, 1.0])
    assert np.allclose(m.evolve(0.25).variances, [1.0, 1.5])
    assert m.evolve(0.0) is m
    with pytest.raises(ValueError):
        m.evolve(-1.0)


def test_heat_flow_matches_convolution_quadrature():
    # oracle: phi_t(x) = int phi_0(y) p_t(x - y) dy computed by adaptive quadrature
    m = GaussianMixture([0.4, 0.6], [[-1.0], [1.5]], [0.3, 0.8])
    t = 0.35
    mt = m.evolve(t)
    for x in (-2.0, 0.1, 1.7):
        conv, _ = sint.quad(lambda y: math.exp(mixtures.log_density(m, [[y]])[0])
                            * math.exp(-(x - y) ** 2 / (4 * t)) / math.sqrt(4 * math.pi * t),
                            -12, 12, epsabs=1e-14, limit=200)
        assert math.exp(mixtures.log_density(mt, [[x]])[0]) == pytest.approx(conv, rel=1e-10)


def test_log_density_matches_scipy(rng):
    m = GaussianMixture.random(rng, 3, 3)
    x = rng.normal(size=(50, 3))
    ref = sum(w * multivariate_normal(mu, s * np.eye(3)).pdf(x)
              for w, mu, s in zip(m.weights, m.means, m.variances))
    np.testing.assert_allclose(np.exp(mixtures.log_density(m, x)), ref, rtol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_log_jets_against_finite_differences(rng, dim):
    m = GaussianMixture.random(rng, dim, 2)
    x0 = rng.normal(size=dim) * 0.5
    h = 1e-4
    E = np.eye(dim)

    def phi(x):
        return math.exp(mixtures.log_density(m, np.atleast_2d(x))[0])

    def lap(x):
        _, _, B, _ = mixtures.log_jets(m, np.atleast_2d(x))
        return phi(x) * np.trace(B[0])

    val, grad, hess = mixtures.density_and_derivatives(m, x0)
    fd_grad = np.array([(phi(x0 + h * e) - phi(x0 - h * e)) / (2 * h) for e in E])
    np.testing.assert_allclose(grad, fd_grad, rtol=1e-6, atol=1e-9)
    fd_hess = np.array([[(phi(x0 + h * a + h * b) - phi(x0 + h * a - h * b)
                          - phi(x0 - h * a + h * b) + phi(x0 - h * a - h * b)) / (4 * h * h)
                         for b in E] for a in E])
    np.testing.assert_allclose(hess, fd_hess, rtol=1e-5, atol=1e-8)
    _, _, _, c = mixtures.log_jets(m, np.atleast_2d(x0))
    fd_gl = np.array([(lap(x0 + h * e) - lap(x0 - h * e)) / (2 * h) for e in E])
    np.testing.assert_allclose(val * c[0], fd_gl, rtol=1e-6, atol=1e-9)


def test_single_component_grad_lap_closed_form():
    s, d = 0.7, 3
    m = GaussianMixture.standard_normal(d, s)
    x = np.array([[0.3, -0.4, 1.1]])
    _, a, B, c = mixtures.log_jets(m, x)
    y = x[0] / s
    np.testing.assert_allclose(a[0], -y, rtol=1e-14)
    np.testing.assert_allclose(c[0], y * ((d + 2) / s - y @ y), rtol=1e-13)


def test_gaussian_entropy_closed_forms():
    assert mixtures.gaussian_tsallis_closed_form(1.0, 1, 2.0) == pytest.approx(0.7179052, abs=1e-7)
    assert mixtures.gaussian_tsallis_closed_form(1 / (2 * math.pi), 1, 2.0) == pytest.approx(
        0.2928932, abs=1e-7)
    assert mixtures.gaussian_shannon_closed_form(1.0, 1) == pytest.approx(1.4189385, abs=1e-7)
    with pytest.raises(ValueError):
        mixtures.gaussian_tsallis_closed_form(1.0, 1, 1.0)
    with pytest.raises(ValueError):
        mixtures.gaussian_tsallis_closed_form(-1.0, 1, 2.0)


@pytest.mark.parametrize("dim,q,s", [(1, 2.0, 1.0), (2, 1.5, 0.6), (3, 2.894, 1.3), (1, 0.5, 2.0)])
def test_quadrature_matches_closed_form(dim, q, s):
    m = GaussianMixture.standard_normal(dim, s)
    assert power_integral(m, q) == pytest.approx(mixtures.gaussian_power_integral(s, dim, q), rel=1e-11)
    if q != 1:
        assert tsallis(m, q) == pytest.approx(mixtures.gaussian_tsallis_closed_form(s, dim, q),
                                              rel=1e-10, abs=1e-12)


def test_shannon_quadrature():
    m = GaussianMixture.standard_normal(1)
    assert shannon(m) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), rel=1e-12)
    m2 = GaussianMixture.standard_normal(2, 0.5)
    assert shannon(m2) == pytest.approx(mixtures.gaussian_shannon_closed_form(0.5, 2), rel=1e-12)


def test_box_and_chunks():
    box = QuadratureBox([0.0, 1.0], [1.0, 2.0], points=5)
    nodes = box.nodes()
    assert nodes.shape == (25, 2)
    assert np.array_equal(np.vstack(list(box.node_chunks(max_points=7))), nodes)
    assert box.cell_volume == pytest.approx(0.5 * 1.0)
    with pytest.raises(ValueError):
        QuadratureBox([0.0], [0.0])
    with pytest.raises(ValueError):
        QuadratureBox([0.0], [1.0], points=2)


def test_tail_radius_bounds_mass():
    from scipy.special import erfc
    r = mixtures.tail_radius(1e-12, 2)
    assert 2 * erfc(r / math.sqrt(2)) == pytest.approx(1e-12, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_mass_is_conserved_by_the_flow(seed, t):
    m = GaussianMixture.random(np.random.default_rng(seed), 1)
    assert power_integral(m.evolve(t), 1.0) == pytest.approx(1.0, abs=1e-11)
