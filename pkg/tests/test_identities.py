import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from tsallis_lab.functionals import compute_terms, field_terms
from tsallis_lab.grid import ScalarField, TorusGrid, check_resolution, spectral_tail_ratio
from tsallis_lab.heatflow import normalized_exp, random_torus_density
from tsallis_lab.identities import (check_1d_reduction, check_bochner, check_ibp_suite,
                                    check_identity_36, check_identity_37, relative_residual,
                                    residuals_from_terms)
from tsallis_lab.mixtures import GaussianMixture

from conftest import constant_field


def test_random_torus_density_2d(torus2):
    assert check_identity_36(torus2) < 1e-8
    assert check_identity_37(torus2) < 1e-8


def test_constant_field_gives_zero_residuals():
    c = constant_field(TorusGrid(2, 16))
    r = check_ibp_suite(c)
    assert r.id36 == 0.0 and r.id37 == 0.0
    assert r.bochner_pointwise_max == 0.0
    assert max(r.ibp.values()) == 0.0
    assert check_1d_reduction(constant_field(TorusGrid(1, 16))) == 0.0


def test_mixture_1d():
    m = GaussianMixture([0.3, 0.7], [[-1.0], [0.8]], [0.4, 0.9])
    assert check_identity_36(m) < 1e-7
    assert check_identity_37(m) < 1e-7
    assert check_1d_reduction(m) < 1e-7


def test_identities_36_and_37_imply_each_other(torus2):
    # (36) minus (37) is the integrated pointwise decomposition, term for term
    T = compute_terms(torus2, 0.0)
    d36 = 3 * T["cross"] - (T["quartic"] + 8 * T["hess_sqrt"] - 8 * T["lap_sqrt"])
    d37 = T["cross"] - (0.5 * T["quartic"] + 8 * T["hess_sqrt"] - 2 * T["laplacian_sq"])
    ddec = 8 * T["lap_sqrt"] - (2 * T["laplacian_sq"] - 2 * T["cross"] + 0.5 * T["quartic"])
    assert abs(d36 - d37 - ddec) <= 1e-14 * (T["quartic"] + 8 * T["lap_sqrt"] + 3 * abs(T["cross"]))


def test_3d_random_density(rng):
    phi = random_torus_density(TorusGrid(3, 64), rng, bandwidth=2, amplitude=0.3, decay=2.0)
    assert check_identity_37(phi) < 1e-7
    assert check_identity_36(phi) < 1e-7


def test_bochner_on_plane_wave():
    g = TorusGrid(2, 32)
    x, y = g.mesh()
    u = ScalarField(g, 2.0 + np.cos(3 * x))
    assert check_bochner(u) < 1e-12
    # both sides written out: 1/2 lap |grad u|^2 = 81 (cos^2 - sin^2)
    from tsallis_lab.grid import laplacian
    lhs = 0.5 * laplacian(ScalarField(g, 9 * np.sin(3 * x) ** 2)).values
    np.testing.assert_allclose(lhs, 81 * (np.cos(3 * x) ** 2 - np.sin(3 * x) ** 2), atol=1e-10)


@pytest.mark.parametrize("dim,n", [(1, 256), (2, 64), (3, 48)])
def test_ibp_suite_on_torus_is_at_rounding_level(rng, dim, n):
    phi = random_torus_density(TorusGrid(dim, n), rng, bandwidth=2, amplitude=0.3, decay=2.0)
    u = ScalarField(phi.grid, phi.values ** 0.8)
    check_resolution(u.values, u.grid, tol=1e-11)
    r = check_ibp_suite(u, 0.25)
    assert max(r.ibp.values()) < 1e-10
    assert r.bochner_pointwise_max < 1e-9
    assert (r.one_d_reduction is None) == (dim > 1)


def test_lap_of_grad_sq_integrates_to_zero(torus2):
    T = field_terms(torus2, 0.0)
    assert abs(T["lap_G"]) <= 1e-13 * T["abs_lap_G"]


def test_mixture_2d_suite():
    m = GaussianMixture([0.5, 0.5], [[0.0, 0.0], [1.2, -0.4]], [0.6, 1.1])
    r = check_ibp_suite(m, 0.5)
    assert r.worst() < 1e-7
    assert r.bochner_pointwise_max < 1e-7


def test_single_gaussian_2d_vanishing_term_is_handled():
    # int lap u |grad sqrt u|^2 is exactly zero for an isotropic Gaussian in d = 2
    r = check_ibp_suite(GaussianMixture.standard_normal(2), 0.0, bochner=False)
    assert r.ibp_4a < 1e-10 and r.ibp_4b < 1e-10 and r.id36 < 1e-10


def test_one_d_reduction_exp_cos(exp_cos):
    assert check_1d_reduction(exp_cos) < 1e-9
    with pytest.raises(ValueError):
        check_1d_reduction(constant_field(TorusGrid(2, 16)))


def test_two_gaussian_1d_reduction():
    m = GaussianMixture([0.5, 0.5], [[-1.0], [1.0]], [0.3, 0.3])
    assert check_1d_reduction(m) < 1e-7


def test_unsupported_inputs_are_rejected():
    with pytest.raises(TypeError):
        check_ibp_suite(np.ones((4, 4)))


def test_relative_residual_guard():
    assert relative_residual(0.0, 0.0) == 0.0
    assert relative_residual(1.0, 3.0) == pytest.approx(0.5)


def test_residuals_do_not_grow_under_refinement():
    vals = []
    for n in (32, 64, 128):
        g = TorusGrid(1, n)
        (x,) = g.mesh()
        phi = normalized_exp(g, 0.8 * np.cos(x) + 0.3 * np.sin(2 * x))
        vals.append(residuals_from_terms(field_terms(phi, 0.0)).worst())
    assert vals[1] <= max(vals[0], 1e-12) and vals[2] <= max(vals[1], 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0), st.sampled_from([0.0, 0.5, -0.5]))
def test_scale_invariance(seed, c, delta):
    phi = random_torus_density(TorusGrid(2, 32), np.random.default_rng(seed), 2, 0.5)
    a = check_ibp_suite(phi, delta)
    b = check_ibp_suite(phi * c, delta)
    for k in ("id36", "id37", "ibp_1", "ibp_3"):
        assert abs(getattr(a, k) - getattr(b, k)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_identities_hold_on_random_resolved_densities(seed, dim):
    n = {1: 128, 2: 32, 3: 32}[dim]
    phi = random_torus_density(TorusGrid(dim, n), np.random.default_rng(seed), 2, 0.3, 2.0)
    assume(spectral_tail_ratio(phi.values, phi.grid) <= 1e-10)
    r = check_ibp_suite(phi, 0.0)
    assert r.id36 < 1e-8 and r.id37 < 1e-8
    assert max(r.ibp.values()) < 1e-10
