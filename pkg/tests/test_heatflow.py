import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsallis_lab.errors import ResolutionError
from tsallis_lab.grid import ScalarField, TorusGrid, integrate
from tsallis_lab.heatflow import (DeltaIndex, EntropicIndex, delta_to_q, delta_transform,
                                  evolve_torus, normalized_exp, pde_residual, q_to_delta,
                                  random_torus_density, trig_modes)
from tsallis_lab.mixtures import GaussianMixture, quadrature_box, power_integral


def test_index_mapping():
    assert q_to_delta(2.0) == 0.0
    assert q_to_delta(1.0) == 1.0
    assert delta_to_q(-0.5) == 4.0
    assert DeltaIndex(0.0).p == 1.0
    assert DeltaIndex(1.0).q == 1.0
    with pytest.raises(ValueError):
        DeltaIndex(-1.0)
    with pytest.raises(ValueError):
        DeltaIndex(1.5)
    assert DeltaIndex(1.5, exploratory=True).q == pytest.approx(0.8)
    assert EntropicIndex(1.0).is_shannon
    assert EntropicIndex(3.0).to_delta().delta == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        EntropicIndex(0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 10.0))
def test_index_roundtrip(q):
    assert delta_to_q(q_to_delta(q)) == pytest.approx(q, rel=1e-14)


def test_eigenmode_decay_and_semigroup():
    g = TorusGrid(1, 64)
    (x,) = g.mesh()
    phi = ScalarField(g, (1 + 0.5 * np.cos(3 * x)) / (2 * math.pi))
    out = evolve_torus(phi, 0.2)
    np.testing.assert_allclose(out.values, (1 + 0.5 * math.exp(-9 * 0.2) * np.cos(3 * x)) / (2 * math.pi),
                               atol=1e-15)
    twice = evolve_torus(evolve_torus(phi, 0.1), 0.1)
    np.testing.assert_allclose(twice.values, out.values, atol=1e-15)
    assert integrate(out) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        evolve_torus(phi, -0.1)


def test_evolution_detects_lost_positivity():
    g = TorusGrid(1, 16)
    vals = np.full(g.shape, 1e-3)
    vals[0] = 0.0
    with pytest.raises(ResolutionError):
        evolve_torus(ScalarField(g, vals), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.9, 1.0))
def test_transform_preserves_power_integral(seed, delta):
    g = TorusGrid(2, 32)
    phi = random_torus_density(g, np.random.default_rng(seed), bandwidth=2, amplitude=0.5)
    u = delta_transform(phi, delta)
    q = delta_to_q(delta)
    assert integrate(u.values**2, g) == pytest.approx(integrate(phi.values**q, g), rel=1e-13)


def test_transform_on_mixture_nodes():
    m = GaussianMixture.standard_normal(1)
    box = quadrature_box(m, points=257)
    u = delta_transform(m, 0.0, box)
    assert u.sum() * box.cell_volume == pytest.approx(power_integral(m, 1.0, box), rel=1e-14)
    with pytest.raises(TypeError):
        delta_transform(np.ones(4), 0.0)


@pytest.mark.parametrize("dim,K", [(1, 3), (2, 2), (3, 1)])
def test_trig_modes_cover_half_the_cube(dim, K):
    modes = trig_modes(dim, K)
    assert len(modes) == ((2 * K + 1) ** dim - 1) // 2
    s = {tuple(m) for m in modes}
    assert not any(tuple(-m) in s for m in modes)


def test_random_density_is_seeded_and_normalized():
    g = TorusGrid(2, 32)
    a = random_torus_density(g, np.random.default_rng(5), 2, 0.5)
    b = random_torus_density(g, np.random.default_rng(5), 2, 0.5)
    assert np.array_equal(a.values, b.values)
    assert integrate(a) == pytest.approx(1.0, abs=1e-12)
    assert a.values.min() > 0


@pytest.mark.parametrize("delta", [0.0, 0.5, -0.5, 1.0])
def test_pde_residual_is_second_order_in_h_torus(delta):
    g = TorusGrid(1, 128)
    (x,) = g.mesh()
    phi = normalized_exp(g, np.cos(x) + 0.3 * np.sin(2 * x))
    r1 = pde_residual(phi, delta, 0.3, 1e-2)
    r2 = pde_residual(phi, delta, 0.3, 5e-3)
    assert r1 < 1e-4
    assert 3.5 < r1 / r2 < 4.5


def test_pde_residual_mixture():
    m = GaussianMixture([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.5]], [0.5, 0.8])
    r1 = pde_residual(m, 0.3, 0.2, 1e-2)
    r2 = pde_residual(m, 0.3, 0.2, 5e-3)
    assert r1 < 1e-3 and 3.5 < r1 / r2 < 4.5
    with pytest.raises(ValueError):
        pde_residual(m, 0.3, 0.01, 0.02)
