import json
import math

import numpy as np
import pytest

from tsallis_lab.concavity import (SCAN_COLUMNS, concavity_scan, fd_convergence,
                                   fd_second_derivative, first_derivative, fisher_information,
                                   fisher_monotone, gaussian_power_integral_d2,
                                   gaussian_shannon_d2, second_derivative_bracket,
                                   shannon_branch)
from tsallis_lab.errors import StepSizeError
from tsallis_lab.functionals import power_integral
from tsallis_lab.grid import ScalarField, TorusGrid
from tsallis_lab.heatflow import delta_transform, evolve_torus, random_torus_density
from tsallis_lab.mixtures import GaussianMixture

from conftest import constant_field

GAUSS_D2 = 1.5 / math.sqrt(math.pi)


def test_first_derivative_sign_and_mass_conservation(torus2):
    assert first_derivative(delta_transform(torus2, 1.0), 1.0) == 0.0
    assert first_derivative(delta_transform(torus2, 0.3), 0.3) < 0
    assert first_derivative(constant_field(torus2.grid), 0.0) == 0.0


def test_first_derivative_matches_fd(torus2):
    h, t, dl = 1e-3, 0.2, 0.0
    F = [0.5 * power_integral(evolve_torus(torus2, s), 2.0) for s in (t - h, t + h)]
    fd = (F[1] - F[0]) / (2 * h)
    an = first_derivative(delta_transform(evolve_torus(torus2, t), dl), dl)
    assert fd == pytest.approx(an, rel=1e-4)


def test_single_gaussian_second_derivative():
    sd = second_derivative_bracket(GaussianMixture.standard_normal(1), 0.0)
    assert sd.d2_dt2_int_u2 == pytest.approx(0.8462844, abs=1e-7)
    assert sd.d2_dt2_int_u2 == pytest.approx(GAUSS_D2, rel=1e-11)
    assert sd.bracket == sd.laplacian_sq
    assert gaussian_power_integral_d2(1.0, 1, 2.0) == pytest.approx(GAUSS_D2, rel=1e-15)


def test_fd_against_closed_form():
    m = GaussianMixture.standard_normal(1)
    t = 0.3
    exact = gaussian_power_integral_d2(1.0, 1, 2.0, t)
    assert fd_second_derivative(m, 2.0, t, 1e-2) == pytest.approx(exact, rel=1e-3)
    c = fd_convergence(m, 2.0, t, analytic=exact)
    assert all(1.7 <= o <= 2.3 for o in c.orders)
    assert c.gaps[0] / c.gaps[1] == pytest.approx(4.0, rel=0.1)


def test_sign_bookkeeping():
    m = GaussianMixture.standard_normal(2, 0.7)
    for q in (1.5, 2.0, 2.5):
        sd = second_derivative_bracket(m, 2 / q - 1, 0.1)
        assert sd.d2_dt2_int_u2 > 0 > sd.d2_dt2_Sq
        assert sd.d2_dt2_Sq == pytest.approx(-sd.d2_dt2_int_u2 / (q - 1), rel=1e-15)


def test_torus_eigenmode_oracle():
    g = TorusGrid(1, 64)
    (x,) = g.mesh()
    a = 0.4
    phi = ScalarField(g, (1 + a * np.cos(x)) / (2 * math.pi))
    t = 0.25
    exact = a * a * math.exp(-2 * t) / math.pi
    sd = second_derivative_bracket(evolve_torus(phi, t), 0.0)
    assert sd.d2_dt2_int_u2 == pytest.approx(exact, rel=1e-12)
    assert fd_second_derivative(phi, 2.0, t, 1e-3) == pytest.approx(exact, rel=1e-5)


def test_constant_bracket_is_zero():
    assert second_derivative_bracket(constant_field(TorusGrid(1, 16)), 0.5).bracket == 0.0


def test_shannon_branch_gaussian():
    m = GaussianMixture.standard_normal(1)
    t = 0.2
    sb = shannon_branch(m, t)
    assert sb.entropy == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 1.4), rel=1e-11)
    assert sb.fisher == pytest.approx(1 / 1.4, rel=1e-11)
    assert sb.d2H_analytic == pytest.approx(gaussian_shannon_d2(1.0, 1, t), rel=1e-10)
    assert sb.d2H_fd == pytest.approx(sb.d2H_analytic, rel=1e-4)


def test_shannon_uniform_torus():
    c = constant_field(TorusGrid(1, 32))
    assert fisher_information(c) == 0.0
    assert second_derivative_bracket(c, 1.0).d2_dt2_Sq == 0.0


def test_fisher_information_decreases(torus2):
    assert fisher_monotone(torus2, np.linspace(0.0, 1.0, 11))


def test_step_too_large():
    with pytest.raises(StepSizeError):
        fd_second_derivative(GaussianMixture.standard_normal(1), 2.0, 0.01, 0.05)
    with pytest.raises(ValueError):
        fd_second_derivative(GaussianMixture.standard_normal(1), 2.0, 0.5, 0.01, stencil=4)


def test_five_point_stencil_is_fourth_order():
    m = GaussianMixture.standard_normal(1)
    t = 0.5
    exact = gaussian_power_integral_d2(1.0, 1, 2.0, t)
    c = fd_convergence(m, 2.0, t, analytic=exact, stencil=5, h0=0.1)
    assert c.status == "floor" or all(3.5 <= o <= 4.5 for o in c.orders)


def test_scan_mixture_d1(tmp_path):
    m = GaussianMixture([0.5, 0.5], [[-1.0], [1.0]], [0.4, 0.7])
    scan = concavity_scan(m, [1.0, 1.5, 2.0, 2.5, 3.0, 5.0], [0.05, 0.5, 1.0])
    assert scan.passed()
    assert all(r.d2_dt2_Sq <= 1e-9 for r in scan.asserted_rows())
    assert [r.exploratory for r in scan.rows].count(True) == 3
    for r in scan.rows:
        assert r.delta == pytest.approx(2 / r.q - 1) or r.q == 1
        assert r.d2_dt2_int_u2 == 4 * (1 - r.delta) * r.bracket
        assert 1.7 <= r.fd_order <= 2.3
    scan.write_csv(tmp_path / "s.csv")
    scan.write_json(tmp_path / "s.json")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == ",".join(SCAN_COLUMNS)
    data = json.loads((tmp_path / "s.json").read_text())
    assert data["summary"]["rows"] == 18


def test_scan_torus_d2(rng):
    phi = random_torus_density(TorusGrid(2, 128), rng, 3, 0.5)
    scan = concavity_scan(phi, [1.2, 2.0, 2.894], [0.05, 0.5])
    assert scan.passed()
    assert all(r.d2_dt2_Sq <= 1e-9 for r in scan.rows)
    for r in scan.rows:
        if r.delta >= 0:
            assert r.bracket >= -1e-9 * r.scale


def test_scan_threads_do_not_change_results():
    m = GaussianMixture.standard_normal(1)
    a = concavity_scan(m, [1.5, 2.0], [0.1, 0.2], order_check=False, threads=1)
    b = concavity_scan(m, [1.5, 2.0], [0.1, 0.2], order_check=False, threads=3)
    assert repr(a.rows) == repr(b.rows)


def test_scan_rejects_too_early_times():
    with pytest.raises(ValueError):
        concavity_scan(GaussianMixture.standard_normal(1), [2.0], [0.001])
