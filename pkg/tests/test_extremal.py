import math

import numpy as np
import pytest

from tsallis_lab.errors import DegenerateInputError, LabError
from tsallis_lab.extremal import (C_CROSS, C_QUARTIC, DensityParam, ExtremalResult,
                                  maximize, reference_constant, ratio_objective, ratio_of_field,
                                  replay, replay_best, report_gap)
from tsallis_lab.grid import ScalarField, TorusGrid


@pytest.fixture
def p1():
    return DensityParam(TorusGrid(1, 128), 4)


def test_zero_theta_is_degenerate(p1):
    with pytest.raises(DegenerateInputError):
        ratio_objective(np.zeros(p1.size), "quartic_over_lap", p1)


def test_perturbation_oracle():
    g = TorusGrid(1, 64)
    (x,) = g.mesh()
    r = ratio_of_field(ScalarField(g, 1 + 0.1 * np.cos(x)), "quartic_over_lap").ratio
    assert r == pytest.approx(0.0075, rel=0.05)
    # log-expanded parametrization: P = 0.1 cos x gives the same leading order
    p = DensityParam(g, 2)
    theta = np.zeros(p.size)
    theta[0] = 0.1
    assert ratio_objective(theta, "quartic_over_lap", p) == pytest.approx(0.0075, rel=0.1)


def test_one_d_reduction_links_objectives(p1, rng):
    theta = p1.random_theta(rng, 0.5)
    q = ratio_objective(theta, "quartic_over_lap", p1)
    c = ratio_objective(theta, "cross_over_lap", p1)
    assert q == pytest.approx(3 * c, rel=1e-10)


def test_param_validation():
    with pytest.raises(ValueError):
        DensityParam(TorusGrid(1, 16), 8)
    p = DensityParam(TorusGrid(2, 32), 2)
    with pytest.raises(ValueError):
        p.log_density(np.zeros(3))
    with pytest.raises(ValueError):
        ratio_objective(np.zeros(p.size), "nope", p)
    assert DensityParam.from_spec(p.spec()) == p
    assert reference_constant("cross_over_lap", 1) == 3.0
    assert reference_constant("cross_over_lap", 2) == C_CROSS


@pytest.mark.parametrize("dim,n,K,which", [(1, 128, 4, "cross_over_lap"),
                                           (2, 32, 2, "cross_over_lap"),
                                           (2, 32, 2, "quartic_over_lap")])
def test_search_respects_constants(dim, n, K, which):
    p = DensityParam(TorusGrid(dim, n), K)
    res = maximize(which, p, seed=3, starts=3, budget=40)
    assert res.best_ratio <= res.constant
    assert not res.findings
    assert res.identity_worst <= 1e-7
    vals = [v for _, v in res.trace]
    assert vals == sorted(vals)
    assert report_gap(res).gap >= 0


def test_replay_is_bit_for_bit(p1, tmp_path):
    res = maximize("quartic_over_lap", p1, seed=11, starts=2, budget=30)
    res.write(tmp_path / "r.json")
    back = ExtremalResult.read(tmp_path / "r.json")
    again = replay(back)
    assert again.best_ratio == res.best_ratio
    assert again.best_theta == res.best_theta
    assert replay_best(back) == res.best_ratio


def test_threads_do_not_change_the_merge(p1):
    a = maximize("cross_over_lap", p1, seed=5, starts=3, budget=25, threads=1)
    b = maximize("cross_over_lap", p1, seed=5, starts=3, budget=25, threads=3)
    assert (a.best_ratio, a.best_seed, a.trace) == (b.best_ratio, b.best_seed, b.trace)


def test_larger_budget_never_widens_the_gap(p1):
    small = maximize("quartic_over_lap", p1, seed=2, starts=2, budget=20)
    large = maximize("quartic_over_lap", p1, seed=2, starts=2, budget=60)
    assert report_gap(large).gap <= report_gap(small).gap


def test_refinement_runs(p1):
    res = maximize("quartic_over_lap", p1, seed=1, starts=1, budget=80, refine=True)
    assert res.best_ratio <= C_QUARTIC


def test_all_starts_rejected():
    p = DensityParam(TorusGrid(1, 16), 4)
    with pytest.raises(LabError):
        maximize("quartic_over_lap", p, seed=0, starts=2, budget=10, amplitude=500.0)
