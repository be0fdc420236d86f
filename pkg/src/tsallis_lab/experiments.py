"""Randomized trials shared by the command line and the acceptance suite."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_DENSITY, DEFAULT_N, MIXTURE_TOLERANCES, TORUS_TOLERANCES
from .functionals import field_terms, mixture_terms
from .grid import ScalarField, TorusGrid, check_resolution
from .heatflow import delta_to_q, random_torus_density
from .identities import IdentityResiduals, check_bochner, residuals_from_terms
from .inequalities import all_margins, chain_consistent, margins_hold
from .mixtures import GaussianMixture

RESIDUAL_KEYS = ("id36", "id37", "bochner_pointwise_max", "ibp_1", "ibp_2", "ibp_3",
                 "ibp_4a", "ibp_4b", "one_d_reduction", "decomposition",
                 "decomposition_pointwise")
# tolerance key for each residual column
_TOL_KEY = {"id36": "id", "id37": "id", "bochner_pointwise_max": "bochner",
            "ibp_1": "ibp", "ibp_2": "ibp", "ibp_3": "ibp", "ibp_4a": "ibp", "ibp_4b": "ibp",
            "one_d_reduction": "one_d", "decomposition": "decomposition",
            "decomposition_pointwise": "decomposition"}
MARGIN_KEYS = ("cross_sqrt5", "quartic_2sqrt5_6", "cross_nonneg_1d", "cross_3_1d")

TRIAL_COLUMNS = (
    ("trial", "seed", "backend", "dim", "resolution", "delta", "q")
    + RESIDUAL_KEYS
    + tuple(f"{k}_{f}" for k in MARGIN_KEYS for f in ("lhs", "rhs", "margin", "ratio"))
    + ("chain_consistent", "min_u", "passed")
)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def torus_density(dim: int, rng: np.random.Generator, n: int | None = None,
                  bandwidth: int | None = None, amplitude: float | None = None,
                  decay: float | None = None, length: float = 2 * math.pi) -> ScalarField:
    K, a, dec = DEFAULT_DENSITY[dim]
    grid = TorusGrid(dim, n or DEFAULT_N[dim], length)
    return random_torus_density(grid, rng, bandwidth or K, a if amplitude is None else amplitude,
                                dec if decay is None else decay)


def random_mixture(dim: int, rng: np.random.Generator,
                   n_components: int | None = None) -> GaussianMixture:
    return GaussianMixture.random(rng, dim, n_components)


@dataclass
class TrialOutcome:
    row: dict
    residuals: IdentityResiduals
    margins: list
    failures: list


def run_trial(density, delta: float, tol: dict | None = None, trial: int = 0,
              seed: int = 0, bochner: bool = True) -> TrialOutcome:
    """Identities and margins for one density at one ``delta``.

    A torus ``density`` is transformed to ``u`` on its grid and must meet
    the resolution policy; a mixture is handled by adaptive quadrature.
    """
    if isinstance(density, ScalarField):
        tol = tol or TORUS_TOLERANCES
        u = ScalarField(density.grid, density.values ** (1.0 / (1.0 + delta)))
        check_resolution(u.values, u.grid, f"u (trial {trial}, delta={delta})")
        T = field_terms(u, delta)
        res = residuals_from_terms(T)
    elif isinstance(density, GaussianMixture):
        tol = tol or MIXTURE_TOLERANCES
        T = mixture_terms(density, delta)
        b = check_bochner(density, delta) if bochner else float("nan")
        res = residuals_from_terms(T, b)
    else:
        raise TypeError(f"unsupported density type {type(density).__name__}")
    margins = all_margins(T)
    chain = chain_consistent(T, tol["margin"])
    failures = []
    for k in RESIDUAL_KEYS:
        v = getattr(res, k)
        if v is None or (k == "bochner_pointwise_max" and not bochner):
            continue
        if not v <= tol[_TOL_KEY[k]]:
            failures.append(f"{k}={v:.3e} > {tol[_TOL_KEY[k]]:.0e}")
    if not margins_hold(margins, tol["margin"]):
        failures.extend(f"{m.name} margin {m.margin:.3e}" for m in margins
                        if m.margin < -tol["margin"] * abs(m.rhs))
    if not chain:
        failures.append("chain consistency")
    row = {"trial": trial, "seed": seed, "backend": T.backend, "dim": T.dim,
           "resolution": T.resolution, "delta": float(delta), "q": delta_to_q(delta)}
    row.update({k: getattr(res, k) for k in RESIDUAL_KEYS})
    by_name = {m.name: m for m in margins}
    for k in MARGIN_KEYS:
        m = by_name.get(k)
        for f in ("lhs", "rhs", "margin", "ratio"):
            row[f"{k}_{f}"] = None if m is None else getattr(m, f)
    row.update(chain_consistent=chain, min_u=T.min_u, passed=not failures)
    return TrialOutcome(row, res, margins, failures)
