"""Margins of the integral inequalities and the two scalar optimizations
behind their constants.

Constants are kept as exact triples ``(a, b, c)`` meaning ``(a + b*sqrt5)/c``
and rendered to floats once, at import.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import InternalConsistencyError
from .functionals import Terms, compute_terms
from .grid import ScalarField, save_field
from .mixtures import GaussianMixture

SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class SurdConstant:
    """``(a + b sqrt5) / c`` with integer a, b, c."""

    a: int
    b: int
    c: int
    label: str = ""

    @property
    def value(self) -> float:
        return (self.a + self.b * SQRT5) / self.c

    def __float__(self) -> float:
        return self.value


CROSS_CONSTANT = SurdConstant(1, 1, 1, "sqrt5+1")
QUARTIC_CONSTANT = SurdConstant(6, 2, 1, "2sqrt5+6")
CROSS_CONSTANT_1D = SurdConstant(3, 0, 1, "3")
GOLDEN_RATIO = SurdConstant(1, 1, 2, "(1+sqrt5)/2")
# largest entropic index covered in d > 1: 2(sqrt5+1)/sqrt5 = (10 + 2 sqrt5)/5
Q_MAX_MULTI_D = SurdConstant(10, 2, 5, "2(sqrt5+1)/sqrt5")
Q_MAX_1D = SurdConstant(3, 0, 1, "3")

C_CROSS = CROSS_CONSTANT.value
C_QUARTIC = QUARTIC_CONSTANT.value


def q_max(dim: int) -> float:
    """Upper end of the entropic-index range with a concavity guarantee."""
    return Q_MAX_1D.value if dim == 1 else Q_MAX_MULTI_D.value


@dataclass(frozen=True)
class InequalityMargin:
    """``lhs <= rhs``; ``ratio`` is ``None`` when ``rhs`` is not positive."""

    name: str
    lhs: float
    rhs: float
    margin: float
    ratio: float | None

    @classmethod
    def of(cls, name: str, lhs: float, rhs: float) -> "InequalityMargin":
        lhs, rhs = float(lhs), float(rhs)
        return cls(name, lhs, rhs, rhs - lhs, lhs / rhs if rhs > 0 else None)

    def holds(self, rtol: float = 1e-8) -> bool:
        return self.margin >= -rtol * abs(self.rhs)

    def as_dict(self) -> dict:
        return asdict(self)


def _terms(source, delta, t) -> Terms:
    return compute_terms(source, delta, t)


def _guard(T: Terms, name: str) -> None:
    L, c = T["laplacian_sq"], T["cross"]
    if L <= 1e-300 and abs(c) > 1e-300:
        raise InternalConsistencyError(f"{name}: laplacian_sq vanishes but cross = {c:.3e}")


def lemma_sqrt5_margin(source, delta=0.0, t: float | None = None) -> InequalityMargin:
    """``cross <= (sqrt5 + 1) laplacian_sq``."""
    T = _terms(source, delta, t)
    _guard(T, "cross_sqrt5")
    return InequalityMargin.of("cross_sqrt5", T["cross"], C_CROSS * T["laplacian_sq"])


def functional_inequality_margin(source, delta=0.0, t: float | None = None) -> InequalityMargin:
    """``quartic <= (2 sqrt5 + 6) laplacian_sq``."""
    T = _terms(source, delta, t)
    _guard(T, "quartic_2sqrt5_6")
    return InequalityMargin.of("quartic_2sqrt5_6", T["quartic"], C_QUARTIC * T["laplacian_sq"])


def one_d_cross_bound(source, delta=0.0, t: float | None = None) -> tuple[InequalityMargin, InequalityMargin]:
    """``0 <= cross`` and ``cross <= 3 laplacian_sq`` (one dimension only)."""
    T = _terms(source, delta, t)
    if T.dim != 1:
        raise ValueError("one_d_cross_bound needs d = 1")
    _guard(T, "cross_1d")
    lower = InequalityMargin.of("cross_nonneg_1d", 0.0, T["cross"])
    # a zero lower bound has no meaningful ratio
    lower = InequalityMargin(lower.name, 0.0, lower.rhs, lower.margin, None)
    upper = InequalityMargin.of("cross_3_1d", T["cross"], 3.0 * T["laplacian_sq"])
    return lower, upper


def all_margins(T: Terms) -> list[InequalityMargin]:
    out = [lemma_sqrt5_margin(T), functional_inequality_margin(T)]
    if T.dim == 1:
        out.extend(one_d_cross_bound(T))
    return out


def margins_hold(margins, rtol: float = 1e-8) -> bool:
    """Lower bounds of zero are checked against the scale of their companions."""
    ok = True
    for m in margins:
        if m.name == "cross_nonneg_1d":
            ok &= m.margin >= -rtol * max(abs(x.rhs) for x in margins)
        else:
            ok &= m.holds(rtol)
    return bool(ok)


def chain_consistent(T: Terms, rtol: float = 1e-8) -> bool:
    """The quartic bound as an arithmetic consequence of the cross bound.

    Identity (37) gives ``quartic/2 = cross + 2 L - 8 hess_sqrt <= cross + 2 L``;
    with ``cross <= (sqrt5+1) L`` that is ``quartic <= (2 sqrt5 + 6) L``. The
    check confirms each link on the computed numbers, so a passing cross margin
    together with the identity forces a passing quartic margin.
    """
    L, c, Q, hs = T["laplacian_sq"], T["cross"], T["quartic"], T["hess_sqrt"]
    scale = Q + 2 * abs(c) + 4 * L + 16 * hs + 1e-300
    step1 = 0.5 * Q <= c + 2 * L + rtol * scale          # drop -8 hess_sqrt
    cross_ok = c <= C_CROSS * L + rtol * scale
    step2 = (not cross_ok) or (2 * (c + 2 * L) <= C_QUARTIC * L + 2 * rtol * scale)
    implied = (not cross_ok) or Q <= C_QUARTIC * L + 4 * rtol * scale
    return bool(step1 and step2 and implied)


# -- findings ---------------------------------------------------------------

def dump_finding(directory: str | Path, margin: InequalityMargin, source, **meta) -> Path:
    """Persist a violated margin with enough data to rebuild the input."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = f"finding_{margin.name}_{len(list(d.glob('finding_*.json'))):04d}"
    record = {"margin": margin.as_dict(), **meta}
    if isinstance(source, ScalarField):
        save_field(source, d / f"{stem}.field")
        record["field"] = f"{stem}.field"
    elif isinstance(source, GaussianMixture):
        record["mixture"] = source.to_records()
    path = d / f"{stem}.json"
    path.write_text(json.dumps(record, indent=2, default=repr))
    return path


# -- scalar optimizations ---------------------------------------------------

def lemma4_objective(eps):
    """``(2 eps^2 + 2)/(2 eps - 1)`` for ``eps > 1/2``."""
    eps = np.asarray(eps, dtype=float)
    return (2 * eps**2 + 2) / (2 * eps - 1)


@dataclass(frozen=True)
class ScalarOptimum:
    argopt: float
    value: float
    exact_argopt: float
    exact_value: float

    @property
    def arg_error(self) -> float:
        return abs(self.argopt - self.exact_argopt)

    @property
    def value_error(self) -> float:
        return abs(self.value - self.exact_value)


def lemma4_minimize(upper: float = 100.0) -> ScalarOptimum:
    """Minimize over ``(1/2, upper]``.

    Bounded Brent locates the basin; the stationarity condition
    ``eps^2 - eps - 1 = 0`` (numerator of the derivative) is then solved with
    ``brentq`` inside the Brent bracket, since function values alone cannot
    pin the argmin much below ``sqrt(machine eps)``.
    """
    res = minimize_scalar(lambda e: float(lemma4_objective(e)), bounds=(0.5 + 1e-9, upper),
                          method="bounded", options={"xatol": 1e-12})
    x0 = float(res.x)
    lo, hi = max(0.5 + 1e-9, x0 - 0.1), min(upper, x0 + 0.1)
    x = brentq(lambda e: e * e - e - 1.0, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return ScalarOptimum(x, float(lemma4_objective(x)), GOLDEN_RATIO.value, C_CROSS)


@dataclass(frozen=True)
class EpsilonSweep(ScalarOptimum):
    table: tuple = ()
    endpoint_values: tuple = ()
    symmetry_residual: float = 0.0


def sweep_objective(eps):
    eps = np.asarray(eps, dtype=float)
    return eps * (2 - 3 * eps)


def epsilon_sweep_1d(samples: int = 201) -> EpsilonSweep:
    """Maximize ``eps (2 - 3 eps)`` over ``(0, 2/3)``; also tabulate it."""
    x = brentq(lambda e: 2 - 6 * e, 1e-12, 2 / 3 - 1e-12, xtol=1e-16)
    grid = np.linspace(0.0, 2 / 3, samples)
    table = tuple(zip(grid.tolist(), sweep_objective(grid).tolist()))
    hs = np.linspace(0, 1 / 3, 17)
    sym = float(np.abs(sweep_objective(1 / 3 + hs) - sweep_objective(1 / 3 - hs)).max())
    ends = (float(sweep_objective(0.0)), float(sweep_objective(2 / 3)))
    return EpsilonSweep(x, float(sweep_objective(x)), 1 / 3, 1 / 3,
                        table=table, endpoint_values=ends, symmetry_residual=sym)
