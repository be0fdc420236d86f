"""Time derivatives of ``int u^2 = int phi^q`` and of ``S_q`` along the heat flow.

Analytic side: with ``u = phi_t^(1/(1+delta))``,

    d/dt 1/2 int u^2      = -(1 - delta) int |grad u|^2
    d/dt 1/2 int|grad u|^2 = -(laplacian_sq + delta cross) =: -bracket

so ``d2/dt2 int u^2 = 4(1 - delta) bracket`` and
``d2/dt2 S_q = -4(1 - delta) bracket / (q - 1)``. At ``q = 1`` the entropy is
Shannon's, ``dH/dt`` is the Fisher information ``4 int |grad sqrt phi|^2`` and
``d2H/dt2 = -8 bracket(delta = 1)``.

Oracle side: finite differences of the same functionals evaluated on the
exactly evolved density. No time stepping is involved, so the gap between
the two is pure truncation plus rounding.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mixtures
from .errors import StepSizeError
from .functionals import MIXTURE_EPS_TAIL, _MIX_N0, _MIX_NMAX, compute_terms
from .grid import ScalarField, check_resolution, integrate
from .heatflow import evolve_torus, q_to_delta
from .inequalities import q_max
from .mixtures import GaussianMixture, QuadratureBox

ORDER_RANGE = (1.7, 2.3)
T_MIN = 0.01

SCAN_COLUMNS = (
    "q", "delta", "t", "d_dt_first", "bracket", "d2_dt2_int_u2", "d2_dt2_Sq",
    "fd_second_derivative", "fd_gap", "scale", "fd_order", "exploratory",
)


# -- evaluation helpers -----------------------------------------------------

def _density_at(initial, s: float):
    if isinstance(initial, ScalarField):
        return evolve_torus(initial, s)
    if isinstance(initial, GaussianMixture):
        return initial.evolve(s)
    raise TypeError(f"unsupported initial density {type(initial).__name__}")


def _terms_at(initial, delta: float, t: float, check: bool = True):
    rho = _density_at(initial, t)
    if isinstance(rho, ScalarField):
        u = ScalarField(rho.grid, rho.values ** (1.0 / (1.0 + delta)))
        if check:
            check_resolution(u.values, u.grid, f"u at t={t}")
        return compute_terms(u, delta, t)
    return compute_terms(initial, delta, t)


def _delta_of(q: float) -> float:
    return 1.0 if q == 1 else q_to_delta(q)


def first_derivative(source, delta, t: float | None = None) -> float:
    """``d/dt 1/2 int u^2 = -(1 - delta) int |grad u|^2``."""
    T = compute_terms(source, delta, t)
    return -(1.0 - T.delta) * T["dirichlet"]


@dataclass(frozen=True)
class SecondDerivative:
    q: float
    delta: float
    bracket: float
    d2_dt2_int_u2: float
    d2_dt2_Sq: float
    laplacian_sq: float
    cross: float

    @property
    def scale(self) -> float:
        """Magnitude against which the sign of ``d2_dt2_Sq`` is judged."""
        L, c = self.laplacian_sq, abs(self.cross)
        if self.q == 1:
            return 8.0 * (L + c)
        return 4.0 * abs(1.0 - self.delta) * (L + abs(self.delta) * c) / abs(self.q - 1.0)


def bracket_from_terms(T) -> SecondDerivative:
    dl = T.delta
    b = T["laplacian_sq"] + dl * T["cross"]
    q = 2.0 / (1.0 + dl)
    d2u = 4.0 * (1.0 - dl) * b
    d2s = -8.0 * b if dl == 1.0 else -d2u / (q - 1.0)
    return SecondDerivative(q, dl, b, d2u, d2s, T["laplacian_sq"], T["cross"])


def second_derivative_bracket(source, delta, t: float | None = None) -> SecondDerivative:
    """Bracket ``laplacian_sq + delta cross`` and the derived second derivatives.

    At ``delta = 1`` the entropy column holds ``d2H/dt2``.
    """
    return bracket_from_terms(compute_terms(source, delta, t))


# -- finite-difference oracle -----------------------------------------------

class FlowFunctional:
    """``s -> int phi_s^q`` (or the Fisher information for ``q = 1``).

    Mixture evaluations share one fixed box for every ``s`` in a stencil so
    that quadrature error varies smoothly in ``s`` and cancels in the
    differences.
    """

    def __init__(self, initial, q: float, t: float, h_max: float):
        self.initial, self.q = initial, float(q)
        self.box: QuadratureBox | None = None
        if isinstance(initial, GaussianMixture):
            self.box = self._fixed_box(initial, t, h_max)

    def _fixed_box(self, m: GaussianMixture, t: float, h_max: float) -> QuadratureBox:
        hi = m.evolve(t + h_max)
        spread = max(1.0, 1.0 / math.sqrt(self.q))
        box = mixtures.quadrature_box(hi, 0.0, MIXTURE_EPS_TAIL, _MIX_N0[m.dim], spread)
        lo = m.evolve(t - h_max)
        val = self._mixture_value(lo, box)
        while 2 * box.points - 1 <= _MIX_NMAX[m.dim]:
            box = box.with_points(2 * box.points - 1)
            new = self._mixture_value(lo, box)
            if abs(new - val) <= 1e-14 * abs(new):
                break
            val = new
        return box

    def _mixture_value(self, m: GaussianMixture, box: QuadratureBox) -> float:
        if self.q == 1:
            def fn(x):
                lp, a, _, _ = mixtures.log_jets(m, x)
                return (np.exp(lp) * np.einsum("md,md->m", a, a)).sum()
        else:
            def fn(x):
                return mixtures.power_sum(m, x, self.q)
        return float(mixtures.integrate_on_box(fn, box))

    def __call__(self, s: float) -> float:
        rho = _density_at(self.initial, s)
        if isinstance(rho, GaussianMixture):
            return self._mixture_value(rho, self.box)
        if self.q == 1:
            return fisher_information(rho)
        return integrate(rho.values**self.q, rho.grid)


def fisher_information(rho) -> float:
    """``int |grad phi|^2 / phi = 4 int |grad sqrt phi|^2``."""
    if isinstance(rho, ScalarField):
        g = rho.grid
        hat = g.forward(np.sqrt(rho.values))
        return 4.0 * sum(integrate(g.inverse(g.derivative_hat(hat, (j,))) ** 2, g)
                         for j in range(g.dim))
    if isinstance(rho, GaussianMixture):
        return FlowFunctional(rho, 1.0, 0.0, 0.0)(0.0)
    raise TypeError(f"unsupported density type {type(rho).__name__}")


def default_step(t: float) -> float:
    return max(1e-3, t / 100.0)


def _fd(F, t: float, h: float, q: float, stencil: int, cache: dict | None = None) -> float:
    def ev(s):
        if cache is None:
            return F(s)
        key = round(s, 15)
        if key not in cache:
            cache[key] = F(s)
        return cache[key]

    if q == 1:
        # Fisher information is dH/dt: one derivative left to take
        if stencil == 3:
            return (ev(t + h) - ev(t - h)) / (2 * h)
        return (-ev(t + 2 * h) + 8 * ev(t + h) - 8 * ev(t - h) + ev(t - 2 * h)) / (12 * h)
    if stencil == 3:
        return (ev(t + h) - 2 * ev(t) + ev(t - h)) / (h * h)
    return (-ev(t + 2 * h) + 16 * ev(t + h) - 30 * ev(t) + 16 * ev(t - h) - ev(t - 2 * h)) / (12 * h * h)


def fd_second_derivative(initial, q: float, t: float, h: float | None = None,
                         stencil: int = 3) -> float:
    """Finite-difference second time derivative of ``int phi_s^q`` at ``s = t``
    (of ``H`` via the Fisher information when ``q = 1``).

    ``stencil=3`` is the O(h^2) central difference; ``stencil=5`` the O(h^4)
    five-point formula.
    """
    if stencil not in (3, 5):
        raise ValueError("stencil must be 3 or 5")
    h = default_step(t) if h is None else h
    reach = h if stencil == 3 else 2 * h
    if not t - reach > 0:
        raise StepSizeError(f"stencil reaches s = {t - reach:.3g}; need t > {reach:.3g}")
    F = FlowFunctional(initial, q, t, reach)
    return _fd(F, t, h, q, stencil)


@dataclass(frozen=True)
class FDConvergence:
    steps: tuple
    fd_values: tuple
    analytic: float
    gaps: tuple
    orders: tuple
    noise_floor: float
    status: str  # "asymptotic" or "floor"

    @property
    def order(self) -> float:
        return float(np.mean(self.orders)) if self.orders else float("nan")

    def passes(self, lo: float = ORDER_RANGE[0], hi: float = ORDER_RANGE[1]) -> bool:
        return self.status == "floor" or all(lo <= o <= hi for o in self.orders)


def fd_convergence(initial, q: float, t: float, analytic: float | None = None,
                   h0: float | None = None, levels: int = 3, max_halvings: int = 10,
                   stencil: int = 3) -> FDConvergence:
    """Richardson ladder ``h, h/2, ..., h/2^(levels-1)`` for the FD oracle.

    Starts at ``h0`` (default ``t/4``) and halves the ladder until the
    measured orders settle in :data:`ORDER_RANGE`. If the gaps reach the
    rounding floor first the ladder is reported as ``"floor"``. Erratic,
    non-decreasing gaps above the floor raise :class:`StepSizeError`.
    """
    if analytic is None:
        T = _terms_at(initial, _delta_of(q), t, check=False)
        sd = bracket_from_terms(T)
        analytic = sd.d2_dt2_Sq if q == 1 else sd.d2_dt2_int_u2
    h = t / 4 if h0 is None else h0
    expected = 2 if stencil == 3 else 4
    reach = h if stencil == 3 else 2 * h
    F = FlowFunctional(initial, q, t, reach)
    cache: dict = {}
    mag = abs(F(t))
    last = None
    for _ in range(max_halvings + 1):
        hs = [h / 2**k for k in range(levels)]
        vals = [_fd(F, t, hk, q, stencil, cache) for hk in hs]
        gaps = [abs(v - analytic) for v in vals]
        # rounding in F amplified by the stencil
        amp = (1.0 / hs[-1]) if q == 1 else (4.0 / hs[-1] ** 2)
        floor = 64 * np.finfo(float).eps * mag * amp
        orders = [math.log2(gaps[k] / gaps[k + 1]) if gaps[k + 1] > 0 else math.inf
                  for k in range(levels - 1)]
        last = FDConvergence(tuple(hs), tuple(vals), float(analytic), tuple(gaps),
                             tuple(orders), float(floor), "asymptotic")
        if gaps[-1] <= 10 * floor:
            return replace(last, status="floor")
        lo, hi = expected - 0.3, expected + 0.3
        if all(lo <= o <= hi for o in orders):
            return last
        h /= 2
    raise StepSizeError(
        f"finite-difference ladder did not settle at q={q}, t={t}: gaps {last.gaps}, "
        f"orders {last.orders}"
    )


def gaussian_power_integral_d2(s0: float, dim: int, q: float, t: float = 0.0) -> float:
    """Closed-form ``d2/dt2 int phi_t^q`` for ``phi_0 = N(0, s0 I)``."""
    s = s0 + 2 * t
    a = dim * (1 - q) / 2
    C = (2 * math.pi) ** a * q ** (-dim / 2)
    return 4 * a * (a - 1) * C * s ** (a - 2)


def gaussian_shannon_d2(s0: float, dim: int, t: float = 0.0) -> float:
    return -2.0 * dim / (s0 + 2 * t) ** 2


# -- Shannon branch -----------------------------------------------------------

@dataclass(frozen=True)
class ShannonBranch:
    t: float
    entropy: float
    fisher: float
    d2H_analytic: float
    d2H_fd: float


def shannon_branch(initial, t: float, h: float | None = None) -> ShannonBranch:
    """Entropy, Fisher information (= dH/dt) and d2H/dt2 both ways at ``t``."""
    from .functionals import shannon

    h = default_step(t) if h is None else h
    rho = _density_at(initial, t)
    sd = bracket_from_terms(_terms_at(initial, 1.0, t))
    return ShannonBranch(t, shannon(rho), fisher_information(rho), sd.d2_dt2_Sq,
                         fd_second_derivative(initial, 1.0, t, h))


def fisher_monotone(initial, t_list: Sequence[float]) -> bool:
    vals = [fisher_information(_density_at(initial, s)) for s in sorted(t_list)]
    return all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


# -- scans --------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    q: float
    delta: float
    t: float
    d_dt_first: float
    bracket: float
    d2_dt2_int_u2: float
    d2_dt2_Sq: float
    fd_second_derivative: float
    fd_gap: float
    scale: float
    fd_order: float
    exploratory: bool

    def concave(self, rtol: float = 1e-8) -> bool:
        return self.d2_dt2_Sq <= rtol * self.scale


@dataclass
class ConcavityScan:
    backend: str
    descriptor: dict
    rows: list[ScanRow] = field(default_factory=list)
    order_failures: list[str] = field(default_factory=list)

    def asserted_rows(self) -> list[ScanRow]:
        return [r for r in self.rows if not r.exploratory]

    def violations(self, rtol: float = 1e-8) -> list[ScanRow]:
        return [r for r in self.asserted_rows() if not r.concave(rtol)]

    def sign_summary(self, rtol: float = 1e-8) -> dict:
        return {
            "rows": len(self.rows),
            "asserted": len(self.asserted_rows()),
            "positive_asserted": len(self.violations(rtol)),
            "positive_exploratory": sum(1 for r in self.rows if r.exploratory and not r.concave(rtol)),
            "order_failures": len(self.order_failures),
        }

    def passed(self, rtol: float = 1e-8) -> bool:
        return not self.violations(rtol) and not self.order_failures

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SCAN_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in SCAN_COLUMNS])

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "descriptor": self.descriptor,
            "columns": list(SCAN_COLUMNS),
            "rows": [[getattr(r, c) for c in SCAN_COLUMNS] for r in self.rows],
            "summary": self.sign_summary(),
            "order_failures": self.order_failures,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, default=_json_float))


def _fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _json_float(x):
    return float(x)


def _describe(initial) -> tuple[str, dict]:
    if isinstance(initial, ScalarField):
        g = initial.grid
        return "torus", {"dim": g.dim, "n": g.n, "length": g.length}
    return "mixture", {"dim": initial.dim, "components": initial.to_records()}


def scan_row(initial, q: float, t: float, order_check: bool = True,
             h: float | None = None) -> ScanRow:
    dim = initial.grid.dim if isinstance(initial, ScalarField) else initial.dim
    dl = _delta_of(q)
    T = _terms_at(initial, dl, t)
    sd = bracket_from_terms(T)
    target = sd.d2_dt2_Sq if q == 1 else sd.d2_dt2_int_u2
    fd = fd_second_derivative(initial, q, t, h)
    order = float("nan")
    if order_check:
        order = fd_convergence(initial, q, t, analytic=target).order
    d1 = 0.0 if dl == 1.0 else -(1.0 - dl) * T["dirichlet"]
    return ScanRow(q, dl, t, d1, sd.bracket, sd.d2_dt2_int_u2, sd.d2_dt2_Sq, fd,
                   abs(fd - target), sd.scale, order,
                   bool(q < 1 or q > q_max(dim) + 1e-12))


def concavity_scan(initial, q_list: Sequence[float], t_list: Sequence[float],
                   order_check: bool = True, threads: int = 1) -> ConcavityScan:
    """Every ``(q, t)`` pair; rows ordered by ``q`` then ``t`` regardless of
    how many worker threads computed them."""
    if min(t_list) < T_MIN:
        raise ValueError(f"scan times start at t = {T_MIN}")
    backend, desc = _describe(initial)
    jobs = [(float(q), float(t)) for q in q_list for t in t_list]

    def run(job):
        q, t = job
        try:
            return scan_row(initial, q, t, order_check), None
        except StepSizeError as exc:
            return scan_row(initial, q, t, False), f"q={q} t={t}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(run, jobs))
    else:
        out = [run(j) for j in jobs]
    scan = ConcavityScan(backend, desc)
    for row, err in out:
        scan.rows.append(row)
        if err is not None and not row.exploratory:
            scan.order_failures.append(err)
    return scan
