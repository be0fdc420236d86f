"""Search for densities that push the inequality ratios towards their constants.

The search space is ``u = exp(P_theta)`` with ``P_theta`` a band-limited
trigonometric polynomial on the torus, so positivity is automatic and every
candidate is an admissible smooth density. Candidates that fail the spectral
resolution policy or the identity suite are rejected with a penalty instead
of being scored: aliased fields could otherwise fake large ratios.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateInputError, LabError, ResolutionError
from .functionals import field_terms
from .grid import ScalarField, TorusGrid, check_resolution
from .heatflow import trig_modes, trig_polynomial
from .identities import EPS_ABS, residuals_from_terms
from .inequalities import C_CROSS, C_QUARTIC, CROSS_CONSTANT_1D

OBJECTIVES = ("quartic_over_lap", "cross_over_lap")
IDENTITY_TOL = 1e-7
EXCESS_RTOL = 1e-6
_PENALTY = 1e6

# default coefficient bandwidth per dimension
DEFAULT_BANDWIDTH = {1: 8, 2: 8, 3: 4}


def reference_constant(which: str, dim: int) -> float:
    if which == "quartic_over_lap":
        return C_QUARTIC
    if which == "cross_over_lap":
        return CROSS_CONSTANT_1D.value if dim == 1 else C_CROSS
    raise ValueError(f"unknown objective {which!r}; expected one of {OBJECTIVES}")


@dataclass(frozen=True)
class DensityParam:
    """``theta = (cos coefficients, sin coefficients)`` over the half-space
    modes with ``|m|_inf <= bandwidth``."""

    grid: TorusGrid
    bandwidth: int
    normalize: bool = False

    def __post_init__(self):
        if self.bandwidth < 1:
            raise ValueError("bandwidth must be at least 1")
        if 3 * self.bandwidth > self.grid.n:
            raise ValueError(f"bandwidth {self.bandwidth} exceeds n/3 for n={self.grid.n}")
        object.__setattr__(self, "_modes", trig_modes(self.grid.dim, self.bandwidth))

    @property
    def modes(self) -> np.ndarray:
        return self._modes

    @property
    def size(self) -> int:
        return 2 * len(self._modes)

    def mode_weights(self) -> np.ndarray:
        w = 1.0 / (1.0 + (self._modes**2).sum(axis=1))
        return np.concatenate([w, w])

    def log_density(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValueError(f"theta must have length {self.size}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        k = len(self._modes)
        return trig_polynomial(self.grid, self._modes, theta[:k], theta[k:])

    def field(self, theta: np.ndarray) -> ScalarField:
        P = self.log_density(theta)
        vals = np.exp(P - P.max())
        if self.normalize:
            vals = vals / (vals.mean() * self.grid.volume)
        return ScalarField(self.grid, vals)

    def random_theta(self, rng: np.random.Generator, amplitude: float = 0.5) -> np.ndarray:
        """Coefficients with decaying variance, scaled to RMS ``amplitude``."""
        th = rng.normal(size=self.size) * self.mode_weights()
        rms = math.sqrt(0.5 * (th**2).sum())
        return th * (amplitude / rms) if rms > 0 else th

    def spec(self) -> dict:
        return {"dim": self.grid.dim, "n": self.grid.n, "length": self.grid.length,
                "bandwidth": self.bandwidth, "normalize": self.normalize}

    @classmethod
    def from_spec(cls, spec: dict) -> "DensityParam":
        return cls(TorusGrid(spec["dim"], spec["n"], spec.get("length", 2 * math.pi)),
                   spec["bandwidth"], spec.get("normalize", False))


@dataclass(frozen=True)
class Evaluation:
    ratio: float
    identity_worst: float


def ratio_of_field(u: ScalarField, which: str, delta: float = 0.0,
                   identity_tol: float | None = IDENTITY_TOL) -> Evaluation:
    """``quartic/laplacian_sq`` or ``cross/laplacian_sq`` for ``u``.

    Raises :class:`DegenerateInputError` when the denominator vanishes, and
    :class:`ResolutionError` when ``u`` breaks the resolution policy or the
    identity suite exceeds ``identity_tol``.
    """
    if which not in OBJECTIVES:
        raise ValueError(f"unknown objective {which!r}; expected one of {OBJECTIVES}")
    check_resolution(u.values, u.grid, "candidate u")
    T = field_terms(u, delta)
    L = T["laplacian_sq"]
    if not L > EPS_ABS:
        raise DegenerateInputError("laplacian_sq vanishes (constant density)")
    worst = residuals_from_terms(T).worst()
    if identity_tol is not None and not worst <= identity_tol:
        raise ResolutionError(f"candidate fails identity suite (worst residual {worst:.2e})")
    num = T["quartic"] if which == "quartic_over_lap" else T["cross"]
    return Evaluation(num / L, worst)


def ratio_objective(theta, which: str, param: DensityParam, delta: float = 0.0) -> float:
    return ratio_of_field(param.field(theta), which, delta).ratio


# -- search -------------------------------------------------------------------

@dataclass
class StartResult:
    seed: int
    best_ratio: float
    best_theta: list
    evaluations: int
    rejected: int
    identity_worst: float
    trace: list = field(default_factory=list)
    findings: list = field(default_factory=list)


class _Tracker:
    """Counts evaluations and keeps the monotone incumbent trace."""

    def __init__(self, which, param, delta, constant, budget):
        self.which, self.param, self.delta = which, param, delta
        self.constant, self.budget = constant, budget
        self.n = self.rejected = 0
        self.best, self.best_theta = -math.inf, None
        self.identity_worst = 0.0
        self.trace: list = []
        self.findings: list = []

    def __call__(self, theta: np.ndarray) -> float:
        self.n += 1
        try:
            ev = ratio_of_field(self.param.field(theta), self.which, self.delta)
        except (ResolutionError, DegenerateInputError, ValueError):
            self.rejected += 1
            return _PENALTY
        self.identity_worst = max(self.identity_worst, ev.identity_worst)
        r = ev.ratio
        if r > self.constant * (1 + EXCESS_RTOL):
            self.findings.append({"evaluation": self.n, "ratio": r,
                                  "theta": [float(x) for x in theta]})
        if r > self.best:
            self.best, self.best_theta = r, np.array(theta, dtype=float)
            self.trace.append((self.n, r))
        return -r


def _run_start(which, param, delta, seed, budget, amplitude, refine) -> StartResult:
    rng = np.random.default_rng(seed)
    direction = param.random_theta(rng, 1.0)
    constant = reference_constant(which, param.grid.dim)
    tr = _Tracker(which, param, delta, constant, budget)
    # an unresolvable start is shrunk towards the constant density
    for _ in range(6):
        theta0 = amplitude * direction
        if tr(theta0) < _PENALTY:
            break
        amplitude /= 2
    else:
        return StartResult(seed, -math.inf, [], tr.n, tr.rejected, 0.0)
    step = 0.1 * amplitude * param.mode_weights() / param.mode_weights().max()
    simplex = np.vstack([theta0] + [theta0 + np.eye(param.size)[i] * step[i]
                                    for i in range(param.size)])
    nm_budget = budget - 1 if not refine else max(1, (budget - 1) * 3 // 4)
    minimize(tr, theta0, method="Nelder-Mead",
             options={"maxfev": nm_budget, "initial_simplex": simplex,
                      "xatol": 1e-10, "fatol": 1e-12})
    left = budget - tr.n
    if refine and left > 2 * param.size and tr.best_theta is not None:
        minimize(tr, tr.best_theta, method="L-BFGS-B",
                 options={"maxfun": left, "eps": 1e-6})
    return StartResult(seed, tr.best, [float(x) for x in tr.best_theta], tr.n,
                       tr.rejected, tr.identity_worst, tr.trace, tr.findings)


@dataclass
class ExtremalResult:
    objective: str
    constant: float
    param: dict
    delta: float
    seed: int
    starts: int
    budget: int
    amplitude: float
    refine: bool
    best_ratio: float
    best_theta: list
    best_seed: int
    trace: list
    start_results: list
    wall_time: float

    @property
    def findings(self) -> list:
        return [f for s in self.start_results for f in s["findings"]]

    @property
    def identity_worst(self) -> float:
        return max(s["identity_worst"] for s in self.start_results)

    def to_json(self) -> dict:
        return asdict(self)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, default=float))

    @classmethod
    def read(cls, path: str | Path) -> "ExtremalResult":
        return cls(**json.loads(Path(path).read_text()))


def start_seeds(seed: int, starts: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(starts)]


def maximize(which: str, param: DensityParam, seed: int = 0, starts: int = 20,
             budget: int = 200, amplitude: float = 0.5, delta: float = 0.0,
             refine: bool = False, threads: int = 1) -> ExtremalResult:
    """Multi-start simplex search for the largest ratio.

    Each start is seeded from ``SeedSequence(seed).spawn``; starts are merged
    by (incumbent, seed) so the result does not depend on ``threads``.
    """
    if budget < 2:
        raise ValueError("budget must allow at least two evaluations")
    constant = reference_constant(which, param.grid.dim)
    seeds = start_seeds(seed, starts)
    t0 = time.perf_counter()

    def job(s):
        return _run_start(which, param, delta, s, budget, amplitude, refine)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(job, seeds))
    else:
        results = [job(s) for s in seeds]
    valid = [r for r in results if r.best_theta]
    if not valid:
        raise LabError("every start was degenerate or rejected")
    best = max(valid, key=lambda r: (r.best_ratio, -seeds.index(r.seed)))
    # global incumbent trace over starts in seed order, evaluations cumulative
    trace, inc, offset = [], -math.inf, 0
    for r in results:
        for n, v in r.trace:
            if v > inc:
                inc = v
                trace.append((offset + n, v))
        offset += r.evaluations
    return ExtremalResult(
        objective=which, constant=constant, param=param.spec(), delta=delta, seed=seed,
        starts=starts, budget=budget, amplitude=amplitude, refine=refine,
        best_ratio=best.best_ratio, best_theta=best.best_theta, best_seed=best.seed,
        trace=trace, start_results=[asdict(r) for r in results],
        wall_time=time.perf_counter() - t0,
    )


def replay(result: ExtremalResult) -> ExtremalResult:
    """Re-run the recorded search (single-threaded)."""
    return maximize(result.objective, DensityParam.from_spec(result.param), result.seed,
                    result.starts, result.budget, result.amplitude, result.delta,
                    result.refine)


def replay_best(result: ExtremalResult) -> float:
    """Re-evaluate the recorded best coefficients."""
    return ratio_objective(np.array(result.best_theta), result.objective,
                           DensityParam.from_spec(result.param), result.delta)


@dataclass(frozen=True)
class GapReport:
    objective: str
    constant: float
    best_ratio: float
    gap: float
    dim: int
    bandwidth: int
    starts: int
    budget: int
    seed: int


def report_gap(result: ExtremalResult, constant: float | None = None) -> GapReport:
    c = result.constant if constant is None else float(constant)
    return GapReport(result.objective, c, result.best_ratio, c - result.best_ratio,
                     result.param["dim"], result.param["bandwidth"], result.starts,
                     result.budget, result.seed)
