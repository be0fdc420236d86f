"""Heat semigroup on both backends and the power transform ``u = phi^(1/(1+delta))``.

``u`` is never time-stepped. It is always the transform of the exactly
evolved density, and the nonlinear equation
``du/dt = lap u + delta |grad u|^2 / u`` is checked as a consequence
(:func:`pde_residual`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mixtures
from .errors import ResolutionError
from .grid import ScalarField, TorusGrid, integrate
from .mixtures import GaussianMixture, QuadratureBox


@dataclass(frozen=True)
class DeltaIndex:
    """``delta`` in (-1, 1]; ``exploratory=True`` also admits ``delta > 1``
    (entropic index below one), which is never an asserted regime."""

    delta: float
    exploratory: bool = False

    def __post_init__(self):
        d = float(self.delta)
        if not d > -1:
            raise ValueError(f"delta must exceed -1, got {d}")
        if d > 1 and not self.exploratory:
            raise ValueError(f"delta must be <= 1 (got {d}); pass exploratory=True to allow it")
        object.__setattr__(self, "delta", d)

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + self.delta)

    @property
    def q(self) -> float:
        return delta_to_q(self.delta)


@dataclass(frozen=True)
class EntropicIndex:
    q: float

    def __post_init__(self):
        if not float(self.q) > 0:
            raise ValueError(f"entropic index must be positive, got {self.q}")
        object.__setattr__(self, "q", float(self.q))

    @property
    def is_shannon(self) -> bool:
        return self.q == 1.0

    def to_delta(self) -> DeltaIndex:
        return DeltaIndex(q_to_delta(self.q), exploratory=self.q < 1)


def q_to_delta(q: float) -> float:
    """``int u^2 = int phi^q`` with ``q = 2/(1+delta)``."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    return 2.0 / q - 1.0


def delta_to_q(delta: float) -> float:
    if not delta > -1:
        raise ValueError(f"delta must exceed -1, got {delta}")
    return 2.0 / (1.0 + delta)


def _delta(delta) -> float:
    return delta.delta if isinstance(delta, DeltaIndex) else DeltaIndex(delta, exploratory=True).delta


# -- torus ----------------------------------------------------------------

def evolve_torus(phi0: ScalarField, t: float) -> ScalarField:
    """Exact heat semigroup: mode ``k`` decays by ``exp(-|k|^2 t)``."""
    if not t >= 0:
        raise ValueError(f"time must be non-negative, got {t}")
    g = phi0.grid
    if t == 0:
        vals = phi0.values
    else:
        vals = g.inverse(g.forward(phi0.values) * np.exp(-g.k_squared * t))
    if vals.min() <= 0:
        raise ResolutionError(f"evolved density lost positivity at t={t} (min {vals.min():.3e})")
    return ScalarField(g, vals)


def delta_transform(phi, delta, box: QuadratureBox | None = None):
    """``phi ** (1/(1+delta))``.

    Accepts a :class:`ScalarField` (returns a field) or a mixture together
    with a quadrature box (returns the values at the box nodes, C order).
    """
    p = 1.0 / (1.0 + _delta(delta))
    if isinstance(phi, ScalarField):
        if phi.values.min() <= 0:
            raise ValueError("delta_transform needs a strictly positive density")
        return ScalarField(phi.grid, phi.values**p)
    if isinstance(phi, GaussianMixture):
        if box is None:
            box = mixtures.quadrature_box(phi)
        return np.exp(p * mixtures.log_density(phi, box.nodes()))
    raise TypeError(f"unsupported density type {type(phi).__name__}")


def trig_modes(dim: int, bandwidth: int) -> np.ndarray:
    """Integer mode vectors with ``0 < |m|_inf <= bandwidth`` in a half-space
    (first nonzero entry positive), so ``{m} U {-m}`` covers the cube once."""
    rng = np.arange(-bandwidth, bandwidth + 1)
    grid = np.stack(np.meshgrid(*([rng] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    keep = []
    for m in grid:
        nz = np.flatnonzero(m)
        if nz.size and m[nz[0]] > 0:
            keep.append(m)
    return np.array(keep, dtype=int)


def trig_polynomial(grid: TorusGrid, modes: np.ndarray, cos_coef: np.ndarray,
                    sin_coef: np.ndarray) -> np.ndarray:
    """``sum_m a_m cos(k_m . x) + b_m sin(k_m . x)`` sampled on the grid."""
    hat = np.zeros(grid.shape, dtype=complex)
    n = grid.n
    c = 0.5 * (np.asarray(cos_coef) - 1j * np.asarray(sin_coef)) * grid.size
    np.add.at(hat, tuple((modes % n).T), c)
    np.add.at(hat, tuple(((-modes) % n).T), np.conj(c))
    return np.fft.ifftn(hat).real


def random_log_density(grid: TorusGrid, rng: np.random.Generator, bandwidth: int = 3,
                       amplitude: float = 0.6, decay: float = 1.0) -> np.ndarray:
    """Random band-limited trig polynomial with RMS ``amplitude``; mode ``m``
    gets weight ``(1 + |m|^2)^(-decay/2)`` before rescaling."""
    modes = trig_modes(grid.dim, bandwidth)
    scale = (1.0 + (modes**2).sum(axis=1)) ** (-decay / 2)
    a = rng.normal(size=len(modes)) * scale
    b = rng.normal(size=len(modes)) * scale
    rms = np.sqrt(0.5 * (a**2 + b**2).sum())
    a *= amplitude / rms
    b *= amplitude / rms
    return trig_polynomial(grid, modes, a, b)


def normalized_exp(grid: TorusGrid, log_values: np.ndarray) -> ScalarField:
    vals = np.exp(log_values - log_values.max())
    vals /= integrate(vals, grid)
    return ScalarField(grid, vals, is_density=True)


def random_torus_density(grid: TorusGrid, rng: np.random.Generator, bandwidth: int = 3,
                         amplitude: float = 0.6, decay: float = 1.0) -> ScalarField:
    """``exp(P) / Z`` for a random band-limited trig polynomial ``P``."""
    return normalized_exp(grid, random_log_density(grid, rng, bandwidth, amplitude, decay))


# -- PDE residual ---------------------------------------------------------

def _torus_u(phi0: ScalarField, s: float, p: float) -> np.ndarray:
    return evolve_torus(phi0, s).values ** p


def pde_residual(phi0, delta, t: float, h: float, box: QuadratureBox | None = None) -> float:
    """Max-norm of ``(u(t+h) - u(t-h))/(2h) - lap u - delta |grad u|^2/u``.

    ``phi0`` is a torus density or a mixture (evaluated on ``box`` nodes).
    """
    if not t - h > 0:
        raise ValueError("need t - h > 0")
    dl = _delta(delta)
    p = 1.0 / (1.0 + dl)
    if isinstance(phi0, ScalarField):
        g = phi0.grid
        u = _torus_u(phi0, t, p)
        dudt = (_torus_u(phi0, t + h, p) - _torus_u(phi0, t - h, p)) / (2 * h)
        hat = g.forward(u)
        lap = g.inverse(hat * g.lap_multiplier)
        grad2 = sum(g.inverse(g.derivative_hat(hat, (j,))) ** 2 for j in range(g.dim))
        return float(np.abs(dudt - lap - dl * grad2 / u).max())
    if isinstance(phi0, GaussianMixture):
        if box is None:
            box = mixtures.quadrature_box(phi0, t + h, points=65)
        x = box.nodes()
        mt = phi0.evolve(t)
        logphi, a, B, _ = mixtures.log_jets(mt, x)
        u = np.exp(p * logphi)
        a2 = np.einsum("md,md->m", a, a)
        trB = np.einsum("mdd->m", B)
        lap = u * (p * trB + p * (p - 1) * a2)
        grad2_over_u = u * p * p * a2
        up = np.exp(p * mixtures.log_density(phi0.evolve(t + h), x))
        um = np.exp(p * mixtures.log_density(phi0.evolve(t - h), x))
        return float(np.abs((up - um) / (2 * h) - lap - dl * grad2_over_u).max())
    raise TypeError(f"unsupported density type {type(phi0).__name__}")
