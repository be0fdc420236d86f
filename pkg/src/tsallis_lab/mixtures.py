"""Isotropic Gaussian mixtures on R^d: exact heat flow and closed-form jets.

The heat kernel ``p_t`` is a centred Gaussian with covariance ``2t I``, so
convolving a component of variance ``s`` with it gives variance ``s + 2t``.
Integrals over R^d are taken by tensor trapezoid quadrature over a
:class:`QuadratureBox` sized from the Gaussian tail bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import erfcinv

from . import _kernels

DEFAULT_EPS_TAIL = 1e-12


@dataclass(frozen=True)
class GaussianMixture:
    """``sum_i w_i N(mu_i, s_i I)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64)).copy()
        s = np.atleast_1d(np.asarray(self.variances, dtype=np.float64)).copy()
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu.reshape(w.size, -1)
        mu = mu.copy()
        if w.size < 1:
            raise ValueError("mixture needs at least one component")
        if mu.shape[0] != w.size or s.size != w.size:
            raise ValueError("weights, means and variances disagree on component count")
        if mu.shape[1] not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {mu.shape[1]}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("variances must be positive")
        if not np.all(np.isfinite(mu)):
            raise ValueError("means must be finite")
        for arr in (w, mu, s):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", s)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    @classmethod
    def standard_normal(cls, dim: int = 1, variance: float = 1.0) -> "GaussianMixture":
        return cls(np.ones(1), np.zeros((1, dim)), np.array([variance]))

    @classmethod
    def heat_kernel(cls, dim: int, t: float) -> "GaussianMixture":
        return cls.standard_normal(dim, 2.0 * t)

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "GaussianMixture":
        """Build from ``[{"weight": w, "mean": [...], "variance": s}, ...]``.

        Weights are renormalized to sum to one.
        """
        if not records:
            raise ValueError("empty mixture specification")
        w = np.array([float(r["weight"]) for r in records])
        mu = np.array([np.atleast_1d(np.asarray(r["mean"], dtype=float)) for r in records])
        s = np.array([float(r["variance"]) for r in records])
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        return cls(w / w.sum(), mu, s)

    def to_records(self) -> list[dict]:
        return [
            {"weight": float(w), "mean": [float(x) for x in mu], "variance": float(s)}
            for w, mu, s in zip(self.weights, self.means, self.variances)
        ]

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, n_components: int | None = None,
               spread: float = 1.0, var_range: tuple[float, float] = (0.3, 1.2)) -> "GaussianMixture":
        k = int(n_components or rng.integers(1, 4))
        w = rng.dirichlet(np.full(k, 2.0))
        w = w / w.sum()
        mu = rng.normal(scale=spread, size=(k, dim))
        s = rng.uniform(*var_range, size=k)
        return cls(w, mu, s)

    def evolve(self, t: float) -> "GaussianMixture":
        return evolve(self, t)


def evolve(m: GaussianMixture, t: float) -> GaussianMixture:
    """Heat flow for time ``t``: every variance grows by ``2t``."""
    if not t >= 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if t == 0:
        return m
    return GaussianMixture(m.weights, m.means, m.variances + 2.0 * t)


def log_jets(m: GaussianMixture, points: np.ndarray, use_numba: bool | None = None):
    """``(log phi, grad phi/phi, hess phi/phi, grad lap phi/phi)`` at ``points (M, d)``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, m.dim)
    return _kernels.mixture_logjets(pts, np.log(m.weights), m.means, m.variances,
                                    use_numba=use_numba)


def log_density(m: GaussianMixture, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, m.dim)
    diff = pts[:, None, :] - m.means[None, :, :]
    acc = np.einsum("mkd,mkd->mk", diff, diff)
    lk = (np.log(m.weights) - 0.5 * m.dim * np.log(2 * np.pi * m.variances))[None, :] \
        - 0.5 * acc / m.variances[None, :]
    lmax = lk.max(axis=1)
    return lmax + np.log(np.exp(lk - lmax[:, None]).sum(axis=1))


def power_sum(m: GaussianMixture, points: np.ndarray, q: float,
              use_numba: bool | None = None) -> float:
    """``sum phi(x)^q`` over ``points (M, d)``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, m.dim)
    return _kernels.mixture_power_sum(pts, np.log(m.weights), m.means, m.variances, q,
                                      use_numba=use_numba)


def density_and_derivatives(m: GaussianMixture, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of the mixture density at one point."""
    x = np.asarray(x, dtype=np.float64).reshape(1, m.dim)
    logphi, a, B, _ = log_jets(m, x)
    val = math.exp(logphi[0])
    return val, val * a[0], val * B[0]


def gaussian_tsallis_closed_form(s: float, d: int, q: float) -> float:
    """Tsallis entropy of ``N(0, s I_d)``.

    ``int phi^q = (2 pi s)^(d(1-q)/2) q^(-d/2)``.
    """
    if s <= 0:
        raise ValueError("variance must be positive")
    if q == 1:
        raise ValueError("q = 1 is the Shannon case; use gaussian_shannon_closed_form")
    return (1.0 - (2 * np.pi * s) ** (d * (1 - q) / 2) * q ** (-d / 2)) / (q - 1)


def gaussian_shannon_closed_form(s: float, d: int) -> float:
    return 0.5 * d * math.log(2 * math.pi * math.e * s)


def gaussian_power_integral(s: float, d: int, q: float) -> float:
    return (2 * np.pi * s) ** (d * (1 - q) / 2) * q ** (-d / 2)


# -- quadrature ------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureBox:
    center: np.ndarray
    half_widths: np.ndarray
    points: int = 64

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        h = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if c.shape != h.shape:
            raise ValueError("center and half_widths differ in shape")
        if np.any(h <= 0):
            raise ValueError("half-widths must be positive")
        if self.points < 3:
            raise ValueError("need at least 3 points per axis")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", h)

    @property
    def dim(self) -> int:
        return self.center.size

    def with_points(self, points: int) -> "QuadratureBox":
        return QuadratureBox(self.center, self.half_widths, points)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(c - h, c + h, self.points)
                for c, h in zip(self.center, self.half_widths)]

    @property
    def steps(self) -> np.ndarray:
        return 2 * self.half_widths / (self.points - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.steps))

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def node_chunks(self, max_points: int = 1 << 16) -> Iterator[np.ndarray]:
        """Nodes in slabs along axis 0 (keeps 3-d memory bounded).

        Endpoint nodes carry full weight; the box is sized so integrands are
        negligible there, which makes this the trapezoid rule.
        """
        axes = self.axes()
        inner = int(np.prod([a.size for a in axes[1:]])) if self.dim > 1 else 1
        rows = max(1, max_points // inner)
        rest = np.meshgrid(*axes[1:], indexing="ij") if self.dim > 1 else []
        rest = [g.ravel() for g in rest]
        for start in range(0, axes[0].size, rows):
            x0 = axes[0][start:start + rows]
            cols = [np.repeat(x0, inner)] + [np.tile(r, x0.size) for r in rest]
            yield np.stack(cols, axis=1)


def tail_radius(eps_tail: float, dim: int) -> float:
    """Radius r (in standard deviations) so a Gaussian has < eps_tail mass
    outside the cube of half-width r."""
    return float(np.sqrt(2.0) * erfcinv(eps_tail / dim))


def quadrature_box(m: GaussianMixture, t: float = 0.0, eps_tail: float = DEFAULT_EPS_TAIL,
                   points: int = 64, spread: float = 1.0) -> QuadratureBox:
    """Box covering every component mean +- r * spread * sqrt(s_i + 2t)."""
    if not 0 < eps_tail < 1:
        raise ValueError("eps_tail must lie in (0, 1)")
    r = tail_radius(eps_tail, m.dim)
    sig = np.sqrt(m.variances + 2.0 * t) * spread
    lo = (m.means - r * sig[:, None]).min(axis=0)
    hi = (m.means + r * sig[:, None]).max(axis=0)
    return QuadratureBox((lo + hi) / 2, (hi - lo) / 2, points)


def integrate_on_box(fn, box: QuadratureBox) -> np.ndarray:
    """Sum ``fn(nodes)`` (which returns per-chunk partial integrals) over chunks."""
    total = None
    for nodes in box.node_chunks():
        part = np.asarray(fn(nodes), dtype=float)
        total = part if total is None else total + part
    return total * box.cell_volume


def power_integral(m: GaussianMixture, q: float, box: QuadratureBox) -> float:
    """``int phi^q`` by trapezoid quadrature over ``box``."""
    return float(integrate_on_box(lambda x: power_sum(m, x, q), box))
