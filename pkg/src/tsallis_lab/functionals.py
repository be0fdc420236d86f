"""Integral functionals of the transformed density ``u`` on either backend.

Everything downstream (identities, inequalities, time derivatives) is built
from one :class:`Terms` object: the quadrature sums of every integrand plus
a few pointwise maxima, produced in a single fused pass by
:func:`tsallis_lab._kernels.reduce_terms`.

Torus: derivatives are spectral; composite fields such as ``|grad sqrt u|^2``
are formed pointwise and then differentiated spectrally, so the discrete
integration-by-parts statements hold to rounding.

Mixtures: derivatives come from the closed-form log-jets via the chain rule
for ``phi ** p``; integrals are trapezoid sums over a box, doubled until
they stop moving.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import _kernels as K
from . import mixtures
from .errors import DegenerateInputError
from .grid import ScalarField, TorusGrid, integrate
from .heatflow import _delta, delta_to_q
from .mixtures import GaussianMixture, QuadratureBox

POSITIVITY_FLOOR = 1e-10

# starting / maximal points per axis for mixture quadrature
_MIX_N0 = {1: 129, 2: 65, 3: 33}
_MIX_NMAX = {1: 8193, 2: 1025, 3: 161}
MIXTURE_RTOL = 1e-11
MIXTURE_EPS_TAIL = 1e-15


@dataclass(frozen=True)
class Terms:
    """Named integrals of one ``u`` plus pointwise residual maxima."""

    sums: np.ndarray
    maxima: np.ndarray
    backend: str
    dim: int
    delta: float
    t: float | None = None
    resolution: int = 0

    def __getitem__(self, name: str) -> float:
        return float(self.sums[K.TERM_NAMES.index(name)])

    @property
    def min_u(self) -> float:
        return float(self.maxima[K.MIN_U])

    @property
    def q(self) -> float:
        return delta_to_q(self.delta)


def _check_floor(u: np.ndarray, what: str = "u") -> None:
    mean = float(u.mean())
    if not u.min() >= POSITIVITY_FLOOR * mean:
        raise DegenerateInputError(
            f"{what}: minimum {u.min():.3e} below positivity floor "
            f"{POSITIVITY_FLOOR:.0e} x mean ({mean:.3e})"
        )


# -- torus ----------------------------------------------------------------

def _spectral_jet(grid: TorusGrid, vals: np.ndarray, grad_lap: bool = True):
    """grad (d, M), Hessian (d, d, M) and optionally grad(lap) (d, M)."""
    d = grid.dim
    hat = grid.forward(vals)
    gr = np.empty((d,) + grid.shape)
    H = np.empty((d, d) + grid.shape)
    for i in range(d):
        gr[i] = grid.inverse(grid.derivative_hat(hat, (i,)))
        for j in range(i, d):
            H[i, j] = grid.inverse(grid.derivative_hat(hat, (i, j)))
            if j != i:
                H[j, i] = H[i, j]
    gl = None
    if grad_lap:
        lhat = hat * grid.lap_multiplier
        gl = np.empty((d,) + grid.shape)
        for i in range(d):
            gl[i] = grid.inverse(grid.derivative_hat(lhat, (i,)))
    return gr, H, gl


def field_terms(u: ScalarField, delta, t: float | None = None,
                use_numba: bool | None = None) -> Terms:
    """All integrals for a sampled ``u`` on the torus."""
    g = u.grid
    dl = _delta(delta)
    uv = u.values
    _check_floor(uv)
    d, M = g.dim, g.size
    gu, Hu, glu = _spectral_jet(g, uv)
    v = np.sqrt(uv)
    gv, Hv, _ = _spectral_jet(g, v, grad_lap=False)
    gsq = (gv**2).sum(axis=0)
    ghat = g.forward(gsq)
    gg = np.stack([g.inverse(g.derivative_hat(ghat, (j,))) for j in range(d)])
    lg = g.inverse(ghat * g.lap_multiplier)
    G = (gu**2).sum(axis=0)
    lG = g.inverse(g.forward(G) * g.lap_multiplier)
    sums, mx = K.reduce_terms(
        uv.reshape(M), gu.reshape(d, M), Hu.reshape(d, d, M), glu.reshape(d, M),
        v.reshape(M), gv.reshape(d, M), Hv.reshape(d, d, M), gsq.reshape(M),
        gg.reshape(d, M), lg.reshape(M), lG.reshape(M), dl, g.cell_volume,
        use_numba=use_numba,
    )
    return Terms(sums, mx, "torus", d, dl, t, g.n)


# -- mixtures -------------------------------------------------------------

def power_jets(logphi, a, B, c, p):
    """Jets of ``phi ** p`` from normalized jets of ``phi`` (point-first).

    Returns ``(u, grad u, hess u, grad lap u)``.
    """
    u = np.exp(p * logphi)
    a2 = np.einsum("md,md->m", a, a)
    trB = np.einsum("mdd->m", B)
    Ba = np.einsum("mij,mj->mi", B, a)
    gu = (u * p)[:, None] * a
    Hu = u[:, None, None] * (p * B + p * (p - 1) * a[:, :, None] * a[:, None, :])
    glu = u[:, None] * (
        p * c
        + p * (p - 1) * (2 * Ba + trB[:, None] * a)
        + p * (p - 1) * (p - 2) * a2[:, None] * a
    )
    return u, gu, Hu, glu


def _mixture_chunk(m: GaussianMixture, x: np.ndarray, dl: float, use_numba):
    p = 1.0 / (1.0 + dl)
    logphi, a, B, c = mixtures.log_jets(m, x, use_numba=use_numba)
    u, gu, Hu, glu = power_jets(logphi, a, B, c, p)
    v, gv, Hv, glv = power_jets(logphi, a, B, c, 0.5 * p)
    g = np.einsum("md,md->m", gv, gv)
    gg = 2.0 * np.einsum("mij,mj->mi", Hv, gv)
    lg = 2.0 * np.einsum("mij,mij->m", Hv, Hv) + 2.0 * np.einsum("md,md->m", glv, gv)
    lG = 2.0 * np.einsum("mij,mij->m", Hu, Hu) + 2.0 * np.einsum("md,md->m", glu, gu)
    return K.reduce_terms(
        u, gu.T, Hu.transpose(1, 2, 0), glu.T, v, gv.T, Hv.transpose(1, 2, 0),
        g, gg.T, lg, lG, dl, 1.0, use_numba=use_numba,
    )


def _mixture_pass(m: GaussianMixture, box: QuadratureBox, dl: float, use_numba):
    sums = np.zeros(K.N_SUMS)
    mx = np.zeros(K.N_MAX)
    mx[K.MIN_U] = np.inf
    mx[K.MAX_U] = -np.inf
    for x in box.node_chunks():
        s, c = _mixture_chunk(m, x, dl, use_numba)
        sums += s
        mx[:K.MIN_U] = np.maximum(mx[:K.MIN_U], c[:K.MIN_U])
        mx[K.MIN_U] = min(mx[K.MIN_U], c[K.MIN_U])
        mx[K.MAX_U] = max(mx[K.MAX_U], c[K.MAX_U])
    return sums * box.cell_volume, mx


_ABS_OF = {
    K.U_LAP_U: K.ABS_U_LAP_U, K.CROSS: K.ABS_CROSS, K.LAP_G: K.ABS_LAP_G,
    K.GRADLAP_DOT_GRAD: K.ABS_GRADLAP_DOT_GRAD, K.LAPU_G: K.ABS_LAPU_G,
    K.GRADU_GRADG: K.ABS_GRADU_GRADG, K.U_LAP_G: K.ABS_U_LAP_G,
    K.HESS_GRAD_GRAD: K.ABS_HESS_GRAD_GRAD,
}


def _converged(new: np.ndarray, old: np.ndarray, rtol: float) -> bool:
    # |integrand| sums have kinks and converge slowly: scales only, not tested
    ref = np.abs(new).copy()
    for k, ka in _ABS_OF.items():
        ref[k] = new[ka]
    smooth = [k for k in range(K.N_SUMS) if k not in _ABS_OF.values()]
    return bool(np.all(np.abs(new - old)[smooth] <= rtol * ref[smooth]))


def mixture_box(m_t: GaussianMixture, delta: float, points: int | None = None,
                eps_tail: float = MIXTURE_EPS_TAIL) -> QuadratureBox:
    p = 1.0 / (1.0 + delta)
    spread = max(1.0, 1.0 / math.sqrt(2.0 * p))
    return mixtures.quadrature_box(m_t, 0.0, eps_tail, points or _MIX_N0[m_t.dim], spread)


def mixture_terms(m: GaussianMixture, delta, t: float = 0.0, rtol: float = MIXTURE_RTOL,
                  box: QuadratureBox | None = None, max_points: int | None = None,
                  use_numba: bool | None = None) -> Terms:
    """All integrals for ``u = (phi_t) ** (1/(1+delta))`` with ``phi_0 = m``.

    Points per axis double (``n -> 2n - 1``, nested) until every integral
    agrees with the previous pass to ``rtol``.
    """
    dl = _delta(delta)
    mt = m.evolve(t)
    if box is None:
        box = mixture_box(mt, dl)
    n_max = max_points or _MIX_NMAX[m.dim]
    sums, mx = _mixture_pass(mt, box, dl, use_numba)
    while True:
        n_next = 2 * box.points - 1
        if n_next > n_max:
            break
        box = box.with_points(n_next)
        new, mx = _mixture_pass(mt, box, dl, use_numba)
        done = _converged(new, sums, rtol)
        sums = new
        if done:
            break
    # the closed-form lap|grad u|^2 *is* the Bochner right-hand side; the
    # independent pointwise check lives in identities.check_bochner
    mx[K.BOCHNER_RES] = np.nan
    return Terms(sums, mx, "mixture", m.dim, dl, t, box.points)


def compute_terms(source, delta, t: float | None = None, **kw) -> Terms:
    """Dispatch: a :class:`ScalarField` is taken as ``u`` itself; a mixture as
    the initial density, transformed after evolving to ``t``."""
    if isinstance(source, Terms):
        return source
    if isinstance(source, ScalarField):
        return field_terms(source, delta, t, **kw)
    if isinstance(source, GaussianMixture):
        return mixture_terms(source, delta, 0.0 if t is None else t, **kw)
    raise TypeError(f"unsupported source type {type(source).__name__}")


# -- entropies ------------------------------------------------------------

def _adaptive_box_integral(m: GaussianMixture, fn, spread: float = 1.0,
                           rtol: float = 1e-12) -> float:
    box = mixtures.quadrature_box(m, 0.0, MIXTURE_EPS_TAIL, _MIX_N0[m.dim], spread)
    val = mixtures.integrate_on_box(fn, box)
    while 2 * box.points - 1 <= _MIX_NMAX[m.dim]:
        box = box.with_points(2 * box.points - 1)
        new = mixtures.integrate_on_box(fn, box)
        if abs(new - val) <= rtol * abs(new):
            return float(new)
        val = new
    return float(val)


def power_integral(rho, q: float) -> float:
    """``int rho^q``."""
    if isinstance(rho, ScalarField):
        if rho.values.min() <= 0:
            raise DegenerateInputError("density must be strictly positive")
        return integrate(rho.values**q, rho.grid)
    if isinstance(rho, GaussianMixture):
        spread = max(1.0, 1.0 / math.sqrt(q))
        return _adaptive_box_integral(
            rho, lambda x: np.exp(q * mixtures.log_density(rho, x)).sum(), spread)
    raise TypeError(f"unsupported density type {type(rho).__name__}")


def tsallis(rho, q: float) -> float:
    """``(1 - int rho^q) / (q - 1)``."""
    if q == 1:
        raise ValueError("q = 1 is the Shannon limit; call shannon()")
    if not q > 0:
        raise ValueError("q must be positive")
    return (1.0 - power_integral(rho, q)) / (q - 1.0)


def shannon(rho) -> float:
    """``-int rho log rho``."""
    if isinstance(rho, ScalarField):
        if rho.values.min() <= 0:
            raise DegenerateInputError("density must be strictly positive")
        return -integrate(rho.values * np.log(rho.values), rho.grid)
    if isinstance(rho, GaussianMixture):
        def fn(x):
            lp = mixtures.log_density(rho, x)
            return -(np.exp(lp) * lp).sum()
        return _adaptive_box_integral(rho, fn)
    raise TypeError(f"unsupported density type {type(rho).__name__}")


# -- report ---------------------------------------------------------------

REPORT_COLUMNS = (
    "backend", "dim", "resolution", "t", "delta", "q",
    "tsallis_Sq", "shannon_H", "mass", "dirichlet", "laplacian_sq", "hessian_sq",
    "quartic", "cross", "hess_sqrt", "lap_sqrt", "min_u",
)


@dataclass(frozen=True)
class FunctionalReport:
    backend: str
    dim: int
    resolution: int
    t: float | None
    delta: float
    q: float
    tsallis_Sq: float
    shannon_H: float
    mass: float
    dirichlet: float
    laplacian_sq: float
    hessian_sq: float
    quartic: float
    cross: float
    hess_sqrt: float
    lap_sqrt: float
    min_u: float

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def row(self) -> list:
        return [getattr(self, c) for c in REPORT_COLUMNS]


def report_from_terms(T: Terms) -> FunctionalReport:
    q = T.q
    # int u^2 = int phi^q
    sq = math.nan if q == 1 else (1.0 - T["int_u2"]) / (q - 1.0)
    return FunctionalReport(
        backend=T.backend, dim=T.dim, resolution=T.resolution, t=T.t, delta=T.delta, q=q,
        tsallis_Sq=sq, shannon_H=T["neg_phi_log_phi"], mass=T["mass"],
        dirichlet=T["dirichlet"], laplacian_sq=T["laplacian_sq"],
        hessian_sq=T["hessian_sq"], quartic=T["quartic"], cross=T["cross"],
        hess_sqrt=T["hess_sqrt"], lap_sqrt=T["lap_sqrt"], min_u=T.min_u,
    )


def report(source, delta, t: float | None = None, **kw) -> FunctionalReport:
    return report_from_terms(compute_terms(source, delta, t, **kw))


# -- pointwise algebra ----------------------------------------------------

def pointwise_b_decomposition(source, delta=0.0, points: np.ndarray | None = None,
                              t: float = 0.0) -> tuple[np.ndarray, float]:
    """Pointwise residual of
    ``u (lap v)^2 = (lap u)^2/4 - lap u |grad u|^2/(4u) + |grad u|^4/(16 u^2)``
    with ``v = sqrt(u)``.

    Returns ``(residual, scale)`` where ``scale`` is the largest pointwise sum
    of absolute term values. For a torus field ``source`` is ``u``; for a
    mixture, ``u`` is built from ``phi_t`` and evaluated at ``points``.
    """
    if isinstance(source, ScalarField):
        g = source.grid
        u = source.values
        _check_floor(u)
        uh = g.forward(u)
        lap = g.inverse(uh * g.lap_multiplier)
        grad2 = sum(g.inverse(g.derivative_hat(uh, (j,))) ** 2 for j in range(g.dim))
        lapv = g.inverse(g.forward(np.sqrt(u)) * g.lap_multiplier)
    elif isinstance(source, GaussianMixture):
        if points is None:
            raise ValueError("mixture decomposition needs evaluation points")
        p = 1.0 / (1.0 + _delta(delta))
        logphi, a, B, c = mixtures.log_jets(source.evolve(t), points)
        u, gu, Hu, _ = power_jets(logphi, a, B, c, p)
        _, _, Hv, _ = power_jets(logphi, a, B, c, 0.5 * p)
        lap = np.einsum("mdd->m", Hu)
        grad2 = np.einsum("md,md->m", gu, gu)
        lapv = np.einsum("mdd->m", Hv)
    else:
        raise TypeError(f"unsupported source type {type(source).__name__}")
    q = grad2 / u
    t1 = u * lapv**2
    t2 = 0.25 * lap**2
    t3 = 0.25 * lap * q
    t4 = q**2 / 16.0
    res = t1 - (t2 - t3 + t4)
    scale = float((t1 + t2 + np.abs(t3) + t4).max())
    return res, scale
