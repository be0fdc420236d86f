"""Hot pointwise kernels, numba and numpy twins.

Two kernels dominate runtime:

* ``mixture_logjets`` evaluates a Gaussian mixture and its normalized
  derivatives ``grad(phi)/phi``, ``hess(phi)/phi`` and ``grad(lap(phi))/phi``
  at many points (log-sum-exp over components, so the ratios stay accurate
  far into the tails).
* ``mixture_power_sum`` sums ``phi^q`` over points without storing them;
  the finite-difference oracle calls it on the same box many times.
* ``reduce_terms`` fuses every pointwise integrand used by the functionals
  and identity checks into one pass and returns their quadrature sums
  together with a few pointwise maxima.

Array layout for ``reduce_terms`` is component-first: gradients ``(d, M)``,
Hessians ``(d, d, M)``.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit, numba_enabled

# indices into the vector returned by reduce_terms
MASS = 0
INT_U2 = 1
NEG_PHI_LOG_PHI = 2
DIRICHLET = 3
U_LAP_U = 4
LAPLACIAN_SQ = 5
HESSIAN_SQ = 6
QUARTIC = 7
CROSS = 8
HESS_SQRT = 9
LAP_SQRT = 10
LAP_G = 11
ABS_LAP_G = 12
GRADLAP_DOT_GRAD = 13
LAPU_G = 14
GRADU_GRADG = 15
U_LAP_G = 16
FISHER = 17
HESS_GRAD_GRAD = 18
# absolute-integrand companions of the sign-indefinite terms
ABS_U_LAP_U = 19
ABS_CROSS = 20
ABS_GRADLAP_DOT_GRAD = 21
ABS_LAPU_G = 22
ABS_GRADU_GRADG = 23
ABS_U_LAP_G = 24
ABS_HESS_GRAD_GRAD = 25
N_SUMS = 26

TERM_NAMES = (
    "mass", "int_u2", "neg_phi_log_phi", "dirichlet", "u_lap_u",
    "laplacian_sq", "hessian_sq", "quartic", "cross", "hess_sqrt",
    "lap_sqrt", "lap_G", "abs_lap_G", "gradlap_dot_grad", "lapu_g",
    "gradu_gradg", "u_lap_g", "fisher", "hess_grad_grad",
    "abs_u_lap_u", "abs_cross", "abs_gradlap_dot_grad", "abs_lapu_g",
    "abs_gradu_gradg", "abs_u_lap_g", "abs_hess_grad_grad",
)

# indices into the maxima vector
BOCHNER_RES = 0
BOCHNER_SCALE = 1
DECOMP_RES = 2
DECOMP_SCALE = 3
MIN_U = 4
MAX_U = 5
N_MAX = 6

LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# mixture log-jets
# --------------------------------------------------------------------------

@njit
def _logjets_numba(X, logw, mu, s):
    M, d = X.shape
    K = logw.shape[0]
    logphi = np.empty(M)
    a = np.zeros((M, d))
    B = np.zeros((M, d, d))
    c = np.zeros((M, d))
    lk = np.empty(K)
    y = np.empty((K, d))
    r2 = np.empty(K)
    for i in range(M):
        lmax = -np.inf
        for k in range(K):
            acc = 0.0
            for j in range(d):
                dy = X[i, j] - mu[k, j]
                y[k, j] = dy / s[k]
                acc += dy * dy
            r2[k] = acc / (s[k] * s[k])
            lk[k] = logw[k] - 0.5 * d * (LOG_2PI + math.log(s[k])) - 0.5 * acc / s[k]
            if lk[k] > lmax:
                lmax = lk[k]
        tot = 0.0
        for k in range(K):
            wk = math.exp(lk[k] - lmax)
            tot += wk
            inv_s = 1.0 / s[k]
            cfac = (d + 2) * inv_s - r2[k]
            for j in range(d):
                a[i, j] -= wk * y[k, j]
                c[i, j] += wk * y[k, j] * cfac
                for m in range(d):
                    B[i, j, m] += wk * y[k, j] * y[k, m]
                B[i, j, j] -= wk * inv_s
        inv_tot = 1.0 / tot
        for j in range(d):
            a[i, j] *= inv_tot
            c[i, j] *= inv_tot
            for m in range(d):
                B[i, j, m] *= inv_tot
        logphi[i] = lmax + math.log(tot)
    return logphi, a, B, c


def _logjets_numpy(X, logw, mu, s):
    M, d = X.shape
    diff = X[:, None, :] - mu[None, :, :]                  # (M, K, d)
    y = diff / s[None, :, None]
    acc = np.einsum("mkd,mkd->mk", diff, diff)
    r2 = acc / (s * s)[None, :]
    lk = logw[None, :] - 0.5 * d * (LOG_2PI + np.log(s))[None, :] - 0.5 * acc / s[None, :]
    lmax = lk.max(axis=1)
    wk = np.exp(lk - lmax[:, None])
    tot = wk.sum(axis=1)
    wn = wk / tot[:, None]
    a = -np.einsum("mk,mkd->md", wn, y)
    cfac = (d + 2) / s[None, :] - r2
    c = np.einsum("mk,mkd->md", wn * cfac, y)
    B = np.einsum("mk,mki,mkj->mij", wn, y, y)
    B -= np.einsum("mk,k->m", wn, 1.0 / s)[:, None, None] * np.eye(d)[None, :, :]
    logphi = lmax + np.log(tot)
    return logphi, a, B, c


def mixture_logjets(X, logw, mu, s, use_numba: bool | None = None):
    """Return ``(log phi, grad phi / phi, hess phi / phi, grad lap phi / phi)``.

    ``X`` is ``(M, d)``; the derivative arrays are point-first ``(M, d)`` and
    ``(M, d, d)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    args = (X, np.ascontiguousarray(logw, dtype=np.float64),
            np.ascontiguousarray(mu, dtype=np.float64),
            np.ascontiguousarray(s, dtype=np.float64))
    if numba_enabled(use_numba):
        return _logjets_numba(*args)
    return _logjets_numpy(*args)


@njit
def _power_sum_numba(X, logw, mu, s, q):
    M, d = X.shape
    K = logw.shape[0]
    lk = np.empty(K)
    norm = np.empty(K)
    for k in range(K):
        norm[k] = logw[k] - 0.5 * d * (LOG_2PI + math.log(s[k]))
    total = 0.0
    for i in range(M):
        lmax = -np.inf
        for k in range(K):
            acc = 0.0
            for j in range(d):
                dy = X[i, j] - mu[k, j]
                acc += dy * dy
            lk[k] = norm[k] - 0.5 * acc / s[k]
            if lk[k] > lmax:
                lmax = lk[k]
        tot = 0.0
        for k in range(K):
            tot += math.exp(lk[k] - lmax)
        total += math.exp(q * (lmax + math.log(tot)))
    return total


def _power_sum_numpy(X, logw, mu, s, q):
    d = X.shape[1]
    diff = X[:, None, :] - mu[None, :, :]
    acc = np.einsum("mkd,mkd->mk", diff, diff)
    lk = (logw - 0.5 * d * (LOG_2PI + np.log(s)))[None, :] - 0.5 * acc / s[None, :]
    lmax = lk.max(axis=1)
    logphi = lmax + np.log(np.exp(lk - lmax[:, None]).sum(axis=1))
    return float(np.exp(q * logphi).sum())


def mixture_power_sum(X, logw, mu, s, q: float, use_numba: bool | None = None) -> float:
    """``sum_i phi(X_i)^q`` for a mixture with log-weights ``logw``."""
    args = (np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(logw, dtype=np.float64),
            np.ascontiguousarray(mu, dtype=np.float64),
            np.ascontiguousarray(s, dtype=np.float64), float(q))
    if numba_enabled(use_numba):
        return _power_sum_numba(*args)
    return _power_sum_numpy(*args)


# --------------------------------------------------------------------------
# fused integrand reduction
# --------------------------------------------------------------------------

@njit
def _reduce_numba(u, gu, Hu, glu, v, gv, Hv, g, gg, lg, lG, delta, weight):
    d = gu.shape[0]
    M = u.shape[0]
    sums = np.zeros(N_SUMS)
    mx = np.zeros(N_MAX)
    mx[MIN_U] = np.inf
    mx[MAX_U] = -np.inf
    one_p = 1.0 + delta
    for i in range(M):
        ui = u[i]
        if ui < mx[MIN_U]:
            mx[MIN_U] = ui
        if ui > mx[MAX_U]:
            mx[MAX_U] = ui
        logu = math.log(ui)
        phi = math.exp(one_p * logu)
        grad2 = 0.0
        lap = 0.0
        lapv = 0.0
        hsq = 0.0
        hvsq = 0.0
        gl_dot = 0.0
        gug = 0.0
        hgg = 0.0
        for j in range(d):
            grad2 += gu[j, i] * gu[j, i]
            lap += Hu[j, j, i]
            lapv += Hv[j, j, i]
            gl_dot += glu[j, i] * gu[j, i]
            gug += gu[j, i] * gg[j, i]
            for m in range(d):
                hsq += Hu[j, m, i] * Hu[j, m, i]
                hvsq += Hv[j, m, i] * Hv[j, m, i]
                hgg += Hu[j, m, i] * gu[j, i] * gu[m, i]
        q = grad2 / ui
        sums[MASS] += phi
        sums[INT_U2] += ui * ui
        sums[NEG_PHI_LOG_PHI] -= phi * one_p * logu
        sums[DIRICHLET] += grad2
        sums[U_LAP_U] += ui * lap
        sums[LAPLACIAN_SQ] += lap * lap
        sums[HESSIAN_SQ] += hsq
        sums[QUARTIC] += q * q
        sums[CROSS] += lap * q
        sums[HESS_SQRT] += ui * hvsq
        sums[LAP_SQRT] += ui * lapv * lapv
        sums[LAP_G] += lG[i]
        sums[ABS_LAP_G] += abs(lG[i])
        sums[GRADLAP_DOT_GRAD] += gl_dot
        sums[LAPU_G] += lap * g[i]
        sums[GRADU_GRADG] += gug
        sums[U_LAP_G] += ui * lg[i]
        sums[FISHER] += one_p * one_p * math.exp(delta * logu) * q
        sums[HESS_GRAD_GRAD] += hgg / ui
        sums[ABS_U_LAP_U] += abs(ui * lap)
        sums[ABS_CROSS] += abs(lap * q)
        sums[ABS_GRADLAP_DOT_GRAD] += abs(gl_dot)
        sums[ABS_LAPU_G] += abs(lap * g[i])
        sums[ABS_GRADU_GRADG] += abs(gug)
        sums[ABS_U_LAP_G] += abs(ui * lg[i])
        sums[ABS_HESS_GRAD_GRAD] += abs(hgg / ui)

        bres = abs(0.5 * lG[i] - hsq - gl_dot)
        bscale = abs(0.5 * lG[i]) + hsq + abs(gl_dot)
        if bres > mx[BOCHNER_RES]:
            mx[BOCHNER_RES] = bres
        if bscale > mx[BOCHNER_SCALE]:
            mx[BOCHNER_SCALE] = bscale
        t1 = ui * lapv * lapv
        t2 = 0.25 * lap * lap
        t3 = 0.25 * lap * q
        t4 = q * q / 16.0
        dres = abs(t1 - (t2 - t3 + t4))
        dscale = t1 + t2 + abs(t3) + t4
        if dres > mx[DECOMP_RES]:
            mx[DECOMP_RES] = dres
        if dscale > mx[DECOMP_SCALE]:
            mx[DECOMP_SCALE] = dscale
    for k in range(N_SUMS):
        sums[k] *= weight
    return sums, mx


def _reduce_numpy(u, gu, Hu, glu, v, gv, Hv, g, gg, lg, lG, delta, weight):
    one_p = 1.0 + delta
    logu = np.log(u)
    phi = np.exp(one_p * logu)
    grad2 = np.einsum("jm,jm->m", gu, gu)
    lap = np.einsum("jjm->m", Hu)
    lapv = np.einsum("jjm->m", Hv)
    hsq = np.einsum("jkm,jkm->m", Hu, Hu)
    hvsq = np.einsum("jkm,jkm->m", Hv, Hv)
    gl_dot = np.einsum("jm,jm->m", glu, gu)
    gug = np.einsum("jm,jm->m", gu, gg)
    hgg = np.einsum("jkm,jm,km->m", Hu, gu, gu)
    q = grad2 / u

    sums = np.empty(N_SUMS)
    sums[MASS] = phi.sum()
    sums[INT_U2] = (u * u).sum()
    sums[NEG_PHI_LOG_PHI] = -(phi * one_p * logu).sum()
    sums[DIRICHLET] = grad2.sum()
    sums[U_LAP_U] = (u * lap).sum()
    sums[LAPLACIAN_SQ] = (lap * lap).sum()
    sums[HESSIAN_SQ] = hsq.sum()
    sums[QUARTIC] = (q * q).sum()
    sums[CROSS] = (lap * q).sum()
    sums[HESS_SQRT] = (u * hvsq).sum()
    sums[LAP_SQRT] = (u * lapv * lapv).sum()
    sums[LAP_G] = lG.sum()
    sums[ABS_LAP_G] = np.abs(lG).sum()
    sums[GRADLAP_DOT_GRAD] = gl_dot.sum()
    sums[LAPU_G] = (lap * g).sum()
    sums[GRADU_GRADG] = gug.sum()
    sums[U_LAP_G] = (u * lg).sum()
    sums[FISHER] = (one_p * one_p * np.exp(delta * logu) * q).sum()
    sums[HESS_GRAD_GRAD] = (hgg / u).sum()
    sums[ABS_U_LAP_U] = np.abs(u * lap).sum()
    sums[ABS_CROSS] = np.abs(lap * q).sum()
    sums[ABS_GRADLAP_DOT_GRAD] = np.abs(gl_dot).sum()
    sums[ABS_LAPU_G] = np.abs(lap * g).sum()
    sums[ABS_GRADU_GRADG] = np.abs(gug).sum()
    sums[ABS_U_LAP_G] = np.abs(u * lg).sum()
    sums[ABS_HESS_GRAD_GRAD] = np.abs(hgg / u).sum()
    sums *= weight

    mx = np.empty(N_MAX)
    mx[BOCHNER_RES] = np.abs(0.5 * lG - hsq - gl_dot).max()
    mx[BOCHNER_SCALE] = (np.abs(0.5 * lG) + hsq + np.abs(gl_dot)).max()
    t1 = u * lapv * lapv
    t2 = 0.25 * lap * lap
    t3 = 0.25 * lap * q
    t4 = q * q / 16.0
    mx[DECOMP_RES] = np.abs(t1 - (t2 - t3 + t4)).max()
    mx[DECOMP_SCALE] = (t1 + t2 + np.abs(t3) + t4).max()
    mx[MIN_U] = u.min()
    mx[MAX_U] = u.max()
    return sums, mx


def reduce_terms(u, gu, Hu, glu, v, gv, Hv, g, gg, lg, lG, delta, weight,
                 use_numba: bool | None = None):
    """Quadrature sums of all integrands plus pointwise residual maxima.

    ``u`` is the transformed density, ``v = sqrt(u)``, ``g = |grad v|^2`` and
    ``lG`` the Laplacian of ``|grad u|^2``. The density itself is recovered as
    ``u ** (1 + delta)``.
    """
    args = [np.ascontiguousarray(x, dtype=np.float64)
            for x in (u, gu, Hu, glu, v, gv, Hv, g, gg, lg, lG)]
    if numba_enabled(use_numba):
        return _reduce_numba(*args, float(delta), float(weight))
    return _reduce_numpy(*args, float(delta), float(weight))
