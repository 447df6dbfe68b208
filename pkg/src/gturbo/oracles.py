"""Brute-force reference computations.

These evaluate the defining integrals with adaptive quadrature (QUADPACK
via scipy) and log-domain Gaussian CDFs. They share no code with the
closed-form denoisers and are slow; use them only to check those.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from .model import BgPrior

_SPAN = 40.0
_QUAD = dict(epsabs=0.0, epsrel=1e-12, limit=500)


def log_interval_prob(a, b):
    """log(Phi(b) - Phi(a)) for a < b, accurate in both tails (elementwise)."""
    if np.isscalar(a) and np.isscalar(b):
        if a > 0:
            a, b = -b, -a
        lb = log_ndtr(b)
        return float(lb + np.log1p(-np.exp(log_ndtr(a) - lb)))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    lb = log_ndtr(b)
    out = lb + np.log1p(-np.exp(log_ndtr(a) - lb))
    return out


def _moments(logf, lo: float, hi: float, edges) -> tuple[float, float, float]:
    """Log-mass, mean and variance of the density exp(logf) on [lo, hi].

    ``edges`` lists (location, width) pairs of sharp features. The range is
    cut into segments around each of them and every segment is integrated
    separately; handing QUADPACK a single interval with breakpoints can
    silently lose accuracy at a steep edge.
    """
    grid = np.linspace(lo, hi, 4001)
    grid = np.unique(np.concatenate([grid, [p for p, _ in edges if lo < p < hi]]))
    lg = logf(grid)
    lmax = lg.max()
    # shrink to where the density is within e^-80 of its peak
    keep = np.nonzero(lg >= lmax - 80.0)[0]
    lo = grid[max(keep[0] - 1, 0)]
    hi = grid[min(keep[-1] + 1, grid.size - 1)]
    cuts = [lo, hi]
    for p, w in edges:
        cuts.extend(p + w * k for k in (-40, -20, -10, -5, -2, 0, 2, 5, 10, 20, 40))
    cuts = np.unique(np.clip(cuts, lo, hi))

    def f(u, k=0, c=0.0):
        return (u - c) ** k * np.exp(logf(u) - lmax)

    def total(*args):
        # segments that are flat at the e^-80 level trigger harmless roundoff warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return sum(integrate.quad(f, a, b, args=args, **_QUAD)[0]
                       for a, b in zip(cuts[:-1], cuts[1:]))

    z = total(0)
    mean = total(1) / z
    var = total(2, mean) / z
    return lmax + np.log(z), mean, var


def psi_quadrature(low: float, up: float, z: float, c2: float) -> float:
    """Integral of the N(z, c2) density over (low, up]."""
    c = np.sqrt(c2)
    lo = max(low, z - _SPAN * c)
    hi = min(up, z + _SPAN * c)
    if lo >= hi:
        return 0.0
    dens = lambda y: np.exp(-0.5 * ((y - z) / c) ** 2) / np.sqrt(2 * np.pi * c2)
    return integrate.quad(dens, lo, hi, points=[z] if lo < z < hi else None, **_QUAD)[0]


def z_posterior_real(m: float, vr: float, s: float, low: float, up: float) -> tuple[float, float]:
    """Posterior mean/variance of z ~ N(m, vr) given z + N(0, s) in (low, up]."""
    sd, ns = np.sqrt(vr), np.sqrt(s)

    def logf(u):
        z = m + sd * u
        return -0.5 * u * u + log_interval_prob((low - z) / ns, (up - z) / ns)

    lo = max(-_SPAN, (low - m) / sd - _SPAN * ns / sd)
    hi = min(_SPAN, (up - m) / sd + _SPAN * ns / sd)
    if lo >= hi:
        raise ValueError("posterior mass lies outside the prior's 40-sigma window")
    edges = [(0.0, 1.0)] + [((t - m) / sd, ns / sd) for t in (low, up) if np.isfinite(t)]
    _, mu, var = _moments(logf, lo, hi, edges)
    return m + sd * mu, vr * var


def z_posterior_complex(z_pri: complex, v_pri: float, level_low, level_up, sigma2: float):
    """Complex posterior: independent real/imaginary parts with halved variances."""
    mr, vr_ = z_posterior_real(z_pri.real, v_pri / 2, sigma2 / 2, level_low[0], level_up[0])
    mi, vi_ = z_posterior_real(z_pri.imag, v_pri / 2, sigma2 / 2, level_low[1], level_up[1])
    return complex(mr, mi), vr_ + vi_


def x_posterior_bg(r: complex, v: float, prior: BgPrior) -> tuple[complex, float]:
    """Posterior mean and total variance of x under the BG prior, r = x + CN(0, v).

    The slab part is integrated numerically per real dimension (the complex
    Gaussian factorises); the spike contributes a point mass at zero.
    """
    ps, pn = prior.varsigma_x / 2, v / 2
    log_slab = np.log(prior.rho)
    mean = []
    var = 0.0
    for rd in (r.real, r.imag):
        def logf(t, rd=rd):
            return (-0.5 * t * t / ps - 0.5 * np.log(2 * np.pi * ps)
                    - 0.5 * (rd - t) ** 2 / pn - 0.5 * np.log(2 * np.pi * pn))

        lo = max(-_SPAN * np.sqrt(ps), rd - _SPAN * np.sqrt(pn))
        hi = min(_SPAN * np.sqrt(ps), rd + _SPAN * np.sqrt(pn))
        lz, mu, vd = _moments(logf, lo, hi, [(0.0, np.sqrt(ps)), (rd, np.sqrt(pn))])
        log_slab += lz
        mean.append(mu)
        var += vd
    if prior.rho >= 1.0:
        return complex(*mean), var
    log_spike = (np.log1p(-prior.rho) - np.log(np.pi * v) - abs(r) ** 2 / v)
    p_slab = 1.0 / (1.0 + np.exp(log_spike - log_slab))
    m_slab = complex(*mean)
    second = p_slab * (abs(m_slab) ** 2 + var)
    post_mean = p_slab * m_slab
    return post_mean, second - abs(post_mean) ** 2


def theta_adaptive(v: float, v_x: float, sigma2: float, lower, upper) -> float:
    """Sum over bins of E_z[psi'^2/psi], integrating each bin with QUADPACK."""
    a = np.sqrt((v_x - v) / 2)
    c2 = (sigma2 + v) / 2
    c = np.sqrt(c2)

    def term(zz, lo, up):
        m = a * zz
        la, lb = (lo - m) / c, (up - m) / c
        pa = 0.0 if np.isinf(la) else np.exp(-0.5 * la * la)
        pb = 0.0 if np.isinf(lb) else np.exp(-0.5 * lb * lb)
        dpsi = (pa - pb) / np.sqrt(2 * np.pi * c2)
        lp = log_interval_prob(la, lb)
        w = np.exp(-0.5 * zz * zz) / np.sqrt(2 * np.pi)
        if dpsi == 0.0:
            return 0.0
        return w * np.exp(2 * np.log(abs(dpsi)) - lp)

    if a == 0.0:
        return float(sum(term(0.0, lo, up) for lo, up in zip(lower, upper)) * np.sqrt(2 * np.pi))
    total = 0.0
    for lo, up in zip(lower, upper):
        pts = [t / a for t in (lo, up) if np.isfinite(t) and abs(t / a) < 12]
        total += integrate.quad(term, -12, 12, args=(lo, up), points=pts or None,
                                epsabs=0.0, epsrel=1e-12, limit=500)[0]
    return total
