"""Scalar MMSE denoisers for the two turbo modules.

Module A works in the transform domain: a Gaussian prior on z combined with
the quantized-Gaussian likelihood. Module B works in the signal domain: an
AWGN observation of x under the Bernoulli-Gaussian prior.

Complex variances are totals (real part + imaginary part). The quantized
likelihood factorises over the two real dimensions, so module A is
evaluated per real dimension with all variances halved.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erf, erfcx, expit

from .model import BgPrior, Measurements, QuantizerSpec

VAR_MIN = 1e-12
VAR_MAX = 1e12
PSI_FLOOR = 1e-300

_SQRT2 = np.sqrt(2.0)
_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_GL_NODES, _GL_WEIGHTS = leggauss(24)


def clamp_var(v):
    return np.clip(v, VAR_MIN, VAR_MAX)


def _std_pdf(u):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(u))


def _times_pdf(u):
    # u * phi(u) with the limit 0 at +-inf
    with np.errstate(invalid="ignore"):
        out = u * _std_pdf(u)
    return np.where(np.isfinite(u), out, 0.0)


def truncnorm_moments(a, b):
    """Mass, mean and variance of a standard normal restricted to (a, b].

    Returns ``(mass, mean, var)``. The right tail (a >= 0) is handled with
    the scaled complementary error function, i.e. through Mills ratios, so
    the mean and variance stay accurate when the mass itself underflows.
    Left-tail intervals are reflected onto the right tail.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)

    flip = b <= 0.0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    tail = lo >= 0.0

    mass = np.empty(lo.shape)
    mean = np.empty(lo.shape)
    second = np.empty(lo.shape)  # E[u^2] - 1, i.e. (lo phi(lo) - hi phi(hi)) / mass

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # right tail: divide everything by phi(lo)
        t_lo, t_hi = lo[tail], hi[tail]
        ratio = np.exp(0.5 * (t_lo - t_hi) * (t_lo + t_hi))  # phi(hi) / phi(lo)
        ratio = np.where(np.isinf(t_hi), 0.0, ratio)
        hi_term = np.where(np.isinf(t_hi), 0.0, erfcx(t_hi / _SQRT2) * ratio)
        denom = _SQRT_HALF_PI * (erfcx(t_lo / _SQRT2) - hi_term)
        one_minus = np.where(np.isinf(t_hi), 1.0, -np.expm1(0.5 * (t_lo - t_hi) * (t_lo + t_hi)))
        hi_phi = np.where(np.isinf(t_hi), 0.0, t_hi * ratio)
        mean[tail] = one_minus / denom
        second[tail] = (t_lo - hi_phi) / denom
        mass[tail] = _std_pdf(t_lo) * denom

        # interval straddles zero: plain differences are well conditioned
        s_lo, s_hi = lo[~tail], hi[~tail]
        m_s = 0.5 * (erf(s_hi / _SQRT2) - erf(s_lo / _SQRT2))
        mass[~tail] = m_s
        mean[~tail] = (_std_pdf(s_lo) - _std_pdf(s_hi)) / m_s
        second[~tail] = (_times_pdf(s_lo) - _times_pdf(s_hi)) / m_s

    var = np.array(np.clip(1.0 + second - np.square(mean), 0.0, 1.0))

    # Narrow bins: 1 + second - mean^2 cancels badly, so integrate the
    # offset from the bin centre directly (the density is nearly flat there).
    with np.errstate(invalid="ignore"):
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        narrow = np.isfinite(half) & (half * np.maximum(1.0, np.abs(centre)) <= 1.0)
    if np.any(narrow):
        c, h = centre[narrow], half[narrow]
        t = h[:, None] * _GL_NODES[None, :]
        w = _GL_WEIGHTS * np.exp(-c[:, None] * t - 0.5 * t * t)
        tot = w.sum(axis=1)
        mass[narrow] = _std_pdf(c) * h * tot
        w /= tot[:, None]
        m1 = (w * t).sum(axis=1)
        mean[narrow] = c + m1
        var[narrow] = (w * np.square(t - m1[:, None])).sum(axis=1)

    mean = np.where(flip, -mean, mean)
    return mass, mean, var


def _standardise(low, up, z, c2):
    c = np.sqrt(c2)
    with np.errstate(invalid="ignore"):
        a = (np.asarray(low, dtype=float) - z) / c
        b = (np.asarray(up, dtype=float) - z) / c
    return a, b, c


def psi(low, up, z, c2):
    """P(low < y <= up) for y ~ N(z, c2)."""
    a, b, _ = _standardise(low, up, z, c2)
    mass, _, _ = truncnorm_moments(a, b)
    return mass


def psi_prime(low, up, z, c2):
    """Derivative of ``psi`` with respect to the location z."""
    a, b, c = _standardise(low, up, z, c2)
    return (_std_pdf(a) - _std_pdf(b)) / c


def psi_fisher(low, up, z, c2):
    """psi'(z)^2 / psi(z), evaluated without dividing by a tiny psi."""
    a, b, c = _standardise(low, up, z, c2)
    mass, mean, _ = truncnorm_moments(a, b)
    return mass * np.square(mean / c)


def _quantized_real_posterior(m, vr, s, low, up):
    """Posterior of one real dimension: prior N(m, vr), y = z + N(0, s), y in (low, up]."""
    c2 = vr + s
    a, b, c = _standardise(low, up, m, c2)
    _, lam, var_std = truncnorm_moments(a, b)
    gain = vr / c
    mean = m + gain * lam
    var = vr * s / c2 + gain * gain * var_std
    return mean, var


def z_posterior(z_pri, v_pri: float, meas: Measurements, sigma2: float):
    """Vectorised module-A posterior for the quantized-Gaussian likelihood.

    Returns per-entry posterior means and total (complex) variances.
    Unobserved entries keep their prior.
    """
    spec = meas.quantizer
    if spec is None:
        return z_posterior_gaussian(z_pri, v_pri, meas, sigma2)
    if not v_pri > 0:
        raise ValueError(f"prior variance must be positive, got {v_pri}")
    z_pri = np.asarray(z_pri, dtype=np.complex128)
    obs = meas.observed
    z_post = z_pri.copy()
    v_post = np.full(z_pri.shape, float(v_pri))

    vr, s = v_pri / 2.0, sigma2 / 2.0
    zo = z_pri[obs]
    yo = meas.values[obs]
    kr = spec.level_index(yo.real)
    ki = spec.level_index(yo.imag)
    mr, var_r = _quantized_real_posterior(zo.real, vr, s, spec.lower[kr], spec.upper[kr])
    mi, var_i = _quantized_real_posterior(zo.imag, vr, s, spec.lower[ki], spec.upper[ki])
    z_post[obs] = mr + 1j * mi
    v_post[obs] = var_r + var_i
    return z_post, clamp_var(v_post)


def z_posterior_gaussian(z_pri, v_pri: float, meas: Measurements, sigma2: float):
    """Unquantized mode: linear Gaussian update on observed rows."""
    if not v_pri > 0:
        raise ValueError(f"prior variance must be positive, got {v_pri}")
    z_pri = np.asarray(z_pri, dtype=np.complex128)
    obs = meas.observed
    gain = v_pri / (v_pri + sigma2)
    z_post = np.where(obs, z_pri + gain * (meas.values - z_pri), z_pri)
    v_post = np.where(obs, v_pri * sigma2 / (v_pri + sigma2), float(v_pri))
    return z_post, clamp_var(v_post)


def z_posterior_scalar(z_pri: complex, v_pri: float, level_r: float, level_i: float,
                       spec: QuantizerSpec, sigma2: float, observed: bool = True):
    """Single-entry version of :func:`z_posterior`; returns (mean, total variance)."""
    if not v_pri > 0:
        raise ValueError(f"prior variance must be positive, got {v_pri}")
    if not observed:
        return complex(z_pri), float(v_pri)
    meas = Measurements(np.array([complex(level_r, level_i)]), np.array([True]), spec)
    zp, vp = z_posterior(np.array([complex(z_pri)]), v_pri, meas, sigma2)
    return complex(zp[0]), float(vp[0])


def x_posterior(r, v: float, prior: BgPrior):
    """Vectorised Bernoulli-Gaussian posterior for r = x + CN(0, v)."""
    if not v > 0:
        raise ValueError(f"noise variance must be positive, got {v}")
    r = np.asarray(r, dtype=np.complex128)
    sx, rho = prior.varsigma_x, prior.rho
    gain = sx / (sx + v)
    m_on = gain * r
    v_on = gain * v
    if rho >= 1.0:
        return m_on, clamp_var(np.full(r.shape, v_on))
    r2 = np.abs(r) ** 2
    log_odds = np.log(rho / (1.0 - rho)) + np.log(v / (sx + v)) + r2 * gain / v
    pi = expit(log_odds)
    mean = pi * m_on
    var = pi * v_on + pi * (1.0 - pi) * np.abs(m_on) ** 2
    return mean, clamp_var(var)


def x_posterior_scalar(r: complex, v: float, prior: BgPrior):
    xp, vp = x_posterior(np.array([complex(r)]), v, prior)
    return complex(xp[0]), float(vp[0])
