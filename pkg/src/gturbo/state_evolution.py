"""Scalar state-evolution recursion for the turbo recovery loop.

The recursion tracks v (prior variance entering module A), eta (precision
entering module B) and the predicted MSE mmse(eta). All integrals are
deterministic quadratures, so the theory curve carries no Monte-Carlo noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy.special import expit

from .denoisers import VAR_MAX, VAR_MIN, psi_fisher
from .model import BgPrior, QuantizerSpec

DEFAULT_PANEL_NODES = 16

# Standard-normal weight is integrated over [-Z_SPAN, Z_SPAN]; the mass
# outside is below 1e-22.
Z_SPAN = 10.0
_T_BASE = np.array([0.0, 0.25, 0.5, 1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64])
_OFFSETS = np.array([0, 0.5, 1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24])
_OFFSETS = np.concatenate([-_OFFSETS[:0:-1], _OFFSETS])


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights approximating an integral as sum(w * f(x))."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    @classmethod
    def gauss_hermite(cls, n: int) -> "QuadratureRule":
        """Rule for the standard-normal measure Dz (weights sum to one)."""
        x, w = hermegauss(n)
        return cls(x, w / np.sqrt(2.0 * np.pi))

    @classmethod
    def gauss_laguerre(cls, n: int) -> "QuadratureRule":
        """Rule for the weight exp(-t) on [0, inf)."""
        x, w = laggauss(n)
        return cls(x, w)

    @classmethod
    def composite_legendre(cls, breaks, q: int = DEFAULT_PANEL_NODES) -> "QuadratureRule":
        """Gauss-Legendre with ``q`` nodes on every panel between sorted breakpoints."""
        breaks = np.asarray(breaks, dtype=float)
        x, w = leggauss(q)
        lo, hi = breaks[:-1, None], breaks[1:, None]
        half = 0.5 * (hi - lo)
        nodes = (lo + half * (x + 1.0)).ravel()
        weights = (half * w).ravel()
        return cls(nodes, weights)


def _merge_breaks(points, lo: float, hi: float, min_gap: float) -> np.ndarray:
    pts = np.clip(np.asarray(points, dtype=float), lo, hi)
    pts = np.unique(np.concatenate([[lo, hi], pts]))
    keep = [pts[0]]
    for p in pts[1:-1]:
        if p - keep[-1] >= min_gap:
            keep.append(p)
    if hi - keep[-1] < min_gap and len(keep) > 1:
        keep.pop()
    keep.append(hi)
    return np.asarray(keep)


def gaussian_rule(a: float, c: float, thr, q: int = DEFAULT_PANEL_NODES) -> QuadratureRule:
    """Rule for E[f(a z)], z ~ N(0, 1), when f has kinks of width c at ``thr``.

    Panels are refined around each threshold (in z units, thr/a with width
    c/a) so that the narrow Fisher-information bumps of the quantizer are
    resolved at any SNR. Weights include the Gaussian density.
    """
    w = c / a
    pts = [np.linspace(-Z_SPAN, Z_SPAN, 41)]
    thr = np.asarray(thr, dtype=float)
    thr = thr[np.isfinite(thr)]
    if thr.size:
        pts.append((thr[:, None] / a + w * _OFFSETS[None, :]).ravel())
    breaks = _merge_breaks(np.concatenate(pts), -Z_SPAN, Z_SPAN, min(0.25, w / 2))
    rule = QuadratureRule.composite_legendre(breaks, q)
    dens = np.exp(-0.5 * rule.nodes**2) / np.sqrt(2.0 * np.pi)
    return QuadratureRule(rule.nodes, rule.weights * dens)


def fisher_information_quantized(m, c2: float, spec: QuantizerSpec) -> np.ndarray:
    """Sum over levels of psi'^2/psi at locations m, for one real dimension.

    Only bins within 40 standard deviations of m are visited; the rest
    contribute below double precision.
    """
    m = np.asarray(m, dtype=float)
    c = np.sqrt(c2)
    n_lv = spec.n_levels
    width = min(n_lv, int(np.ceil(80.0 * c / spec.step)) + 2)
    k0 = np.clip(spec.index(m - 40.0 * c), 0, n_lv - width)
    k = k0[..., None] + np.arange(width)
    vals = psi_fisher(spec.lower[k], spec.upper[k], m[..., None], c2)
    return vals.sum(axis=-1)


def theta(v: float, v_x: float, sigma2: float, spec: QuantizerSpec | None,
          q: int = DEFAULT_PANEL_NODES) -> float:
    """Averaged Fisher information of one real quantizer channel.

    Sum over levels of E_z[psi'^2/psi] with psi evaluated at location
    sqrt((v_x - v)/2) z and variance (sigma2 + v)/2. ``spec=None`` is the
    unquantized channel, whose value is 2/(sigma2 + v).
    """
    if not (v > 0 and sigma2 > 0):
        raise ValueError(f"need v > 0 and sigma2 > 0, got v={v}, sigma2={sigma2}")
    if v > v_x * (1.0 + 1e-12):
        raise ValueError(f"v={v} exceeds the signal power v_x={v_x}")
    c2 = 0.5 * (sigma2 + v)
    if spec is None:
        return 1.0 / c2
    a = np.sqrt(max(0.5 * (v_x - v), 0.0))
    c = np.sqrt(c2)
    if a <= 1e-8 * c:
        return float(fisher_information_quantized(np.array([0.0]), c2, spec)[0])
    rule = gaussian_rule(a, c, spec.interior_thresholds, q)
    return float(np.dot(rule.weights, fisher_information_quantized(a * rule.nodes, c2, spec)))


def mmse_bg(eta: float, prior: BgPrior, q: int = DEFAULT_PANEL_NODES) -> float:
    """MMSE of a Bernoulli-Gaussian scalar observed in CN(0, 1/eta) noise.

    Written as E[posterior variance] so no large terms cancel:
    rho s/(1+x) + rho s x/(1+x) * int_0^inf e^-t t (1 - pi(t)) dt with
    x = eta*s and pi(t) the posterior activity probability at |r|^2 scaled to t.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    rho, s = prior.rho, prior.varsigma_x
    x = eta * s
    base = rho * s / (1.0 + x)
    if rho >= 1.0:
        return base
    log_k = np.log(rho) - np.log1p(-rho) - np.log1p(x)
    t0, w = -log_k / x, 1.0 / x
    breaks = _merge_breaks(np.concatenate([_T_BASE, t0 + w * 4.0 * _OFFSETS]),
                           0.0, _T_BASE[-1], min(0.125, w / 2))
    rule = QuadratureRule.composite_legendre(breaks, q)
    t = rule.nodes
    inactive = expit(-(t * x + log_k))
    j = np.dot(rule.weights, np.exp(-t) * t * inactive)
    return float(base + rho * s * x / (1.0 + x) * j)


class SeDivergence(RuntimeError):
    """Raised when the recursion produces a non-positive precision."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SeState:
    """One step of the recursion.

    ``v`` is the prior variance of module A at step t, ``theta`` its Fisher
    term, ``eta`` the precision that produced it and ``mse_pred`` =
    mmse(eta). At t=0 there is no precision yet: eta is 0 and mse_pred is
    the prior power v_x.
    """

    t: int
    v: float
    eta: float
    theta: float
    mse_pred: float


def se_initial(prior: BgPrior, sigma2: float, spec: QuantizerSpec | None,
               q: int = DEFAULT_PANEL_NODES) -> SeState:
    v0 = prior.v_x
    return SeState(0, v0, 0.0, theta(v0, v0, sigma2, spec, q), v0)


def se_step(state: SeState, alpha: float, prior: BgPrior, sigma2: float,
            spec: QuantizerSpec | None, q: int = DEFAULT_PANEL_NODES) -> SeState:
    # theta is per real dimension; the complex message gathers half of it
    # from each of the two parts, so the complex information is alpha*theta/2.
    info = alpha * state.theta / 2.0
    if not (info > 0 and np.isfinite(info)):
        raise SeDivergence(f"no information at t={state.t + 1} (alpha*theta={2 * info})", [])
    denom = 1.0 / info - state.v
    if not denom > 0:
        raise SeDivergence(f"non-positive precision at t={state.t + 1}", [])
    eta = float(np.clip(1.0 / denom, 1.0 / VAR_MAX, 1.0 / VAR_MIN))
    mse = mmse_bg(eta, prior, q)
    prec = 1.0 / mse - eta
    v = VAR_MAX if prec <= 0 else float(np.clip(1.0 / prec, VAR_MIN, VAR_MAX))
    v = min(v, prior.v_x)
    return SeState(state.t + 1, v, eta, theta(v, prior.v_x, sigma2, spec, q), mse)


def se_trajectory(alpha: float, prior: BgPrior, sigma2: float, spec: QuantizerSpec | None,
                  t_max: int = 50, tol: float = 1e-8,
                  q: int = DEFAULT_PANEL_NODES) -> list[SeState]:
    """States t = 0..T; stops at t_max or when v changes by less than tol (relative)."""
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    traj = [se_initial(prior, sigma2, spec, q)]
    for _ in range(t_max):
        prev = traj[-1]
        try:
            nxt = se_step(prev, alpha, prior, sigma2, spec, q)
        except SeDivergence as exc:
            raise SeDivergence(str(exc), traj) from None
        traj.append(nxt)
        if abs(nxt.v - prev.v) < tol * prev.v:
            break
    return traj
