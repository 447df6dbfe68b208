"""Quick oracle checks runnable from the command line (``gturbo selftest``)."""

from __future__ import annotations

import warnings

import numpy as np

from . import denoisers, oracles
from .model import BgPrior, QuantizerSpec
from .state_evolution import mmse_bg, theta
from .transform import DftPlan, dft_matrix


def _draw_z_case(rng):
    spec = QuantizerSpec(int(rng.choice([1, 2, 3, 8])))
    v = 10 ** rng.uniform(-4, 1)
    s2 = 10 ** rng.uniform(-6, 0)
    z_pri = complex(*rng.normal(0.0, 0.7, 2))
    z = z_pri + complex(*rng.normal(0.0, np.sqrt(v / 2), 2))
    y = z + complex(*rng.normal(0.0, np.sqrt(s2 / 2), 2))
    return spec, v, s2, z_pri, spec.quantize_real(y.real), spec.quantize_real(y.imag)


def z_denoiser_error(draws: int, seed: int = 0) -> tuple[float, float]:
    """Worst |mean error| and |variance error| against the quadrature oracle."""
    rng = np.random.default_rng(seed)
    em = ev = 0.0
    for _ in range(draws):
        spec, v, s2, z_pri, lr, li = _draw_z_case(rng)
        got_m, got_v = denoisers.z_posterior_scalar(z_pri, v, lr, li, spec, s2)
        kr, ki = spec.level_index(lr), spec.level_index(li)
        ref_m, ref_v = oracles.z_posterior_complex(
            z_pri, v, (spec.lower[kr], spec.lower[ki]), (spec.upper[kr], spec.upper[ki]), s2)
        em, ev = max(em, abs(got_m - ref_m)), max(ev, abs(got_v - ref_v))
    return em, ev


def x_denoiser_error(draws: int, seed: int = 0) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    em = ev = 0.0
    for _ in range(draws):
        prior = BgPrior(rng.uniform(0.05, 1.0), rng.uniform(0.1, 5.0))
        v = 10 ** rng.uniform(-4, 1)
        x = complex(*rng.normal(0.0, np.sqrt(prior.varsigma_x / 2), 2)) * (rng.random() < prior.rho)
        r = x + complex(*rng.normal(0.0, np.sqrt(v / 2), 2))
        got_m, got_v = denoisers.x_posterior_scalar(r, v, prior)
        ref_m, ref_v = oracles.x_posterior_bg(r, v, prior)
        em, ev = max(em, abs(got_m - ref_m)), max(ev, abs(got_v - ref_v))
    return em, ev


def run(draws: int = 200, out=print) -> bool:
    checks = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rng = np.random.default_rng(0)
        worst = 0.0
        for n in (2, 8, 64):
            x = rng.normal(size=n) + 1j * rng.normal(size=n)
            worst = max(worst, np.max(np.abs(DftPlan(n).forward(x) - dft_matrix(n) @ x)))
        checks.append(("fft vs direct DFT", worst, 1e-12))

        em, ev = z_denoiser_error(draws)
        checks.append(("z posterior mean vs quadrature", em, 1e-6))
        checks.append(("z posterior variance vs quadrature", ev, 1e-6))
        em, ev = x_denoiser_error(draws)
        checks.append(("x posterior mean vs quadrature", em, 1e-6))
        checks.append(("x posterior variance vs quadrature", ev, 1e-6))

        prior = BgPrior(1.0, 2.5)
        err = max(abs(mmse_bg(e, prior) - 2.5 / (1 + 2.5 * e)) for e in (0.01, 1.0, 100.0))
        checks.append(("mmse_bg Gaussian closed form", err, 1e-12))

        spec = QuantizerSpec(3)
        t1, t2 = theta(0.3, 1.0, 1e-5, spec), theta(0.3, 1.0, 1e-5, spec, q=32)
        checks.append(("theta node doubling (relative)", abs(t1 - t2) / t2, 1e-9))
        ref = oracles.theta_adaptive(0.3, 1.0, 1e-5, spec.lower, spec.upper)
        checks.append(("theta vs adaptive quadrature (relative)", abs(t1 - ref) / ref, 1e-8))

    ok = True
    for name, err, tol in checks:
        passed = err <= tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {err:.3e} (tol {tol:.0e})")
    return ok
