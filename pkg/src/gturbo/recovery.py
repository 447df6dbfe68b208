"""Generalized turbo signal recovery.

Module A handles the nonlinear output channel in the transform domain,
module B the signal prior in the sample domain. Each module turns its
posterior into an extrinsic message for the other; the unitary DFT maps
between the two domains.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channels import OutputChannel, make_channel
from .denoisers import VAR_MAX, VAR_MIN, clamp_var, x_posterior
from .model import BgPrior, Measurements, NoiseModel, QuantizerSpec, SelectionMask
from .transform import DftPlan


@dataclass(frozen=True)
class GaussianMessage:
    mean: np.ndarray
    variance: float


def extrinsic(post: GaussianMessage, pri: GaussianMessage) -> GaussianMessage:
    """Divide the prior out of the posterior (Gaussian precision subtraction).

    A non-positive precision difference means the posterior carries no
    information beyond the prior; the variance is then pinned at VAR_MAX.
    """
    if np.shape(post.mean) != np.shape(pri.mean):
        raise ValueError("mean vectors differ in shape")
    prec = 1.0 / post.variance - 1.0 / pri.variance
    v_ext = VAR_MAX if prec <= 1.0 / VAR_MAX else float(clamp_var(1.0 / prec))
    mean = v_ext * (np.asarray(post.mean) / post.variance - np.asarray(pri.mean) / pri.variance)
    return GaussianMessage(mean, v_ext)


def _damp(new: GaussianMessage, old: GaussianMessage | None, beta: float) -> GaussianMessage:
    if old is None or beta >= 1.0:
        return new
    prec = beta / new.variance + (1.0 - beta) / old.variance
    mean = beta * new.mean + (1.0 - beta) * old.mean
    return GaussianMessage(mean, float(clamp_var(1.0 / prec)))


class StopReason(str, enum.Enum):
    MAX_ITER = "max-iter"
    CONVERGED = "converged"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class RecoveryOptions:
    t_max: int = 50
    damping: float = 1.0
    tol: float = 1e-8

    def __post_init__(self):
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ValueError(f"t_max must be a positive integer, got {self.t_max}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if not self.tol >= 0.0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    v_a_pri: float
    v_b_pri: float
    v_a_post: float
    v_b_post: float
    mse: float | None = None


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    iterations_run: int
    stop_reason: StopReason
    mse_per_iter: np.ndarray | None = None
    trace: list[IterationRecord] = field(default_factory=list)


def mse(x, x_hat) -> float:
    """||x - x_hat||^2 / N."""
    x = np.asarray(x)
    x_hat = np.asarray(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {x_hat.shape}")
    return float(np.mean(np.abs(x - x_hat) ** 2))


def _pinned(v: float) -> bool:
    return v <= VAR_MIN or v >= VAR_MAX


def run(meas: Measurements, mask: SelectionMask, spec: QuantizerSpec | None,
        noise: NoiseModel, prior: BgPrior, plan: DftPlan,
        options: RecoveryOptions | None = None, truth=None,
        channel: OutputChannel | None = None, observer=None) -> RecoveryResult:
    """Run the turbo iteration on enlarged (length-N) measurements.

    ``channel`` overrides the likelihood built from ``spec`` and ``noise``.
    ``observer``, if given, is called once per iteration with a dict of the
    intermediate messages (for diagnostics and tests).
    """
    options = options or RecoveryOptions()
    n = plan.n
    if meas.n != n or mask.n != n or (truth is not None and np.shape(truth) != (n,)):
        raise ValueError(f"dimension mismatch: plan n={n}, measurements n={meas.n}, mask n={mask.n}")
    if not np.array_equal(meas.observed, mask.observed):
        raise ValueError("measurement marker disagrees with the selection mask")
    if channel is None:
        channel = make_channel(spec, noise.sigma2)
    beta = options.damping

    z_a_pri = GaussianMessage(np.zeros(n, dtype=np.complex128), prior.v_x)
    x_b_pri: GaussianMessage | None = None
    x_post = np.zeros(n, dtype=np.complex128)
    trace: list[IterationRecord] = []
    mses: list[float] = []
    reason = StopReason.MAX_ITER
    pinned_run = 0

    for t in range(1, options.t_max + 1):
        # module A: output nonlinearity, then back to the signal domain
        z_post, vz_post = channel.posterior(z_a_pri.mean, z_a_pri.variance, meas)
        a_post = GaussianMessage(plan.adjoint(z_post), float(np.mean(vz_post)))
        a_pri = GaussianMessage(plan.adjoint(z_a_pri.mean), z_a_pri.variance)
        x_b_new = _damp(extrinsic(a_post, a_pri), x_b_pri, beta)

        # module B: prior nonlinearity, then forward to the transform domain
        x_post, vx_post = x_posterior(x_b_new.mean, x_b_new.variance, prior)
        b_post = GaussianMessage(plan.forward(x_post), float(np.mean(vx_post)))
        b_pri = GaussianMessage(plan.forward(x_b_new.mean), x_b_new.variance)
        z_a_new = _damp(extrinsic(b_post, b_pri), z_a_pri, beta)

        err = None
        if truth is not None:
            err = mse(truth, x_post)
            mses.append(err)
        trace.append(IterationRecord(t, z_a_pri.variance, x_b_new.variance,
                                     a_post.variance, b_post.variance, err))
        if observer is not None:
            observer({"t": t, "z_a_pri": z_a_pri, "x_a_pri": a_pri, "x_a_post": a_post,
                      "x_b_pri": x_b_new, "x_post": x_post, "x_b_post_var": b_post.variance,
                      "z_a_next": z_a_new})

        v_old = z_a_pri.variance
        z_a_pri, x_b_pri = z_a_new, x_b_new
        pinned_run = pinned_run + 1 if (_pinned(z_a_pri.variance) or _pinned(x_b_pri.variance)) else 0
        if pinned_run >= 3:
            reason = StopReason.DIVERGED
            break
        # a pinned variance is a stall, not convergence
        if pinned_run == 0 and abs(z_a_pri.variance - v_old) < options.tol * v_old:
            reason = StopReason.CONVERGED
            break

    return RecoveryResult(
        x_hat=x_post,
        iterations_run=len(trace),
        stop_reason=reason,
        mse_per_iter=np.asarray(mses) if truth is not None else None,
        trace=trace,
    )
