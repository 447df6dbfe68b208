import numpy as np
import pytest
from hypothesis import given, strategies as st

from gturbo import recovery
from gturbo.channels import GaussianChannel, OutputChannel
from gturbo.denoisers import VAR_MAX, VAR_MIN
from gturbo.model import (BgPrior, NoiseModel, QuantizerSpec, SelectionMask, forward_measure,
                          quantize, sample_signal)
from gturbo.recovery import GaussianMessage, RecoveryOptions, StopReason, extrinsic, mse
from gturbo.state_evolution import se_trajectory
from gturbo.transform import DftPlan

PRIOR = BgPrior(0.4, 2.5)
NOISE = NoiseModel.from_snr_db(50)


def problem(n, alpha, spec, seed, prior=PRIOR, noise=NOISE):
    rng = np.random.default_rng(seed)
    plan = DftPlan(n)
    mask = SelectionMask.random(n, int(round(alpha * n)), rng)
    x = sample_signal(prior, n, rng)
    y = forward_measure(x, mask, noise, plan, rng)
    return quantize(y, spec, mask), mask, x, plan


# ---------------------------------------------------------------- extrinsic

def test_extrinsic_halved_variance():
    post = GaussianMessage(np.array([1.0 + 2j, -0.5j]), 0.5)
    pri = GaussianMessage(np.zeros(2, complex), 1.0)
    ext = extrinsic(post, pri)
    assert ext.variance == pytest.approx(1.0)
    assert np.allclose(ext.mean, 2 * post.mean)


def test_extrinsic_without_information():
    post = GaussianMessage(np.array([0.3 + 0j]), 0.7)
    pri = GaussianMessage(np.array([0.1 + 0j]), 0.7)
    ext = extrinsic(post, pri)
    assert ext.variance == VAR_MAX
    assert np.all(np.isfinite(ext.mean))
    # a posterior that is less certain than its prior is treated the same way
    assert extrinsic(GaussianMessage(post.mean, 0.9), pri).variance == VAR_MAX


def test_extrinsic_shape_mismatch():
    with pytest.raises(ValueError):
        extrinsic(GaussianMessage(np.zeros(2), 1.0), GaussianMessage(np.zeros(3), 2.0))


@given(st.floats(1e-3, 1e3), st.floats(0.01, 0.99), st.integers(0, 2**31))
def test_extrinsic_round_trip(v_pri, frac, seed):
    rng = np.random.default_rng(seed)
    n = 8
    pri = GaussianMessage(rng.normal(size=n) + 1j * rng.normal(size=n), v_pri)
    post = GaussianMessage(rng.normal(size=n) + 1j * rng.normal(size=n), v_pri * frac)
    ext = extrinsic(post, pri)
    # product of the prior and extrinsic Gaussians gives back the posterior
    v = 1.0 / (1.0 / ext.variance + 1.0 / pri.variance)
    m = v * (ext.mean / ext.variance + pri.mean / pri.variance)
    assert v == pytest.approx(post.variance, rel=1e-10)
    assert np.allclose(m, post.mean, rtol=1e-10, atol=1e-10 * np.max(np.abs(post.mean)))


# ---------------------------------------------------------------- mse

def test_mse_examples():
    x = np.array([1.0, 1j])
    assert mse(x, x) == 0
    assert mse(x, np.zeros(2)) == 1.0
    big = sample_signal(PRIOR, 10**5, 0)
    assert mse(big, np.zeros_like(big)) == pytest.approx(1.0, rel=0.03)
    with pytest.raises(ValueError):
        mse(x, np.zeros(3))


# ---------------------------------------------------------------- options

@pytest.mark.parametrize("kw", [dict(t_max=0), dict(t_max=2.5), dict(damping=0.0),
                                dict(damping=1.5), dict(tol=-1.0)])
def test_options_validation(kw):
    with pytest.raises(ValueError):
        RecoveryOptions(**kw)


# ---------------------------------------------------------------- run

def test_three_bit_reaches_se_level():
    """Fixed-point MSE predicted by SE (about -15.4 dB) within 20 iterations."""
    spec = QuantizerSpec(3)
    fixed = se_trajectory(0.7, PRIOR, NOISE.sigma2, spec, t_max=200)[-1].mse_pred
    threshold_db = 10 * np.log10(fixed) + 1.5
    finals = []
    for seed in range(30):
        meas, mask, x, plan = problem(4096, 0.7, spec, seed)
        res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, RecoveryOptions(t_max=20), truth=x)
        finals.append(10 * np.log10(res.mse_per_iter[-1]))
    assert np.mean(np.array(finals) < threshold_db) >= 0.9


def test_full_observation_high_resolution_is_immediate():
    # range +-4 so the 12-bit quantizer never clips; first-step errors are then noise-limited
    spec = QuantizerSpec(12, 2.0**-9)
    for seed in range(3):
        meas, mask, x, plan = problem(4096, 1.0, spec, seed)
        res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, truth=x)
        first, final = 10 * np.log10(res.mse_per_iter[[0, -1]])
        assert abs(first - final) <= 1.0


def test_truth_does_not_change_the_estimate():
    spec = QuantizerSpec(2)
    meas, mask, x, plan = problem(512, 0.7, spec, 3)
    a = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, truth=x)
    b = recovery.run(meas, mask, spec, NOISE, PRIOR, plan)
    assert b.mse_per_iter is None
    assert a.mse_per_iter is not None and len(a.mse_per_iter) == a.iterations_run
    assert np.array_equal(a.x_hat, b.x_hat)
    assert a.trace[-1].v_a_pri == b.trace[-1].v_a_pri


def test_deterministic():
    spec = QuantizerSpec(1)
    runs = []
    for _ in range(2):
        meas, mask, x, plan = problem(1024, 0.7, spec, 11)
        runs.append(recovery.run(meas, mask, spec, NOISE, PRIOR, plan, truth=x))
    assert np.array_equal(runs[0].x_hat, runs[1].x_hat)
    assert runs[0].trace == runs[1].trace


def test_messages_follow_the_transform():
    spec = QuantizerSpec(3)
    meas, mask, x, plan = problem(1024, 0.7, spec, 2)
    seen = []

    def watch(d):
        assert np.max(np.abs(d["x_a_pri"].mean - plan.adjoint(d["z_a_pri"].mean))) <= 1e-12
        seen.append(d["t"])

    res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, observer=watch)
    assert seen == list(range(1, res.iterations_run + 1))


def test_first_iteration_starts_from_zero():
    spec = QuantizerSpec(2)
    meas, mask, x, plan = problem(256, 0.7, spec, 2)
    first = []
    recovery.run(meas, mask, spec, NOISE, PRIOR, plan, RecoveryOptions(t_max=1), observer=first.append)
    assert np.all(first[0]["x_a_pri"].mean == 0)
    assert first[0]["z_a_pri"].variance == PRIOR.v_x


def test_trace_invariants():
    spec = QuantizerSpec(2)
    meas, mask, x, plan = problem(1024, 0.7, spec, 4)
    res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, truth=x)
    assert len(res.trace) == res.iterations_run
    assert res.trace[0].v_a_pri == PRIOR.v_x
    for rec in res.trace:
        for v in (rec.v_a_pri, rec.v_b_pri, rec.v_a_post, rec.v_b_post):
            assert VAR_MIN <= v <= VAR_MAX
    assert res.stop_reason in (StopReason.CONVERGED, StopReason.MAX_ITER)


def test_converged_stop():
    spec = QuantizerSpec(1)
    meas, mask, x, plan = problem(1024, 0.7, spec, 5)
    res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, RecoveryOptions(t_max=200, tol=1e-6))
    assert res.stop_reason is StopReason.CONVERGED
    assert res.iterations_run < 200


def test_max_iter_stop():
    spec = QuantizerSpec(2)
    meas, mask, x, plan = problem(512, 0.7, spec, 5)
    res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, RecoveryOptions(t_max=3))
    assert res.stop_reason is StopReason.MAX_ITER and res.iterations_run == 3


class _Useless(OutputChannel):
    sigma2 = 1.0

    def posterior(self, z_pri, v_pri, meas):
        return np.asarray(z_pri), np.full(np.shape(z_pri), v_pri)


def test_divergence_is_detected():
    spec = QuantizerSpec(2)
    meas, mask, x, plan = problem(256, 0.7, spec, 6)
    res = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, channel=_Useless())
    assert res.stop_reason is StopReason.DIVERGED
    assert res.iterations_run == 3


def test_damping_still_converges():
    spec = QuantizerSpec(3)
    meas, mask, x, plan = problem(2048, 0.7, spec, 7)
    plain = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, truth=x)
    damped = recovery.run(meas, mask, spec, NOISE, PRIOR, plan, RecoveryOptions(t_max=150, damping=0.7), truth=x)
    assert abs(10 * np.log10(damped.mse_per_iter[-1] / plain.mse_per_iter[-1])) < 0.5


def test_unquantized_mode_and_channel_override():
    meas, mask, x, plan = problem(1024, 0.7, None, 8)
    a = recovery.run(meas, mask, None, NOISE, PRIOR, plan, truth=x)
    b = recovery.run(meas, mask, None, NOISE, PRIOR, plan, truth=x, channel=GaussianChannel(NOISE.sigma2))
    assert np.array_equal(a.x_hat, b.x_hat)
    assert 10 * np.log10(a.mse_per_iter[-1]) < -45


def test_wrong_quantizer_rejected():
    meas, mask, x, plan = problem(256, 0.7, QuantizerSpec(2), 9)
    with pytest.raises(ValueError):
        recovery.run(meas, mask, QuantizerSpec(3), NOISE, PRIOR, plan)


def test_dimension_mismatch():
    meas, mask, x, plan = problem(256, 0.7, QuantizerSpec(2), 9)
    with pytest.raises(ValueError):
        recovery.run(meas, mask, QuantizerSpec(2), NOISE, PRIOR, DftPlan(512))
    with pytest.raises(ValueError):
        recovery.run(meas, mask, QuantizerSpec(2), NOISE, PRIOR, plan, truth=x[:10])
    other = SelectionMask(~mask.observed)
    with pytest.raises(ValueError):
        recovery.run(meas, other, QuantizerSpec(2), NOISE, PRIOR, plan)
