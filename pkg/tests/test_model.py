import numpy as np
import pytest
from hypothesis import given, strategies as st

from gturbo.model import (BgPrior, Measurements, NoiseModel, QuantizerSpec, SelectionMask,
                          forward_measure, quantize, sample_signal, thresholds)
from gturbo.transform import DftPlan


# ---------------------------------------------------------------- prior

def test_prior_power():
    p = BgPrior(0.4, 2.5)
    assert p.v_x == 0.4 * 2.5


@pytest.mark.parametrize("rho, s", [(0.0, 1.0), (1.5, 1.0), (-0.1, 1.0), (0.5, 0.0), (0.5, -1), (0.5, np.inf)])
def test_prior_rejects_bad_parameters(rho, s):
    with pytest.raises(ValueError):
        BgPrior(rho, s)


def test_gaussian_signal_power():
    x = sample_signal(BgPrior(1.0, 1.0), 10**5, 1)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=0.02)


def test_sparse_signal_statistics():
    x = sample_signal(BgPrior(0.4, 2.5), 10**5, 2)
    assert np.mean(x == 0) == pytest.approx(0.6, abs=0.01)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=0.03)


def test_signal_power_million_samples():
    x = sample_signal(BgPrior(0.4, 2.5), 10**6, 3)
    assert abs(np.mean(np.abs(x) ** 2) - 1.0) <= 0.01


def test_signal_is_circular():
    x = sample_signal(BgPrior(1.0, 2.0), 10**5, 4)
    assert np.var(x.real) == pytest.approx(1.0, rel=0.03)
    assert np.var(x.imag) == pytest.approx(1.0, rel=0.03)
    assert abs(np.mean(x.real * x.imag)) < 0.02


def test_signal_deterministic():
    p = BgPrior(0.3, 1.0)
    assert np.array_equal(sample_signal(p, 500, 7), sample_signal(p, 500, 7))
    assert not np.array_equal(sample_signal(p, 500, 7), sample_signal(p, 500, 8))


def test_signal_needs_positive_length():
    with pytest.raises(ValueError):
        sample_signal(BgPrior(0.5, 1.0), 0, 0)


# ---------------------------------------------------------------- quantizer

def test_quantizer_levels_and_defaults():
    q = QuantizerSpec(3)
    assert q.step == 0.25
    assert np.allclose(q.levels, [-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875])
    assert q.saturation_level == 0.75
    assert q.lower[0] == -np.inf and q.upper[-1] == np.inf
    assert np.allclose(q.interior_thresholds, np.arange(-3, 4) * 0.25)


@pytest.mark.parametrize("bits", [1, 2, 3, 4, 8])
def test_level_set_invariants(bits):
    q = QuantizerSpec(bits)
    assert q.levels.size == 2**bits
    assert not np.any(q.levels == 0)
    assert np.allclose(q.levels, -q.levels[::-1])
    assert np.all(q.lower < q.upper)
    assert np.allclose(q.upper[:-1], q.levels[:-1] + q.step / 2)
    assert np.allclose(q.lower[1:], q.levels[1:] - q.step / 2)
    assert np.all(np.abs(np.sign(q.levels)) == 1)


@pytest.mark.parametrize("bits, step", [(0, None), (2.5, None), (2, 0.0), (2, -1.0)])
def test_quantizer_rejects_bad_parameters(bits, step):
    with pytest.raises(ValueError):
        QuantizerSpec(bits, step)


def test_one_bit_sign():
    assert QuantizerSpec(1, 1.0).quantize_real(0.3) == 0.5
    assert QuantizerSpec(1, 1.0).quantize_real(-0.3) == -0.5


def test_saturation():
    assert QuantizerSpec(2, 0.5).quantize_real(1.7) == 0.75
    assert QuantizerSpec(2, 0.5).quantize_real(-1e9) == -0.75


def test_zero_lies_in_the_negative_interval():
    # bins are (low, up], so 0 belongs to (-0.25, 0]
    assert QuantizerSpec(3).quantize_real(0.0) == -0.125
    assert QuantizerSpec(3).quantize_real(1e-300) == 0.125


def test_thresholds():
    q = QuantizerSpec(2, 0.5)
    assert thresholds(-0.25, q) == (-0.5, 0.0)
    assert thresholds(-0.75, q) == (-np.inf, -0.5)
    assert thresholds(0.5, QuantizerSpec(1, 1.0)) == (0.0, np.inf)
    with pytest.raises(ValueError):
        thresholds(0.3, q)
    with pytest.raises(ValueError):
        thresholds(1.25, q)


@given(st.integers(1, 10), st.floats(1e-3, 10.0), st.floats(-50, 50, allow_nan=False))
def test_interval_partition(bits, step, u):
    q = QuantizerSpec(bits, step)
    inside = (q.lower < u) & (u <= q.upper)
    assert inside.sum() == 1
    assert q.levels[np.argmax(inside)] == q.quantize_real(u)


@given(st.integers(1, 10), st.floats(1e-3, 10.0))
def test_levels_are_fixed_points(bits, step):
    q = QuantizerSpec(bits, step)
    assert np.array_equal(q.quantize_real(q.levels), q.levels)


@given(st.integers(1, 8), st.floats(1e-3, 10.0))
def test_thresholds_exactly_at_boundaries(bits, step):
    q = QuantizerSpec(bits, step)
    thr = q.interior_thresholds
    k = q.index(thr)
    assert np.array_equal(k, np.arange(thr.size))


# ---------------------------------------------------------------- mask, noise

def test_mask_counts():
    m = SelectionMask.random(64, 45, 0)
    assert (m.n, m.m) == (64, 45)
    assert m.alpha == 45 / 64
    assert SelectionMask.full(8).alpha == 1.0
    assert np.array_equal(SelectionMask.random(64, 45, 0).observed, m.observed)


def test_mask_is_read_only():
    m = SelectionMask.full(4)
    with pytest.raises(ValueError):
        m.observed[0] = False


def test_mask_rejects_bad_input():
    with pytest.raises(ValueError):
        SelectionMask.random(8, 9, 0)
    with pytest.raises(ValueError):
        SelectionMask(np.zeros((2, 2)))


def test_noise_model():
    nm = NoiseModel.from_snr_db(50)
    assert nm.sigma2 == pytest.approx(1e-5)
    assert nm.snr * nm.sigma2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        NoiseModel(0.0)


# ---------------------------------------------------------------- forward model

def test_noiseless_full_observation(rng):
    n = 256
    plan = DftPlan(n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = forward_measure(x, SelectionMask.full(n), NoiseModel(1e-300), plan, 0)
    assert np.max(np.abs(y - plan.forward(x))) <= 1e-12


def test_nothing_observed(rng):
    n = 64
    x = rng.standard_normal(n) + 0j
    y = forward_measure(x, SelectionMask(np.zeros(n, bool)), NoiseModel(1.0), DftPlan(n), 0)
    assert np.all(y == 0)


def test_measurement_power(rng):
    n = 16384
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    mask = SelectionMask.random(n, int(0.7 * n), 1)
    sigma2 = 1e-5
    y = forward_measure(x, mask, NoiseModel(sigma2), DftPlan(n), 2)
    obs = y[mask.observed]
    expected = np.linalg.norm(x) ** 2 / n + sigma2
    assert np.mean(np.abs(obs) ** 2) == pytest.approx(expected, rel=0.05)
    assert np.all(y[~mask.observed] == 0)


def test_forward_shape_mismatch():
    with pytest.raises(ValueError):
        forward_measure(np.zeros(8), SelectionMask.full(16), NoiseModel(1.0), DftPlan(16), 0)


def test_quantize_complex_parts_separately():
    q = QuantizerSpec(2, 0.5)
    mask = SelectionMask(np.array([True, True, False]))
    meas = quantize(np.array([0.3 - 1.7j, -0.1 + 0.6j, 5 + 5j]), q, mask)
    assert isinstance(meas, Measurements)
    assert np.array_equal(meas.values, [0.25 - 0.75j, -0.25 + 0.75j, 0])
    assert np.array_equal(meas.observed, mask.observed)
    assert meas.quantizer == q


def test_quantize_none_passes_through():
    mask = SelectionMask(np.array([True, False]))
    meas = quantize(np.array([0.3 + 0.1j, 1.0]), None, mask)
    assert np.array_equal(meas.values, [0.3 + 0.1j, 0])
    assert meas.quantizer is None
