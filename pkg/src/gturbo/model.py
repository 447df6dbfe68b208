"""Signal prior, quantizer, and the forward measurement process.

Everything here is length-N: unobserved DFT rows are kept and flagged by a
boolean mask instead of being deleted, so all vectors stay FFT-sized.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .transform import DftPlan


def as_rng(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, var: float, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with E|w|^2 = var."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


@dataclass(frozen=True)
class BgPrior:
    """Bernoulli-Gaussian prior: zero w.p. 1-rho, CN(0, varsigma_x) otherwise."""

    rho: float
    varsigma_x: float

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if not (self.varsigma_x > 0.0 and np.isfinite(self.varsigma_x)):
            raise ValueError(f"varsigma_x must be positive, got {self.varsigma_x}")

    @property
    def v_x(self) -> float:
        return self.rho * self.varsigma_x


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform mid-rise B-bit quantizer applied to one real dimension.

    Levels are (b - 1/2) * step for b = -2**B/2 + 1, ..., 2**B/2, so zero is
    never an output. Each level owns the half-open interval (low, up]; the
    two outermost intervals extend to -inf and +inf.
    """

    bits: int
    step: float | None = None

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits}")
        object.__setattr__(self, "bits", int(self.bits))
        if self.step is None:
            object.__setattr__(self, "step", 2.0 ** (1 - self.bits))
        if not (self.step > 0.0 and np.isfinite(self.step)):
            raise ValueError(f"step must be positive, got {self.step}")
        object.__setattr__(self, "step", float(self.step))

    @property
    def n_levels(self) -> int:
        return 2**self.bits

    @property
    def b_min(self) -> int:
        return -(self.n_levels // 2) + 1

    @property
    def b_max(self) -> int:
        return self.n_levels // 2

    @property
    def saturation_level(self) -> float:
        return (self.n_levels / 2 - 1) * self.step

    @cached_property
    def levels(self) -> np.ndarray:
        b = np.arange(self.b_min, self.b_max + 1)
        out = (b - 0.5) * self.step
        out.setflags(write=False)
        return out

    @cached_property
    def interior_thresholds(self) -> np.ndarray:
        out = np.arange(self.b_min, self.b_max) * self.step
        out.setflags(write=False)
        return out

    @cached_property
    def lower(self) -> np.ndarray:
        out = np.concatenate([[-np.inf], self.interior_thresholds])
        out.setflags(write=False)
        return out

    @cached_property
    def upper(self) -> np.ndarray:
        # the top bin is unbounded above (with -inf it would be empty)
        out = np.concatenate([self.interior_thresholds, [np.inf]])
        out.setflags(write=False)
        return out

    def index(self, u) -> np.ndarray:
        """Level index (0..2**B-1) of the bin containing each real input."""
        u = np.asarray(u, dtype=float)
        b = np.ceil(u / self.step)
        k = (np.clip(b, self.b_min, self.b_max) - self.b_min).astype(np.int64)
        # the division can round across a threshold when step is not a power of two
        k += u > self.upper[k]
        k -= u <= self.lower[k]
        return k

    def level_index(self, level) -> np.ndarray:
        """Inverse of ``levels[k]``; raises if any value is not a level."""
        level = np.asarray(level, dtype=float)
        b = np.rint(level / self.step + 0.5)
        k = b - self.b_min
        ok = (k >= 0) & (k < self.n_levels)
        ok &= np.isclose(level, (b - 0.5) * self.step, rtol=0.0, atol=1e-9 * self.step)
        if not np.all(ok):
            bad = np.asarray(level)[~ok].ravel()[:3]
            raise ValueError(f"not a quantizer level for {self}: {bad}")
        return k.astype(np.int64)

    def quantize_real(self, u) -> np.ndarray:
        return self.levels[self.index(u)]


def thresholds(level: float, spec: QuantizerSpec) -> tuple[float, float]:
    """(low, up) of the interval that maps to ``level``."""
    k = int(spec.level_index(level))
    return float(spec.lower[k]), float(spec.upper[k])


@dataclass(frozen=True)
class SelectionMask:
    """Diagonal of the 0/1 row-selection matrix."""

    observed: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool).copy()
        if obs.ndim != 1 or obs.size == 0:
            raise ValueError("mask must be a non-empty 1-D boolean vector")
        obs.setflags(write=False)
        object.__setattr__(self, "observed", obs)

    @property
    def n(self) -> int:
        return self.observed.size

    @property
    def m(self) -> int:
        return int(self.observed.sum())

    @property
    def alpha(self) -> float:
        return self.m / self.n

    @classmethod
    def full(cls, n: int) -> "SelectionMask":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def random(cls, n: int, m: int, seed) -> "SelectionMask":
        if not (0 <= m <= n):
            raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
        rng = as_rng(seed)
        obs = np.zeros(n, dtype=bool)
        obs[rng.choice(n, size=m, replace=False)] = True
        return cls(obs)


@dataclass(frozen=True)
class NoiseModel:
    """Complex AWGN with total variance sigma2 (sigma2/2 per real part)."""

    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 > 0.0 and np.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def snr(self) -> float:
        return 1.0 / self.sigma2

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseModel":
        return cls(10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class Measurements:
    """Observed values plus the observation marker.

    ``values`` holds quantizer levels (real and imaginary part separately)
    when ``quantizer`` is set and raw noisy samples otherwise. Entries with
    ``observed == False`` carry no information; their value is 0.
    """

    values: np.ndarray
    observed: np.ndarray
    quantizer: QuantizerSpec | None = None

    @property
    def n(self) -> int:
        return self.values.size


def sample_signal(prior: BgPrior, n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = as_rng(seed)
    active = rng.random(n) < prior.rho
    x = complex_normal(rng, prior.varsigma_x, n)
    return np.where(active, x, 0.0 + 0.0j)


def forward_measure(x, mask: SelectionMask, noise: NoiseModel, plan: DftPlan, seed) -> np.ndarray:
    """Enlarged measurement y = S (F x + n); unobserved rows are zero."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (mask.n,) or plan.n != mask.n:
        raise ValueError(f"shape mismatch: x {x.shape}, mask n={mask.n}, plan n={plan.n}")
    rng = as_rng(seed)
    z = plan.forward(x)
    w = complex_normal(rng, noise.sigma2, mask.n)
    return np.where(mask.observed, z + w, 0.0 + 0.0j)


def quantize(y, spec: QuantizerSpec | None, mask: SelectionMask) -> Measurements:
    """Quantize real and imaginary parts separately on observed rows.

    ``spec=None`` is the unquantized mode: observed samples pass through.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (mask.n,):
        raise ValueError(f"shape mismatch: y {y.shape}, mask n={mask.n}")
    if spec is None:
        vals = y
    else:
        vals = spec.quantize_real(y.real) + 1j * spec.quantize_real(y.imag)
    vals = np.where(mask.observed, vals, 0.0 + 0.0j)
    return Measurements(vals, mask.observed, spec)
