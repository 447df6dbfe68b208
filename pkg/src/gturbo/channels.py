"""Output channels: the likelihood P(y | z) seen by module A.

A channel bundles the two things the rest of the package needs from a
likelihood: the per-entry posterior of z under a Gaussian prior (used by
the recovery loop) and the averaged Fisher information (used by state
evolution). New likelihoods plug in by subclassing :class:`OutputChannel`.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import denoisers
from .model import Measurements, QuantizerSpec
from .state_evolution import theta as _theta


class OutputChannel:
    sigma2: float

    def posterior(self, z_pri, v_pri: float, meas: Measurements):
        """Per-entry posterior means and total variances of z."""
        raise NotImplementedError

    def theta(self, v: float, v_x: float) -> float:
        """Per-real-dimension Fisher information averaged over the SE prior of z."""
        raise NotImplementedError


@dataclass(frozen=True)
class QuantizedGaussianChannel(OutputChannel):
    spec: QuantizerSpec
    sigma2: float

    def posterior(self, z_pri, v_pri, meas):
        if meas.quantizer != self.spec:
            raise ValueError("measurements were produced by a different quantizer")
        return denoisers.z_posterior(z_pri, v_pri, meas, self.sigma2)

    def theta(self, v, v_x):
        return _theta(v, v_x, self.sigma2, self.spec)


@dataclass(frozen=True)
class GaussianChannel(OutputChannel):
    """Unquantized additive Gaussian noise."""

    sigma2: float

    def posterior(self, z_pri, v_pri, meas):
        return denoisers.z_posterior_gaussian(z_pri, v_pri, meas, self.sigma2)

    def theta(self, v, v_x):
        return _theta(v, v_x, self.sigma2, None)


def make_channel(spec: QuantizerSpec | None, sigma2: float) -> OutputChannel:
    if spec is None:
        return GaussianChannel(sigma2)
    return QuantizedGaussianChannel(spec, sigma2)
