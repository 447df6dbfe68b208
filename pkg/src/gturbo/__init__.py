"""Generalized turbo signal recovery from quantized partial-DFT measurements."""

from .channels import GaussianChannel, OutputChannel, QuantizedGaussianChannel, make_channel
from .denoisers import (psi, psi_prime, x_posterior, x_posterior_scalar, z_posterior,
                        z_posterior_scalar)
from .model import (BgPrior, Measurements, NoiseModel, QuantizerSpec, SelectionMask,
                    forward_measure, quantize, sample_signal, thresholds)
from .recovery import (GaussianMessage, RecoveryOptions, RecoveryResult, StopReason,
                       extrinsic, mse, run)
from .state_evolution import (QuadratureRule, SeDivergence, SeState, mmse_bg, se_step,
                              se_trajectory, theta)
from .transform import DftPlan, dft_adjoint, dft_forward

__version__ = "0.1.0"
