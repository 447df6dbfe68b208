"""Unitary radix-2 DFT used as the row-orthogonal sensing operator."""

from __future__ import annotations

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class DftPlan:
    """Precomputed radix-2 plan for the unitary DFT of size ``n``.

    ``forward`` applies F with entries exp(-2j*pi*m*k/n)/sqrt(n) and
    ``adjoint`` its conjugate transpose. Both act on the last axis, so a
    stack of vectors can be transformed in one call. Plans are immutable.
    """

    __slots__ = ("_n", "_perm", "_twiddles", "_scale")

    def __init__(self, n: int):
        n = int(n)
        if not is_power_of_two(n):
            raise ValueError(f"DFT size must be a power of two, got {n}")
        self._n = n
        self._perm = _bit_reversal(n)
        self._perm.setflags(write=False)
        # Twiddles come straight from exp() of exact angles, not a recurrence,
        # so round-off does not accumulate over stages.
        stages = []
        m = 2
        while m <= n:
            w = np.exp(-2j * np.pi * np.arange(m // 2) / m)
            w.setflags(write=False)
            stages.append(w)
            m *= 2
        self._twiddles = tuple(stages)
        self._scale = 1.0 / np.sqrt(n)

    @property
    def n(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"DftPlan(n={self._n})"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.ndim == 0 or x.shape[-1] != self._n:
            raise ValueError(
                f"expected last dimension {self._n}, got shape {np.shape(x)}"
            )
        return x

    def _fft(self, x: np.ndarray) -> np.ndarray:
        lead = x.shape[:-1]
        y = x[..., self._perm]
        for w in self._twiddles:
            half = w.shape[0]
            y = y.reshape(*lead, -1, 2 * half)
            even = y[..., :half]
            odd = y[..., half:] * w
            y = np.concatenate((even + odd, even - odd), axis=-1)
        return y.reshape(*lead, self._n)

    def forward(self, x) -> np.ndarray:
        x = self._check(x)
        return self._fft(x) * self._scale

    def adjoint(self, z) -> np.ndarray:
        z = self._check(z)
        return np.conj(self._fft(np.conj(z))) * self._scale


def dft_forward(x, plan: DftPlan) -> np.ndarray:
    return plan.forward(x)


def dft_adjoint(z, plan: DftPlan) -> np.ndarray:
    return plan.adjoint(z)


def dft_matrix(n: int) -> np.ndarray:
    """Dense unitary DFT matrix, O(n^2); reference use only."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)
