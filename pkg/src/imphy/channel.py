"""Rayleigh channel draws, AWGN and SNR bookkeeping.

All randomness comes from a caller-supplied ``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    s = np.sqrt(var / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True, eq=False)
class FlatChannel:
    H: np.ndarray  # (..., n_R, n_T)

    @property
    def n_r(self) -> int:
        return self.H.shape[-2]

    @property
    def n_t(self) -> int:
        return self.H.shape[-1]


@dataclass(frozen=True, eq=False)
class SelectiveChannel:
    taps: np.ndarray  # (..., n_R, n_T, L)

    @property
    def n_r(self) -> int:
        return self.taps.shape[-3]

    @property
    def n_t(self) -> int:
        return self.taps.shape[-2]

    @property
    def L(self) -> int:
        return self.taps.shape[-1]

    def frequency_response(self, n_fft: int) -> np.ndarray:
        """(..., n_fft, n_R, n_T) per-subcarrier gains for a unitary OFDM chain."""
        if n_fft < self.L:
            raise UsageError(f"FFT size {n_fft} shorter than channel length {self.L}")
        Hf = np.fft.fft(self.taps, n=n_fft, axis=-1)
        return np.moveaxis(Hf, -1, -3)


@dataclass(frozen=True)
class NoiseSpec:
    """Es/N0 per receive antenna; ``bpcu`` converts it to Eb/N0."""
    snr_db: float
    bpcu: float = 1.0

    @property
    def N0(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def ebn0_db(self) -> float:
        return self.snr_db - 10.0 * np.log10(self.bpcu)


def draw_flat(n_r: int, n_t: int, rng: np.random.Generator, size=()) -> FlatChannel:
    if n_r < 1 or n_t < 1:
        raise UsageError("channel dimensions must be >= 1")
    size = tuple(np.atleast_1d(size)) if size != () else ()
    return FlatChannel(crandn(rng, size + (n_r, n_t)))


def draw_selective(n_r: int, n_t: int, L: int, rng: np.random.Generator, size=()) -> SelectiveChannel:
    """Uniform power delay profile: every tap is CN(0, 1/L)."""
    if L < 1:
        raise UsageError("tap count must be >= 1")
    if n_r < 1 or n_t < 1:
        raise UsageError("channel dimensions must be >= 1")
    size = tuple(np.atleast_1d(size)) if size != () else ()
    return SelectiveChannel(crandn(rng, size + (n_r, n_t, L), 1.0 / L))


def apply_flat(ch: FlatChannel, x: np.ndarray, N0: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != ch.n_t:
        raise UsageError(f"signal has {x.shape[-1]} streams, channel expects {ch.n_t}")
    y = np.einsum("...rt,...t->...r", ch.H, x)
    if N0 > 0:
        y = y + crandn(rng, y.shape, N0)
    return y


def apply_selective(ch: SelectiveChannel, x: np.ndarray, N0: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Linear convolution of each (rx, tx) pair; ``x`` is (..., n_T, T) time samples.

    The output keeps the first T samples, which is all an OFDM receiver reads
    once the cyclic prefix covers the channel memory.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape[-2] != ch.n_t:
        raise UsageError(f"signal has {x.shape[-2]} streams, channel expects {ch.n_t}")
    T = x.shape[-1]
    n = T + ch.L - 1
    nfft = 1 << (n - 1).bit_length()
    X = np.fft.fft(x, nfft, axis=-1)
    Hf = np.fft.fft(ch.taps, nfft, axis=-1)
    Y = np.einsum("...rtf,...tf->...rf", Hf, X)
    y = np.fft.ifft(Y, axis=-1)[..., :T]
    if N0 > 0:
        y = y + crandn(rng, y.shape, N0)
    return y


def apply(ch, x, noise: NoiseSpec | float, rng: np.random.Generator) -> np.ndarray:
    N0 = noise.N0 if isinstance(noise, NoiseSpec) else float(noise)
    if isinstance(ch, FlatChannel):
        return apply_flat(ch, x, N0, rng)
    if isinstance(ch, SelectiveChannel):
        return apply_selective(ch, x, N0, rng)
    raise UsageError(f"unknown channel type {type(ch).__name__}")
