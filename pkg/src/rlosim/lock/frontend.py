"""Analog down-mixer, anti-alias low-pass and ADC ahead of the controller."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .fixedpoint import adc_quantize

TWO_PI = 2.0 * math.pi


def mixer_lowpass_sos(cutoff_hz: float, sample_rate: float, order: int = 4) -> np.ndarray:
    """Butterworth section coefficients for the post-mixer low-pass."""
    return signal.butter(order, cutoff_hz, fs=sample_rate, output="sos")


def carrier_phase(index, f_p: float, sample_rate: float):
    """Electrical LO phase ``2 pi f_p n / fs`` reduced modulo one turn.

    When ``f_p / fs`` is a ratio of small integers the index is reduced
    exactly by the carrier period first, so the phase stays exact for any
    sample index.
    """
    ratio = Fraction(f_p / sample_rate).limit_denominator(1 << 20)
    index = np.asarray(index)
    if float(ratio) == f_p / sample_rate and np.issubdtype(index.dtype, np.integer):
        frac = np.mod(index, ratio.denominator) * ratio.numerator % ratio.denominator
        return TWO_PI * frac / ratio.denominator
    return TWO_PI * np.mod(index.astype(np.float64) * (f_p / sample_rate), 1.0)


@dataclass(frozen=True)
class IqSamples:
    """Decimated, ADC-quantized down-mixer output.

    ``i`` ~ cos(psi - phi_set), ``q`` ~ sin(psi - phi_set) for a homodyne
    beat ``cos(Omega_p t + psi)``; codes are signed integers.
    """

    i: np.ndarray
    q: np.ndarray
    sample_index: np.ndarray
    sample_period: float


class DownMixer:
    """Multiply by ``A_r cos(Omega_p t + phi_set)`` and ``-A_r sin(...)``, low-pass, decimate.

    Filter state is kept between :meth:`process` calls so a trace can be fed in
    blocks.  Output is taken every ``decimation``-th input sample, at the last
    sample of each block of ``decimation``.
    """

    def __init__(self, sample_rate: float = 200e6, f_p: float = 40e6, phi_set: float = 0.0,
                 amplitude: float = 1.0, cutoff_hz: float = 5e6, order: int = 4,
                 decimation: int = 20, adc_bits: int = 14, adc_full_scale: float | None = 0.25):
        if sample_rate < 4 * f_p:
            raise ValueError(
                f"input rate {sample_rate:g} Hz below 4 x pilot offset ({4 * f_p:g} Hz)")
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        self.sample_rate = sample_rate
        self.f_p = f_p
        self.phi_set = phi_set
        self.amplitude = amplitude
        self.decimation = decimation
        self.adc_bits = adc_bits
        self.adc_full_scale = adc_full_scale
        self.sos = mixer_lowpass_sos(cutoff_hz, sample_rate, order)
        self._zi = np.zeros((2, self.sos.shape[0], 2))
        self._n = 0

    @property
    def adc_lsb(self) -> float:
        return 2.0 * self.adc_full_scale / (1 << self.adc_bits)

    def reset(self, i0: float = 0.0, q0: float = 0.0):
        """Start from the steady state of constant baseband inputs ``(i0, q0)``."""
        zi = signal.sosfilt_zi(self.sos)
        self._zi = np.stack([zi * i0, zi * q0])
        self._n = 0

    def mix(self, hd: np.ndarray, start: int = 0):
        phase = carrier_phase(np.arange(start, start + len(hd)), self.f_p, self.sample_rate) + self.phi_set
        return hd * (self.amplitude * np.cos(phase)), hd * (-self.amplitude * np.sin(phase))

    def analog(self, hd: np.ndarray):
        """Filtered (pre-ADC) baseband at the full input rate."""
        hd = np.asarray(hd, dtype=float)
        mi, mq = self.mix(hd, self._n)
        fi, self._zi[0] = signal.sosfilt(self.sos, mi, zi=self._zi[0])
        fq, self._zi[1] = signal.sosfilt(self.sos, mq, zi=self._zi[1])
        self._n += len(hd)
        return fi, fq

    def process(self, hd: np.ndarray) -> IqSamples:
        first = self._n
        fi, fq = self.analog(hd)
        offset = (self.decimation - 1 - first) % self.decimation
        take = np.arange(offset, len(fi), self.decimation)
        i_dec, q_dec = fi[take], fq[take]
        if self.adc_full_scale is None:
            i_out, q_out = i_dec, q_dec
        else:
            lsb = self.adc_lsb
            i_out = np.array([adc_quantize(v, lsb, self.adc_bits) for v in i_dec], dtype=np.int64)
            q_out = np.array([adc_quantize(v, lsb, self.adc_bits) for v in q_dec], dtype=np.int64)
        index = (first + take) // self.decimation
        return IqSamples(i_out, q_out, index, self.decimation / self.sample_rate)


def downmix(hd_samples, f_p: float, phi_set: float, amplitude: float = 1.0,
            sample_rate: float = 200e6, decimation: int = 20, cutoff_hz: float = 5e6,
            adc_bits: int = 14, adc_full_scale: float | None = None) -> IqSamples:
    """One-shot down-mix of a homodyne voltage stream.

    With ``adc_full_scale=None`` the decimated analog values are returned
    unquantized.
    """
    mixer = DownMixer(sample_rate, f_p, phi_set, amplitude, cutoff_hz, decimation=decimation,
                      adc_bits=adc_bits, adc_full_scale=adc_full_scale)
    return mixer.process(np.asarray(hd_samples, dtype=float))
