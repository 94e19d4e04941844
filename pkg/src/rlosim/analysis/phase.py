"""Residual phase recovery from the pilot tone in a homodyne trace."""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from .spectra import PhaseTrace


class InsufficientPilotError(ValueError):
    """The pilot tone is too weak for a phase estimate."""


def pilot_snr_db(z: np.ndarray) -> float:
    """Carrier-to-noise ratio of a complex baseband pilot.

    Amplitude fluctuations carry half the additive noise power, so the
    ratio is ``mean|z|^2 / (2 var|z|)``.
    """
    mag = np.abs(z)
    var = float(np.var(mag))
    power = float(np.mean(mag * mag))
    if var <= 64 * np.finfo(float).eps ** 2 * power:
        return math.inf
    return 10.0 * math.log10(power / (2.0 * var))


def demodulate_pilot(x, f_p: float, sample_rate: float, lowpass_hz: float = 2e6,
                     decimation: int = 10) -> np.ndarray:
    """Complex baseband of the tone at ``f_p``: mix down, zero-phase low-pass, decimate."""
    x = np.asarray(x, dtype=float)
    n = np.arange(x.shape[0])
    carrier = 2.0 * math.pi * np.mod(n * (f_p / sample_rate), 1.0)
    z = x * np.exp(-1j * carrier)
    sos = signal.butter(4, lowpass_hz, fs=sample_rate, output="sos")
    z = signal.sosfiltfilt(sos, z.real) + 1j * signal.sosfiltfilt(sos, z.imag)
    return z[::decimation]


def estimate_phase(pilot_trace, f_p: float, sample_rate: float, lowpass_hz: float = 2e6,
                   decimation: int = 10, snr_floor_db: float = 10.0, detrend: bool = True,
                   edge: int = 64) -> PhaseTrace:
    """Residual phase of the pilot relative to the electrical reference.

    IQ demodulation at ``f_p``, fourth-order zero-phase low-pass, ``atan2`` and
    unwrap.  With ``detrend`` the mean and the best-fit linear ramp are
    removed.  ``edge`` decimated samples are dropped at both ends to discard
    filter transients.

    Raises :class:`InsufficientPilotError` when the pilot SNR is below
    ``snr_floor_db``.
    """
    x = np.asarray(pilot_trace, dtype=float)
    if not sample_rate > 2 * f_p:
        raise ValueError("sample_rate must exceed twice the pilot frequency")
    if x.shape[0] < 10_000:
        raise ValueError("pilot trace must contain at least 1e4 samples")
    if not 0 < lowpass_hz < sample_rate / 2:
        raise ValueError("lowpass_hz must lie in (0, Nyquist)")
    z = demodulate_pilot(x, f_p, sample_rate, lowpass_hz, decimation)
    if edge > 0 and z.shape[0] > 4 * edge:
        z = z[edge:-edge]
    snr = pilot_snr_db(z)
    if snr < snr_floor_db:
        raise InsufficientPilotError(
            f"insufficient pilot power: SNR {snr:.1f} dB below the {snr_floor_db:.1f} dB floor")
    phase = np.unwrap(np.angle(z))
    if detrend:
        t = np.arange(phase.shape[0], dtype=float)
        slope, intercept = np.polyfit(t, phase, 1)
        phase = phase - (slope * t + intercept)
    return PhaseTrace(phase, sample_rate / decimation, "pilot-demodulated")


def controller_phase(unwrapped_words, lsb: float, sample_rate: float,
                     setpoint: float = 0.0) -> PhaseTrace:
    """Controller-internal unwrapped phase estimate in radians."""
    phase = np.asarray(unwrapped_words, dtype=float) * lsb - setpoint
    return PhaseTrace(phase, sample_rate, "controller-internal")
