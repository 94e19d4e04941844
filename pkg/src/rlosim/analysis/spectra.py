"""Phase traces and Welch power spectral densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

SOURCES = ("pilot-demodulated", "controller-internal", "synthetic")


@dataclass(frozen=True)
class PhaseTrace:
    samples: np.ndarray
    sample_rate: float
    source: str = "synthetic"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("phase samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("phase samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def std(self) -> float:
        return float(np.std(self.samples))

    def centered(self) -> np.ndarray:
        return self.samples - self.samples.mean()


@dataclass(frozen=True)
class Psd:
    """One-sided density (units^2/Hz) on a uniform frequency grid."""

    frequency: np.ndarray
    density: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.frequency[1] - self.frequency[0])

    def integral(self, f_low: float = 0.0, f_high: float = np.inf) -> float:
        """Power in ``[f_low, f_high]`` as a bin sum (exact inverse of the density scaling)."""
        sel = (self.frequency >= f_low) & (self.frequency <= f_high)
        return float(np.sum(self.density[sel]) * self.resolution)


def welch_psd(trace, segment_length: int = 1 << 14, overlap: float = 0.5,
              sample_rate: float | None = None, window: str = "hann") -> Psd:
    """Averaged-periodogram PSD with a Hann window, mean removed per segment.

    ``trace`` is a :class:`PhaseTrace` or a plain array together with
    ``sample_rate``.  The density scaling makes the integral over frequency
    equal the time-domain variance.
    """
    if isinstance(trace, PhaseTrace):
        x = trace.samples
        fs = trace.sample_rate if sample_rate is None else sample_rate
    else:
        x = np.asarray(trace, dtype=float)
        fs = sample_rate
    if fs is None or not fs > 0:
        raise ValueError("sample_rate must be given and > 0")
    segment_length = int(segment_length)
    if segment_length < 2:
        raise ValueError("segment_length must be >= 2")
    if segment_length > x.shape[0]:
        raise ValueError(f"segment_length {segment_length} exceeds trace length {x.shape[0]}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    noverlap = int(round(segment_length * overlap))
    if noverlap >= segment_length:
        raise ValueError("degenerate segmentation: overlap leaves no hop")
    f, p = signal.welch(x, fs=fs, window=window, nperseg=segment_length, noverlap=noverlap,
                        detrend="constant", scaling="density", return_onesided=True)
    return Psd(f, p)


def log_slope_db_per_decade(psd: Psd, f_low: float, f_high: float) -> float:
    """Least-squares slope of ``10 log10(PSD)`` against ``log10(f)`` over a band."""
    sel = (psd.frequency >= f_low) & (psd.frequency <= f_high) & (psd.density > 0)
    if np.count_nonzero(sel) < 3:
        raise ValueError("band contains fewer than three PSD bins")
    slope, _ = np.polyfit(np.log10(psd.frequency[sel]), 10 * np.log10(psd.density[sel]), 1)
    return float(slope)
