"""Shot-noise-normalized quadrature variance from homodyne traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import welch_psd


class CalibrationError(ValueError):
    """Vacuum reference unusable (at or below the electronic-noise floor)."""


def to_db(linear):
    return 10.0 * np.log10(linear)


def from_db(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class VarianceEstimate:
    linear: float
    uncertainty: float
    band: tuple

    @property
    def db(self) -> float:
        return float(to_db(self.linear))

    @property
    def db_uncertainty(self) -> float:
        return float(10.0 / math.log(10.0) * self.uncertainty / self.linear)


def band_power(x, sample_rate: float, band: tuple, segment_length: int = 1 << 14,
               overlap: float = 0.5) -> float:
    """Power of ``x`` inside ``band`` (Hz) from its Welch PSD."""
    psd = welch_psd(x, segment_length, overlap, sample_rate)
    return psd.integral(*band)


def quadrature_variance(hd_trace, vacuum_trace, band: tuple = (7.2e6, 17.2e6),
                        sample_rate: float = 200e6, dark_trace=None,
                        segment_length: int = 1 << 14, overlap: float = 0.5) -> VarianceEstimate:
    """Band-limited variance of ``hd_trace`` relative to the vacuum reference.

    With a ``dark_trace`` its band power is subtracted from both before the
    ratio, removing the electronic-noise bias.  The uncertainty combines the
    ``1/sqrt(B T)`` relative error of both band powers.

    Raises :class:`CalibrationError` if the vacuum band power does not exceed
    the dark floor.
    """
    lo, hi = band
    if not 0 <= lo < hi <= sample_rate / 2:
        raise ValueError("band must satisfy 0 <= low < high <= Nyquist")
    hd = np.asarray(hd_trace, dtype=float)
    vac = np.asarray(vacuum_trace, dtype=float)
    p_hd = band_power(hd, sample_rate, band, segment_length, overlap)
    p_vac = band_power(vac, sample_rate, band, segment_length, overlap)
    p_dark = 0.0
    if dark_trace is not None:
        p_dark = band_power(np.asarray(dark_trace, dtype=float), sample_rate, band,
                            segment_length, overlap)
    if not p_vac > p_dark:
        raise CalibrationError(
            f"vacuum band power {p_vac:.3e} not above the electronic floor {p_dark:.3e}")
    ratio = (p_hd - p_dark) / (p_vac - p_dark)
    width = hi - lo
    rel_hd = 1.0 / math.sqrt(width * hd.shape[0] / sample_rate)
    rel_vac = 1.0 / math.sqrt(width * vac.shape[0] / sample_rate)
    sig_hd = rel_hd * p_hd / (p_vac - p_dark)
    sig_vac = rel_vac * p_vac * abs(ratio) / (p_vac - p_dark)
    return VarianceEstimate(float(ratio), float(math.hypot(sig_hd, sig_vac)), (lo, hi))
