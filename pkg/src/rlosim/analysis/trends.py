"""Linear trend of residual phase noise against fiber length."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrendFit:
    """``sigma = intercept + slope * length``; rad and rad/km."""

    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    n_points: int

    @property
    def slope_mrad_per_km(self) -> float:
        return 1e3 * self.slope

    def to_dict(self) -> dict:
        return {"slope_rad_per_km": self.slope, "intercept_rad": self.intercept,
                "slope_stderr_rad_per_km": self.slope_stderr,
                "intercept_stderr_rad": self.intercept_stderr,
                "slope_mrad_per_km": self.slope_mrad_per_km, "n_points": self.n_points}


def phase_noise_vs_distance(lengths_km, sigmas_rad) -> TrendFit:
    """Ordinary least-squares line through ``(length, sigma)``."""
    x = np.asarray(lengths_km, dtype=float)
    y = np.asarray(sigmas_rad, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("lengths and sigmas must be 1-D arrays of equal length")
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct fiber lengths")
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if n > 2:
        s2 = float(np.sum((y - intercept - slope * x) ** 2) / (n - 2))
        slope_se = math.sqrt(s2 / sxx)
        intercept_se = math.sqrt(s2 * (1.0 / n + xm * xm / sxx))
    else:
        slope_se = intercept_se = math.nan
    return TrendFit(slope, intercept, slope_se, intercept_se, n)
