import math

import numpy as np
import pytest

from rlosim.analysis.trends import phase_noise_vs_distance

LENGTHS = [0.01, 1.0, 5.0, 10.0, 40.0]


def test_constant_sigma_zero_slope():
    fit = phase_noise_vs_distance(LENGTHS, [0.05] * 5)
    assert fit.slope == 0.0 and fit.intercept == pytest.approx(0.05)


def test_exact_line():
    sig = [1e-3 * (50 + 1.7 * x) for x in LENGTHS]
    fit = phase_noise_vs_distance(LENGTHS, sig)
    assert fit.slope_mrad_per_km == pytest.approx(1.7, rel=1e-12)
    assert fit.slope_stderr < 1e-12
    assert fit.to_dict()["slope_mrad_per_km"] == pytest.approx(1.7, rel=1e-12)


def test_two_points_no_stderr():
    fit = phase_noise_vs_distance([0.0, 10.0], [0.05, 0.06])
    assert fit.slope == pytest.approx(1e-3) and math.isnan(fit.slope_stderr)


def test_needs_distinct_lengths():
    with pytest.raises(ValueError):
        phase_noise_vs_distance([1.0, 1.0], [0.1, 0.2])
    with pytest.raises(ValueError):
        phase_noise_vs_distance([1.0, 2.0], [0.1])


def test_simulated_trend(length_runs):
    sig = [length_runs[x]["sigma_closed"] for x in LENGTHS]
    fit = phase_noise_vs_distance(LENGTHS, sig)
    assert fit.slope > 0
    assert sig[-1] > sig[0]
