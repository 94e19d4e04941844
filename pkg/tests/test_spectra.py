import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlosim.analysis.spectra import PhaseTrace, Psd, log_slope_db_per_decade, welch_psd
from rlosim.analysis.variance import from_db, to_db


def test_white_noise_parseval():
    rng = np.random.default_rng(0)
    x = 0.3 * rng.standard_normal(1 << 20)
    psd = welch_psd(PhaseTrace(x, 1e6))
    assert psd.integral() == pytest.approx(0.09, rel=0.03)
    flat = psd.density[10:-10]
    assert np.std(flat) / np.mean(flat) < 0.1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), var=st.floats(1e-6, 1e3),
       segment=st.sampled_from([256, 1024, 4096]), overlap=st.sampled_from([0.0, 0.25, 0.5, 0.75]))
def test_parseval_property(seed, var, segment, overlap):
    x = math.sqrt(var) * np.random.default_rng(seed).standard_normal(1 << 17)
    psd = welch_psd(x, segment, overlap, sample_rate=2e5)
    assert psd.integral() == pytest.approx(np.var(x), rel=0.03)


def test_sinusoid_line():
    fs, f0, a = 1e6, 12_500.0, 0.2
    t = np.arange(1 << 19) / fs
    psd = welch_psd(a * np.sin(2 * math.pi * f0 * t), sample_rate=fs)
    assert psd.frequency[np.argmax(psd.density)] == pytest.approx(f0, abs=psd.resolution)
    assert psd.integral(f0 - 5 * psd.resolution, f0 + 5 * psd.resolution) == pytest.approx(a * a / 2, rel=0.05)


def test_random_walk_slope():
    rng = np.random.default_rng(3)
    x = np.cumsum(rng.standard_normal(1 << 20))
    psd = welch_psd(PhaseTrace(x, 1e6), segment_length=1 << 14)
    assert log_slope_db_per_decade(psd, 1e3, 1e5) == pytest.approx(-20.0, abs=1.0)


def test_mean_removed():
    x = 5.0 + np.random.default_rng(1).standard_normal(1 << 15)
    psd = welch_psd(x, 1024, sample_rate=1.0)
    assert psd.density[0] < 10 * np.median(psd.density)


def test_degenerate_inputs():
    with pytest.raises(ValueError):
        welch_psd(np.zeros(100), 1024, sample_rate=1.0)
    with pytest.raises(ValueError):
        welch_psd(np.zeros(4096), 1024, 1.0, sample_rate=1.0)
    with pytest.raises(ValueError):
        welch_psd(np.zeros(4096), 1024)
    with pytest.raises(ValueError):
        PhaseTrace(np.array([0.0, np.nan]), 1.0)
    with pytest.raises(ValueError):
        PhaseTrace(np.zeros(4), 1.0, source="guess")
    with pytest.raises(ValueError):
        log_slope_db_per_decade(Psd(np.arange(4.0), np.ones(4)), 10, 20)


@given(st.floats(1e-30, 1e30))
def test_db_round_trip(v):
    assert from_db(to_db(v)) == pytest.approx(v, rel=1e-12)
