import math

import numpy as np
import pytest

from rlosim.lock.tuning import (LoopTargets, loop_summary, path_responses, residual_sigma_model,
                                stability_margins, tune_gains)
from rlosim.scenario import ControllerConfig

GAIN_NAMES = ("slow_kp", "slow_ki", "medium_kp", "medium_ki", "fast_kp", "fast_ki")


def test_tuning_reproduces_default_gains():
    c = ControllerConfig()
    assert tune_gains(c) == {k: getattr(c, k) for k in GAIN_NAMES}


def test_default_loop_margins():
    s = loop_summary(ControllerConfig())
    assert 30e3 < s["crossover_hz"] < 50e3
    assert s["phase_margin_deg"] > 45
    assert s["slow_crossover_hz"] == pytest.approx(200, rel=0.05)
    assert s["slow_phase_margin_deg"] > 45


def test_fast_path_crossover_tracks_target():
    # the 39 kHz path filter pulls the crossover below higher targets
    c = ControllerConfig()
    f = np.logspace(2, 6, 4000)
    found = []
    for target in (10e3, 20e3, 47.7e3):
        g = tune_gains(c, LoopTargets(fast_crossover_hz=target))
        fc, pm = stability_margins(f, path_responses(f, g, c)["fast"])
        assert fc == pytest.approx(target, rel=0.25) and pm > 45
        found.append(fc)
    assert found == sorted(found)


def test_medium_matches_fast_at_split():
    c = ControllerConfig()
    g = tune_gains(c)
    r = path_responses(1e3, g, c)
    assert abs(r["medium"]) == pytest.approx(abs(r["fast"]), rel=2e-3)


def test_margins_on_integrator():
    f = np.logspace(0, 4, 2000)
    fc, pm = stability_margins(f, 2 * math.pi * 100 / (1j * 2 * math.pi * f))
    assert fc == pytest.approx(100, rel=1e-3) and pm == pytest.approx(90, abs=0.1)
    with pytest.raises(ValueError):
        stability_margins(f, np.full(f.shape, 0.1 + 0j))


def test_model_sigma_consistent_with_simulation(length_runs):
    # white frequency noise of two 100 Hz lasers plus the 10 m fiber
    d = 2 * 2 * math.pi * 100 + 45.5 * 0.01
    model = residual_sigma_model(ControllerConfig(), d)
    assert model == pytest.approx(length_runs[0.01]["sigma_closed"], rel=0.1)
