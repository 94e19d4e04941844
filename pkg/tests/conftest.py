import numpy as np
import pytest

from rlosim.harness.config import load
from rlosim.lock.loop import run_closed_loop

LENGTHS_KM = (0.01, 1.0, 5.0, 10.0, 40.0)


@pytest.fixture(scope="session")
def baseline():
    return load("baseline_10m.json")


@pytest.fixture(scope="session")
def baseline_run(baseline, tmp_path_factory):
    from rlosim.harness.experiment import run_experiment
    out = tmp_path_factory.mktemp("baseline_run")
    return run_experiment(baseline, out), out


@pytest.fixture(scope="session")
def length_runs(baseline):
    """Paired closed/open-loop runs (same seed) for every default length."""
    settle = baseline.analysis.settle_time_s
    runs = {}
    for length in LENGTHS_KM:
        sc = baseline.replace(fiber={"length_km": length})
        closed = run_closed_loop(sc, record_hd=False, calibration=False)
        opened = run_closed_loop(sc, record_hd=False, calibration=False, enabled=False)
        start = closed.analysis_start(settle)
        runs[length] = {
            "closed": closed, "open": opened, "start": start,
            "sigma_closed": closed.residual_sigma(start) if start >= 0 else np.inf,
            "sigma_open": float(np.std(opened.theta[max(start, 0):])),
        }
    return runs
