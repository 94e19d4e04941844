"""Model-based PI gain selection and fiber-drift calibration.

The loop is modelled in continuous time around the locked point with the
phase detector linearized (``q`` ~ error in rad), the controller period as a
pure delay of 1.5 samples, and the actuator, DAC and filter poles taken from
the configuration.  The three paths act in parallel on the same phase, so the
open-loop gain is the sum

    L = C_fast * LPF39 * DAC * EOM  +  (C_med + C_slow e^{-s d}) * PZT / s

Gains follow three rules:

* fast path: integral gain sets the crossover ``fast_crossover_hz``; the
  proportional term places the PI zero at ``fast_lead_ratio`` times above it
  for phase lead,
* medium path: the PZT path matches the fast path in magnitude at
  ``split_hz`` (below it the PZT carries the correction, above it the EOM),
  zero a factor four below the split,
* slow path: unity crossover ``slow_crossover_hz`` on its own (the
  frequency-lock loop), zero a factor four below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LoopTargets:
    fast_crossover_hz: float = 47.7e3
    fast_lead_ratio: float = 2.0
    split_hz: float = 1e3
    slow_crossover_hz: float = 200.0
    zero_ratio: float = 4.0


def _first_order(s, cutoff_hz):
    return 1.0 / (1.0 + s / (TWO_PI * cutoff_hz))


def path_responses(freq_hz, gains: dict, controller, sample_period: float = 100e-9) -> dict:
    """Complex open-loop responses of the three paths at ``freq_hz``.

    ``controller`` is a :class:`~rlosim.scenario.ControllerConfig`.
    """
    f = np.asarray(freq_hz, dtype=float)
    s = 1j * TWO_PI * f
    ts = sample_period
    delay = np.exp(-s * 1.5 * ts)
    fast = ((gains["fast_kp"] + gains["fast_ki"] / s) * _first_order(s, controller.fast_filter_hz)
            * _first_order(s, controller.dac_filter_hz) * _first_order(s, controller.eom_bandwidth_hz)
            * delay)
    pzt = _first_order(s, controller.pzt_bandwidth_hz) / s
    med = (gains["medium_kp"] + gains["medium_ki"] / s) * pzt * delay
    slow = ((gains["slow_kp"] + gains["slow_ki"] / s) * pzt * delay
            * np.exp(-s * controller.latency_samples * ts))
    return {"fast": fast, "medium": med, "slow": slow, "total": fast + med + slow}


def stability_margins(freq_hz, response) -> tuple[float, float]:
    """Unity-gain crossover (Hz, highest) and phase margin (deg) of ``response``."""
    f = np.asarray(freq_hz, dtype=float)
    mag = np.abs(response)
    above = mag >= 1.0
    idx = np.nonzero(above[:-1] & ~above[1:])[0]
    if idx.size == 0:
        raise ValueError("no unity-gain crossover in the frequency grid")
    k = idx[-1]
    # log interpolation between the bracketing points
    w = math.log(mag[k]) / (math.log(mag[k]) - math.log(mag[k + 1]))
    fc = math.exp(math.log(f[k]) + w * (math.log(f[k + 1]) - math.log(f[k])))
    phase = np.unwrap(np.angle(response))
    ph = phase[k] + w * (phase[k + 1] - phase[k])
    pm = 180.0 + math.degrees(ph)
    pm = (pm + 180.0) % 360.0 - 180.0
    return fc, pm


def tune_gains(controller, targets: LoopTargets = LoopTargets(),
               sample_period: float = 100e-9) -> dict:
    """PI gains for all three paths from the loop model; values rounded to 3 significant digits."""
    ks = {"fast_ki": TWO_PI * targets.fast_crossover_hz}
    ks["fast_kp"] = ks["fast_ki"] / (TWO_PI * targets.fast_crossover_hz * targets.fast_lead_ratio)
    probe = dict(ks, medium_kp=1.0, medium_ki=TWO_PI * targets.split_hz / targets.zero_ratio,
                 slow_kp=0.0, slow_ki=0.0)
    r = path_responses(targets.split_hz, probe, controller, sample_period)
    ks["medium_kp"] = float(abs(r["fast"]) / abs(r["medium"]))
    ks["medium_ki"] = ks["medium_kp"] * TWO_PI * targets.split_hz / targets.zero_ratio
    probe = dict(ks, slow_kp=1.0, slow_ki=TWO_PI * targets.slow_crossover_hz / targets.zero_ratio)
    r = path_responses(targets.slow_crossover_hz, probe, controller, sample_period)
    ks["slow_kp"] = float(1.0 / abs(r["slow"]))
    ks["slow_ki"] = ks["slow_kp"] * TWO_PI * targets.slow_crossover_hz / targets.zero_ratio
    return {k: float(f"{v:.3g}") for k, v in ks.items()}


def loop_summary(controller, gains: dict | None = None) -> dict:
    """Crossovers and phase margins of the full (FullLock) and slow-only loops."""
    if gains is None:
        gains = {k: getattr(controller, k) for k in
                 ("fast_kp", "fast_ki", "medium_kp", "medium_ki", "slow_kp", "slow_ki")}
    f = np.logspace(0, 7, 20000)
    r = path_responses(f, gains, controller)
    fc, pm = stability_margins(f, r["total"])
    fs, pms = stability_margins(f, r["slow"])
    return {"crossover_hz": fc, "phase_margin_deg": pm,
            "slow_crossover_hz": fs, "slow_phase_margin_deg": pms}


def residual_sigma_model(controller, diffusion: float, gains: dict | None = None) -> float:
    """Linear-model residual phase std (rad) for white frequency noise of strength ``diffusion``.

    The disturbance PSD is ``diffusion / (2 pi^2 f^2)`` (one-sided) and is
    shaped by ``|1 / (1 + L)|^2``.
    """
    if gains is None:
        gains = {k: getattr(controller, k) for k in
                 ("fast_kp", "fast_ki", "medium_kp", "medium_ki", "slow_kp", "slow_ki")}
    f = np.logspace(-1, 6.7, 40000)
    r = path_responses(f, gains, controller)["total"]
    psd = diffusion / (2 * math.pi ** 2 * f ** 2) / np.abs(1 + r) ** 2
    return float(math.sqrt(np.trapezoid(psd, f)))


def calibrate_fiber_drift(scenario, target_slope_mrad_per_km: float = 1.7,
                          lengths=(0.01, 1.0, 5.0, 10.0, 40.0), seeds=(1, 2, 3),
                          bracket=(10.0, 100.0), iterations: int = 8, run=None) -> float:
    """Drift coefficient (rad^2/(s km)) giving the target sigma-vs-length slope.

    Bisection on the simulated closed-loop slope; the slope grows
    monotonically with the coefficient.
    """
    from ..analysis.trends import phase_noise_vs_distance
    from .loop import run_closed_loop
    run = run_closed_loop if run is None else run
    settle = scenario.analysis.settle_time_s

    def slope(c):
        sig = []
        for length in lengths:
            vals = []
            for seed in seeds:
                sc = scenario.replace(fiber={"length_km": length, "phase_drift_rad2_per_s_km": c},
                                      seed=seed)
                tr = run(sc, record_hd=False, calibration=False)
                vals.append(tr.residual_sigma(tr.analysis_start(settle)))
            sig.append(np.mean(vals))
        return phase_noise_vs_distance(lengths, sig).slope_mrad_per_km

    lo, hi = bracket
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if slope(mid) < target_slope_mrad_per_km:
            lo = mid
        else:
            hi = mid
    return float(math.sqrt(lo * hi))
