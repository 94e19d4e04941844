"""Experiment drivers: single run, parameter sweep, comparison and calibration.

A run performs three simulations from the scenario seed:

* the squeezed acquisition at ``receiver.phase_set_rad`` (with the vacuum and
  dark calibration traces),
* its open-loop companion (controller disabled, same noise realization),
* the anti-squeezed acquisition at ``phase_set_rad + pi/2`` (child seed).

Output layout under the run directory: ``traces/``, ``analysis/`` (with
``summary.json``) and ``plots/``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analysis.fitting import (FitError, FixedParameters, VariancePoint, efficiency_from_sum_rule,
                                fit_squeezing_model, invert_single_point, model_variances)
from ..analysis.phase import InsufficientPilotError, estimate_phase
from ..analysis.spectra import PhaseTrace, welch_psd
from ..analysis.trends import phase_noise_vs_distance
from ..analysis.variance import CalibrationError, quadrature_variance, to_db
from ..lock.control import LockState
from ..lock.loop import run_closed_loop
from ..optics import apply_phase_noise, opo_variances, overall_efficiency
from ..scenario import SCHEMA_VERSION, Scenario
from . import svgplot
from .traces import atomic_write_text, write_csv_series, write_trace

SUMMARY_NAME = "summary.json"

STATUS_OK = "ok"
STATUS_LOCK_FAILURE = "lock_failure"
STATUS_ANALYSIS_FAILURE = "analysis_failure"


class CompareError(ValueError):
    """Summaries cannot be compared (schema mismatch or unreadable)."""


@dataclass
class RunResult:
    summary: dict
    status: str
    traces: dict = field(default_factory=dict)


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _seeds(scenario: Scenario):
    root = np.random.SeedSequence(scenario.seed)
    sq, anti = root.spawn(2)
    return sq, anti


def acquisition_info(trace, settle_time: float) -> dict:
    start = trace.analysis_start(settle_time)
    info = dict(trace.diagnostics)
    info.update({
        "locked": bool(trace.locked),
        "analysis_start_tick": int(start),
        "analysis_window_s": (trace.n_ticks - start) * trace.sample_period if start >= 0 else 0.0,
        "states_visited": sorted({LockState(int(v)).label for v in np.unique(trace.fsm_state)}),
        "wrap_events": trace.wrap_events,
        "phi_set_rad": trace.phi_set,
        "eom_peak_rad": float(np.max(np.abs(trace.eom_phase[max(start, 0):]))),
    })
    if start >= 0:
        info["sigma_true_rad"] = trace.residual_sigma(start)
        ctrl = trace.unwrapped[start:] * trace.phase_lsb
        info["sigma_controller_rad"] = float(np.std(ctrl))
    return info


def simulate(scenario: Scenario, record_hd: bool = True):
    """The three acquisitions of a run: ``{"squeezed", "open_loop", "antisqueezed"}``."""
    sq_seed, anti_seed = _seeds(scenario)
    phi = scenario.receiver.phase_set_rad
    traces = {
        "squeezed": run_closed_loop(scenario, seed=sq_seed, phi_set=phi, record_hd=record_hd),
        "open_loop": run_closed_loop(scenario, seed=sq_seed, phi_set=phi, enabled=False,
                                     record_hd=False, calibration=False),
        "antisqueezed": run_closed_loop(scenario, seed=anti_seed, phi_set=phi + math.pi / 2,
                                        record_hd=record_hd, calibration=False),
    }
    return traces


def model_prediction(scenario: Scenario, sigma: float) -> dict:
    sq = scenario.squeezer.model()
    eta = overall_efficiency(sq, scenario.fiber.model(), scenario.receiver.model())
    vm0, vp0 = opo_variances(sq.with_efficiency(eta))
    vm, vp = apply_phase_noise(vm0, vp0, sigma)
    return {"overall_efficiency": eta, "fiber_transmission": scenario.fiber.model().transmission,
            "v_minus": vm, "v_plus": vp, "v_minus_db": float(to_db(vm)),
            "v_plus_db": float(to_db(vp)), "sigma_rad": sigma}


def analyze(scenario: Scenario, traces: dict) -> tuple[dict, str, str | None]:
    """Results dict, status and failure message."""
    a = scenario.analysis
    sq, ol, anti = traces["squeezed"], traces["open_loop"], traces["antisqueezed"]
    start_sq = sq.analysis_start(a.settle_time_s)
    start_as = anti.analysis_start(a.settle_time_s)
    results: dict = {}
    if start_sq < 0 or start_as < 0:
        failed = [n for n, s in (("squeezed", start_sq), ("antisqueezed", start_as)) if s < 0]
        return results, STATUS_LOCK_FAILURE, f"no FullLock analysis window for {', '.join(failed)}"

    sigma = sq.residual_sigma(start_sq)
    sigma_open = float(np.std(ol.theta[start_sq:]))
    results.update({
        "sigma_closed_rad": sigma,
        "sigma_antisqueezed_rad": anti.residual_sigma(start_as),
        "sigma_open_rad": sigma_open,
        "suppression_ratio": sigma_open / sigma if sigma > 0 else None,
        "cycle_slips": sq.cycle_slips + anti.cycle_slips,
    })
    pred = model_prediction(scenario, sigma)
    results["model"] = pred
    results["overall_efficiency"] = pred["overall_efficiency"]
    results["fiber_transmission"] = pred["fiber_transmission"]
    if scenario.noiseless:
        results["note"] = "noiseless run: no calibration traces, variances not measured"
        return results, STATUS_OK, None

    band = (a.band_low_hz, a.band_high_hz)
    fs = sq.sample_rate
    try:
        kw = dict(band=band, sample_rate=fs, dark_trace=sq.dark if a.subtract_dark else None,
                  segment_length=a.welch_segment, overlap=a.welch_overlap)
        vm = quadrature_variance(sq.hd_window(start_sq), sq.vacuum, **kw)
        vp = quadrature_variance(anti.hd_window(start_as), sq.vacuum, **kw)
        results.update({
            "v_minus": vm.linear, "v_minus_uncertainty": vm.uncertainty,
            "v_minus_db": vm.db, "v_minus_db_uncertainty": vm.db_uncertainty,
            "v_plus": vp.linear, "v_plus_uncertainty": vp.uncertainty,
            "v_plus_db": vp.db, "v_plus_db_uncertainty": vp.db_uncertainty,
            "band_hz": list(band),
        })
        pilot = estimate_phase(sq.hd_window(start_sq), scenario.pilot.offset_frequency_hz, fs,
                               lowpass_hz=a.phase_lowpass_hz, decimation=a.phase_decimation,
                               snr_floor_db=a.pilot_snr_floor_db)
        results["sigma_pilot_rad"] = pilot.std
    except (CalibrationError, InsufficientPilotError, ValueError) as exc:
        return results, STATUS_ANALYSIS_FAILURE, str(exc)

    sqz = scenario.squeezer
    if sqz.pump_power_mw > 0 and vp.linear >= vm.linear:
        fixed = FixedParameters(sqz.threshold_power_mw, sqz.measurement_frequency_hz,
                                sqz.hwhm_bandwidth_hz)
        point = VariancePoint(sqz.pump_power_mw, vm.linear, vp.linear)
        results["efficiency_sum_rule"] = efficiency_from_sum_rule(point, fixed)
        results["sigma_inferred_rad"] = invert_single_point(point, fixed)[1]
    return results, STATUS_OK, None


def phase_psd(trace, start: int, segment: int = 1 << 14):
    seg = trace.theta[start:]
    if seg.shape[0] < 2 * 256:
        return None
    pt = PhaseTrace(seg, 1.0 / trace.sample_period, "controller-internal")
    return welch_psd(pt, segment_length=min(segment, seg.shape[0] // 2))


def _write_psd_csv(path, psd):
    lines = ["frequency_hz,psd_rad2_per_hz"]
    lines += [f"{f!r},{p!r}" for f, p in zip(psd.frequency.tolist(), psd.density.tolist())]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _read_psd_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def plot_run(analysis_dir, plots_dir):
    """Plots of a run rebuilt from its ``analysis/`` CSV files."""
    analysis_dir, plots_dir = Path(analysis_dir), Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    ax = svgplot.Axes("Residual phase noise", "frequency (Hz)", "PSD (rad^2/Hz)", logx=True, logy=True)
    for name, label in (("phase_psd_closed.csv", "closed loop"), ("phase_psd_open.csv", "open loop")):
        p = analysis_dir / name
        if p.exists():
            f, d = _read_psd_csv(p)
            ax.add(f[1:], d[1:], label)
    atomic_write_text(plots_dir / "phase_psd.svg", svgplot.render(ax))
    p = analysis_dir / "lock_timeline.csv"
    if p.exists():
        data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
        ax = svgplot.Axes("Lock state", "time (s)", "state")
        ax.add(data[:, 0], data[:, 1], "FSM state")
        atomic_write_text(plots_dir / "lock_state.svg", svgplot.render(ax))
        ax = svgplot.Axes("Residual phase", "time (s)", "phase (rad)")
        ax.add(data[:, 0], data[:, 2], "true")
        atomic_write_text(plots_dir / "residual_phase.svg", svgplot.render(ax))


def _write_timeline(path, trace, max_points: int = 4000):
    step = max(1, trace.n_ticks // max_points)
    t = trace.time[::step]
    lines = ["time_s,fsm_state,theta_rad,eom_phase_rad,pzt_freq_rad_per_s"]
    for k, tk in enumerate(t.tolist()):
        j = k * step
        lines.append(f"{tk!r},{int(trace.fsm_state[j])},{float(trace.theta[j])!r},"
                     f"{float(trace.eom_phase[j])!r},{float(trace.pzt_freq[j])!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def build_summary(scenario: Scenario, traces: dict, results: dict, status: str, message) -> dict:
    settle = scenario.analysis.settle_time_s
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "name": scenario.name,
        "seed": scenario.seed,
        "config_hash": scenario.config_hash(),
        "status": status,
        "message": message,
        "acquisitions": {name: acquisition_info(tr, settle) for name, tr in traces.items()},
        "results": results,
        "config": scenario.to_dict(),
    })


def run_experiment(scenario: Scenario, out_dir=None, write_csv: bool = False) -> RunResult:
    """Simulate and analyze one scenario; write outputs when ``out_dir`` is given."""
    record = True
    traces = simulate(scenario, record_hd=record)
    results, status, message = analyze(scenario, traces)
    summary = build_summary(scenario, traces, results, status, message)
    if out_dir is not None:
        out = Path(out_dir)
        tdir, adir, pdir = out / "traces", out / "analysis", out / "plots"
        adir.mkdir(parents=True, exist_ok=True)
        if scenario.output.write_traces:
            write_trace(tdir, "squeezed", traces["squeezed"], scenario)
            write_trace(tdir, "antisqueezed", traces["antisqueezed"], scenario,
                        include_calibration=False, extra={"calibration_ref": "squeezed.json"})
            if write_csv:
                write_csv_series(tdir / "squeezed.csv", traces["squeezed"])
        start = traces["squeezed"].analysis_start(scenario.analysis.settle_time_s)
        base = start if start >= 0 else int(round(scenario.analysis.settle_time_s /
                                                  traces["squeezed"].sample_period))
        for name, key in (("phase_psd_closed.csv", "squeezed"), ("phase_psd_open.csv", "open_loop")):
            psd = phase_psd(traces[key], base) if base < traces[key].n_ticks else None
            if psd is not None:
                _write_psd_csv(adir / name, psd)
        _write_timeline(adir / "lock_timeline.csv", traces["squeezed"])
        atomic_write_text(out / SUMMARY_NAME, _dumps(summary))
        if scenario.output.write_plots:
            plot_run(adir, pdir)
    return RunResult(summary, status, traces)


# -- sweeps ---------------------------------------------------------------------

SWEEP_COLUMNS = ("index", "pump_power_mw", "fiber_length_km", "status", "v_minus", "v_minus_uncertainty",
                 "v_minus_db", "v_plus", "v_plus_uncertainty", "v_plus_db", "sigma_closed_rad",
                 "sigma_pilot_rad", "sigma_open_rad", "cycle_slips", "fiber_transmission",
                 "overall_efficiency", "efficiency_sum_rule", "message")


def sweep_points(scenario: Scenario) -> list:
    pumps = scenario.sweep.pump_powers_mw or (scenario.squeezer.pump_power_mw,)
    lengths = scenario.sweep.fiber_lengths_km or (scenario.fiber.length_km,)
    return [(p, length) for length in lengths for p in pumps]


def point_scenario(scenario: Scenario, pump: float, length: float) -> Scenario:
    """Single-point scenario; every point reuses the scenario seed."""
    return scenario.replace(squeezer={"pump_power_mw": pump}, fiber={"length_km": length},
                            sweep={"pump_powers_mw": (), "fiber_lengths_km": ()})


def _run_point(args):
    data, index, pump, length = args
    scenario = point_scenario(Scenario.from_dict(data), pump, length)
    row = {"index": index, "pump_power_mw": pump, "fiber_length_km": length}
    try:
        traces = simulate(scenario)
        results, status, message = analyze(scenario, traces)
    except Exception as exc:  # a crashed point is recorded, never fatal to the sweep
        results, status, message = {}, "error", f"{type(exc).__name__}: {exc}"
    row["status"] = status
    row["message"] = message or ""
    for key in SWEEP_COLUMNS:
        if key not in row:
            row[key] = results.get(key)
    return row


def _format_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def write_sweep_csv(path, rows):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in sorted(rows, key=lambda r: r["index"]):
            w.writerow([_format_cell(row.get(c)) for c in SWEEP_COLUMNS])
    os.replace(tmp, path)


def read_sweep_csv(path) -> list:
    numeric = {"pump_power_mw", "fiber_length_km", "v_minus", "v_minus_uncertainty", "v_minus_db",
               "v_plus", "v_plus_uncertainty", "v_plus_db", "sigma_closed_rad", "sigma_pilot_rad",
               "sigma_open_rad", "fiber_transmission", "overall_efficiency", "efficiency_sum_rule"}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k in numeric:
                    row[k] = float(v) if v != "" else None
                elif k in ("index", "cycle_slips"):
                    row[k] = int(v) if v != "" else None
                else:
                    row[k] = v
            rows.append(row)
    return rows


def sweep_fits(rows, fixed: FixedParameters) -> dict:
    """Per-length (eta, sigma) fits and the sigma-vs-length trend from sweep rows."""
    ok = [r for r in rows if r["status"] == STATUS_OK and r.get("v_minus") is not None]
    fits = {}
    for length in sorted({r["fiber_length_km"] for r in ok}):
        pts = []
        for r in ok:
            if r["fiber_length_km"] != length or r["v_plus"] < r["v_minus"]:
                continue
            pts.append(VariancePoint(r["pump_power_mw"], r["v_minus"], r["v_plus"], 0.0,
                                     r["v_minus_uncertainty"] or 0.0, r["v_plus_uncertainty"]))
        key = repr(float(length))
        if len({p.pump_power for p in pts}) < 3:
            continue
        try:
            fits[key] = fit_squeezing_model(pts, fixed).to_dict()
        except (FitError, ValueError) as exc:
            fits[key] = {"error": str(exc)}
    out = {"fits": fits, "trend": None}
    by_len = {}
    for r in ok:
        if r.get("sigma_closed_rad") is not None:
            by_len.setdefault(r["fiber_length_km"], []).append(r["sigma_closed_rad"])
    if len(by_len) >= 2:
        lengths = sorted(by_len)
        sig = [float(np.mean(by_len[length])) for length in lengths]
        out["trend"] = dict(phase_noise_vs_distance(lengths, sig).to_dict(),
                            lengths_km=lengths, sigma_rad=sig)
    return out


def plot_sweep(csv_path, plots_dir, fixed: FixedParameters):
    """All sweep plots, rebuilt from the persisted CSV alone."""
    rows = read_sweep_csv(csv_path)
    plots_dir = Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in rows if r["status"] == STATUS_OK and r.get("v_minus") is not None]
    derived = sweep_fits(rows, fixed)
    lengths = sorted({r["fiber_length_km"] for r in ok})
    ax = svgplot.Axes("Quadrature variances", "pump power (mW)", "variance (dB)")
    for length in lengths:
        sel = sorted((r for r in ok if r["fiber_length_km"] == length), key=lambda r: r["pump_power_mw"])
        x = [r["pump_power_mw"] for r in sel]
        ax.add(x, [r["v_minus_db"] for r in sel], f"V- {length:g} km", "marker")
        ax.add(x, [r["v_plus_db"] for r in sel], f"V+ {length:g} km", "marker")
        fit = derived["fits"].get(repr(float(length)))
        if fit and "error" not in fit and x:
            grid = np.linspace(0.0, max(x), 60)
            vm, vp = model_variances(fit["efficiency"], fit["phase_noise_std_rad"], grid, fixed)
            ax.add(grid, to_db(vm), "", "line")
            ax.add(grid, to_db(vp), "", "line")
    atomic_write_text(plots_dir / "variances_vs_pump.svg", svgplot.render(ax))
    if derived["trend"] is not None:
        tr = derived["trend"]
        ax = svgplot.Axes("Residual phase noise vs fiber length", "fiber length (km)", "sigma (mrad)")
        ax.add(tr["lengths_km"], [1e3 * s for s in tr["sigma_rad"]], "closed loop", "marker")
        grid = np.array([0.0, max(tr["lengths_km"])])
        ax.add(grid, 1e3 * (tr["intercept_rad"] + tr["slope_rad_per_km"] * grid), "linear fit")
        atomic_write_text(plots_dir / "sigma_vs_length.svg", svgplot.render(ax))
    if len(lengths) >= 2:
        ax = svgplot.Axes("Quadrature variances vs fiber length", "fiber length (km)", "variance (dB)")
        for pump in sorted({r["pump_power_mw"] for r in ok}):
            sel = sorted((r for r in ok if r["pump_power_mw"] == pump), key=lambda r: r["fiber_length_km"])
            x = [r["fiber_length_km"] for r in sel]
            ax.add(x, [r["v_minus_db"] for r in sel], f"V- {pump:g} mW", "both")
            ax.add(x, [r["v_plus_db"] for r in sel], f"V+ {pump:g} mW", "both")
        atomic_write_text(plots_dir / "variances_vs_length.svg", svgplot.render(ax))
    return derived


def _fixed(scenario: Scenario) -> FixedParameters:
    sq = scenario.squeezer
    return FixedParameters(sq.threshold_power_mw, sq.measurement_frequency_hz, sq.hwhm_bandwidth_hz)


def run_sweep(scenario: Scenario, out_dir, jobs: int = 1) -> dict:
    """Run every (pump, length) point; returns the sweep summary.

    Each finished point is written to ``points/<index>.json`` by
    write-then-rename, so an interrupted sweep leaves only complete files.
    """
    out = Path(out_dir)
    pdir, adir = out / "points", out / "analysis"
    pdir.mkdir(parents=True, exist_ok=True)
    adir.mkdir(parents=True, exist_ok=True)
    data = scenario.to_dict()
    tasks = [(data, k, p, length) for k, (p, length) in enumerate(sweep_points(scenario))]
    rows = []

    def store(row):
        atomic_write_text(pdir / f"{row['index']:04d}.json", _dumps(row))
        rows.append(row)

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row in pool.map(_run_point, tasks):
                store(row)
    else:
        for task in tasks:
            store(_run_point(task))
    rows.sort(key=lambda r: r["index"])
    csv_path = adir / "sweep.csv"
    write_sweep_csv(csv_path, rows)
    fixed = _fixed(scenario)
    derived = plot_sweep(csv_path, out / "plots", fixed) if scenario.output.write_plots \
        else sweep_fits(read_sweep_csv(csv_path), fixed)
    n_ok = sum(r["status"] == STATUS_OK for r in rows)
    summary = _clean({
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "name": scenario.name,
        "seed": scenario.seed,
        "config_hash": scenario.config_hash(),
        "status": STATUS_OK if n_ok == len(rows) else ("partial" if n_ok else "failed"),
        "n_points": len(rows),
        "n_ok": n_ok,
        "rows": [{k: r.get(k) for k in SWEEP_COLUMNS} for r in rows],
        "fits": derived["fits"],
        "trend": derived["trend"],
        "config": data,
    })
    atomic_write_text(out / SUMMARY_NAME, _dumps(summary))
    return summary


# -- compare and calibrate -------------------------------------------------------------


def load_summary(path) -> dict:
    path = Path(path)
    if path.is_dir():
        for cand in (path / SUMMARY_NAME, path / "analysis" / SUMMARY_NAME):
            if cand.exists():
                path = cand
                break
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CompareError(f"cannot read summary {path}: {exc}") from None


COMPARE_KEYS = ("v_minus_db", "v_plus_db", "sigma_closed_rad", "sigma_pilot_rad", "sigma_open_rad",
                "suppression_ratio", "cycle_slips", "overall_efficiency", "efficiency_sum_rule")


def compare_summaries(a: dict, b: dict) -> dict:
    """Side-by-side table and differences (b - a) of two run summaries."""
    va, vb = a.get("schema_version"), b.get("schema_version")
    if va != vb:
        raise CompareError(f"schema version mismatch: {va} vs {vb}")
    if va != SCHEMA_VERSION:
        raise CompareError(f"unsupported schema version {va}")
    if a.get("kind", "run") != "run" or b.get("kind", "run") != "run":
        raise CompareError("compare expects two run summaries")
    ra, rb = a.get("results", {}), b.get("results", {})
    rows = {}
    for key in COMPARE_KEYS:
        x, y = ra.get(key), rb.get(key)
        diff = y - x if isinstance(x, (int, float)) and isinstance(y, (int, float)) else None
        rows[key] = {"a": x, "b": y, "difference": diff}
    return {"schema_version": SCHEMA_VERSION, "kind": "compare",
            "a": {"name": a.get("name"), "config_hash": a.get("config_hash"), "status": a.get("status")},
            "b": {"name": b.get("name"), "config_hash": b.get("config_hash"), "status": b.get("status")},
            "same_config": a.get("config_hash") == b.get("config_hash"),
            "metrics": rows}


def write_compare(report: dict, out_dir):
    out = Path(out_dir)
    (out / "analysis").mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "analysis" / "compare.json", _dumps(report))
    ax = svgplot.Axes("Run comparison", "metric", "value")
    names = [k for k in ("v_minus_db", "v_plus_db") if report["metrics"][k]["a"] is not None]
    xs = list(range(1, len(names) + 1))
    if names:
        ax.add(xs, [report["metrics"][k]["a"] for k in names], f"a: {report['a']['name']}", "marker")
        ax.add(xs, [report["metrics"][k]["b"] or math.nan for k in names],
               f"b: {report['b']['name']}", "marker")
    ax.xlabel = "metric: " + ", ".join(f"{i}={n}" for i, n in zip(xs, names))
    (out / "plots").mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "plots" / "compare.svg", svgplot.render(ax))


def run_calibration(scenario: Scenario, out_dir=None) -> dict:
    """Vacuum and dark reference traces and their band powers, without a lock run."""
    from ..analysis.variance import band_power
    from ..lock.loop import noise_streams
    from ..optics import dark_trace, vacuum_trace
    rx = scenario.receiver.model()
    a = scenario.analysis
    rngs = noise_streams(_seeds(scenario)[0])
    vac = vacuum_trace(rx, a.calibration_samples, rngs["vacuum"])
    dark = dark_trace(rx, a.calibration_samples, rngs["dark"])
    band = (a.band_low_hz, a.band_high_hz)
    p_vac = band_power(vac, rx.sample_rate, band, a.welch_segment, a.welch_overlap)
    p_dark = band_power(dark, rx.sample_rate, band, a.welch_segment, a.welch_overlap)
    summary = _clean({
        "schema_version": SCHEMA_VERSION, "kind": "calibration", "name": scenario.name,
        "seed": scenario.seed, "config_hash": scenario.config_hash(),
        "status": STATUS_OK,
        "vacuum_band_power_v2": p_vac, "dark_band_power_v2": p_dark,
        "electronic_clearance_db": float(to_db(p_vac / p_dark)) if p_dark > 0 else None,
        "vacuum_std_v": float(np.std(vac)), "dark_std_v": float(np.std(dark)),
        "samples": a.calibration_samples, "band_hz": list(band),
    })
    if out_dir is not None:
        from .traces import write_columns
        out = Path(out_dir)
        write_columns(out / "traces", "calibration",
                      [("vacuum", vac, "<f4", "V", rx.sample_rate, "calibration"),
                       ("dark", dark, "<f4", "V", rx.sample_rate, "calibration")],
                      {"config_hash": scenario.config_hash(), "seed": scenario.seed})
        (out / "analysis").mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "analysis" / "calibration.json", _dumps(summary))
    return summary
