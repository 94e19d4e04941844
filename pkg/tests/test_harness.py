import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rlosim.harness import experiment as ex
from rlosim.harness.cli import EXIT_ANALYSIS, EXIT_CONFIG, EXIT_LOCK, EXIT_OK, main
from rlosim.harness.config import load, packaged_scenarios
from rlosim.harness.traces import read_columns
from rlosim.scenario import Scenario

QUIET = {"write_traces": False, "write_plots": False}


def _write_scenario(path, scenario):
    path.write_text(json.dumps(scenario.to_dict()))
    return str(path)


def _assert_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")


@pytest.fixture(scope="module")
def pump_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("pump_sweep")
    return ex.run_sweep(load("pump_sweep_10m.json"), out), out


@pytest.fixture(scope="module")
def length_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("length_sweep")
    return ex.run_sweep(load("length_sweep.json"), out), out


# -- single runs ------------------------------------------------------------------


def test_baseline_summary(baseline_run):
    result, out = baseline_run
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "ok" and s["kind"] == "run"
    r = s["results"]
    assert r["v_minus"] < 1 < r["v_plus"]
    assert r["v_minus_db"] == pytest.approx(r["model"]["v_minus_db"], abs=0.2)
    assert r["v_minus_db"] == pytest.approx(-3.6, abs=0.2)
    assert r["cycle_slips"] == 0
    assert s["config_hash"] == load("baseline_10m.json").config_hash()
    assert s["acquisitions"]["squeezed"]["locked"]


def test_baseline_outputs(baseline_run):
    _, out = baseline_run
    for name in ("phase_psd.svg", "lock_state.svg", "residual_phase.svg"):
        _assert_svg(out / "plots" / name)
    for name in ("phase_psd_closed.csv", "phase_psd_open.csv", "lock_timeline.csv"):
        assert (out / "analysis" / name).stat().st_size > 0
    assert not list(out.rglob("*.tmp"))


def test_trace_files_round_trip(baseline_run, baseline):
    result, out = baseline_run
    meta, cols = read_columns(out / "traces" / "squeezed.json")
    assert meta["byte_order"] == "little"
    assert meta["config_hash"] == Scenario.from_dict(meta["config"]).config_hash()
    assert meta["config_hash"] == baseline.config_hash()
    assert meta["seed"] == baseline.seed
    assert all(c["unit"] and c["sample_rate_hz"] > 0 for c in meta["columns"])
    tr = result.traces["squeezed"]
    np.testing.assert_array_equal(cols["unwrapped"], tr.unwrapped)
    np.testing.assert_array_equal(cols["hd"], tr.hd.astype(np.float32))
    assert {c["block"] for c in meta["columns"]} == {"series", "calibration"}
    anti, _ = read_columns(out / "traces" / "antisqueezed.json")
    assert anti["calibration_ref"] == "squeezed.json"
    assert "vacuum" not in {c["name"] for c in anti["columns"]}


def test_rerun_is_byte_identical(baseline_run, baseline, tmp_path):
    _, out = baseline_run
    ex.run_experiment(baseline, tmp_path)
    assert (tmp_path / "summary.json").read_bytes() == (out / "summary.json").read_bytes()
    assert (tmp_path / "traces" / "squeezed.bin").read_bytes() == \
        (out / "traces" / "squeezed.bin").read_bytes()


def test_vacuum_only_is_shot_noise():
    r = ex.run_experiment(load("vacuum_only.json").replace(output=QUIET)).summary["results"]
    for key in ("v_minus", "v_plus"):
        assert abs(r[key + "_db"]) <= 3 * r[key + "_db_uncertainty"]
    assert "efficiency_sum_rule" not in r


def test_regular_lo_is_quieter_than_long_fiber():
    real = ex.run_experiment(load("fiber_40km.json").replace(output=QUIET)).summary
    reg = ex.run_experiment(load("regular_lo_10m.json").replace(output=QUIET)).summary
    assert real["status"] == reg["status"] == "ok"
    assert reg["results"]["sigma_closed_rad"] < real["results"]["sigma_closed_rad"]


def test_noiseless_run_skips_variances():
    sc = load("baseline_10m.json").replace(noiseless=True, output=QUIET)
    res = ex.run_experiment(sc)
    assert res.status == "ok"
    assert "v_minus" not in res.summary["results"] and "note" in res.summary["results"]


# -- sweeps -----------------------------------------------------------------------


def test_pump_sweep_ordering(pump_sweep, baseline):
    summary, out = pump_sweep
    assert summary["status"] == "ok" and summary["n_points"] == 5
    rows = sorted(summary["rows"], key=lambda r: r["pump_power_mw"])
    vp = [r["v_plus"] for r in rows]
    assert all(b > a for a, b in zip(vp, vp[1:]))
    # squeezing follows the phase-noise-averaged model, which peaks below the highest pump
    sigma = float(np.mean([r["sigma_closed_rad"] for r in rows]))
    model = [ex.model_prediction(baseline.replace(squeezer={"pump_power_mw": r["pump_power_mw"]}),
                                 sigma)["v_minus"] for r in rows]
    vm = [r["v_minus"] for r in rows]
    unc = [r["v_minus_uncertainty"] for r in rows]
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if abs(model[i] - model[j]) > 3 * (unc[i] + unc[j]):
                assert (vm[i] - vm[j]) * (model[i] - model[j]) > 0
    fit = summary["fits"][repr(0.01)]
    assert fit["efficiency"] == pytest.approx(0.64, abs=0.02)
    assert fit["phase_noise_std_rad"] == pytest.approx(0.056, abs=0.010)


def test_length_sweep_trends(length_sweep):
    summary, _ = length_sweep
    assert summary["status"] == "ok"
    rows = sorted(summary["rows"], key=lambda r: r["fiber_length_km"])
    mags = [-r["v_minus_db"] for r in rows]
    assert all(b < a for a, b in zip(mags, mags[1:]))
    for r in rows:
        assert r["overall_efficiency"] == pytest.approx(0.64 * 10 ** (-0.018 * r["fiber_length_km"]),
                                                        rel=1e-12)
        assert r["cycle_slips"] == 0
    assert summary["trend"]["slope_mrad_per_km"] > 0


def test_sweep_plots_regenerate_from_csv(pump_sweep, length_sweep, tmp_path):
    for summary, out in (pump_sweep, length_sweep):
        rows = ex.read_sweep_csv(out / "analysis" / "sweep.csv")
        assert len(rows) == summary["n_points"]
        assert len(list((out / "points").glob("*.json"))) == summary["n_points"]
        fixed = ex._fixed(load("baseline_10m.json"))
        ex.plot_sweep(out / "analysis" / "sweep.csv", tmp_path / out.name, fixed)
        for svg in (out / "plots").glob("*.svg"):
            _assert_svg(svg)
            assert (tmp_path / out.name / svg.name).read_bytes() == svg.read_bytes()
    assert {p.name for p in (length_sweep[1] / "plots").glob("*.svg")} >= \
        {"sigma_vs_length.svg", "variances_vs_length.svg"}


def test_empty_sweep_equals_run(tmp_path):
    sc = load("baseline_10m.json").replace(output=QUIET, duration_s=0.004)
    swept = ex.run_sweep(sc, tmp_path)
    run = ex.run_experiment(sc).summary["results"]
    (row,) = swept["rows"]
    for key in ("v_minus", "v_plus", "sigma_closed_rad", "cycle_slips"):
        assert row[key] == run[key]


def test_failed_sweep_row_is_marked(tmp_path):
    sc = load("baseline_10m.json").replace(output=QUIET, duration_s=0.004,
                                           analysis={"pilot_snr_floor_db": 200.0},
                                           sweep={"pump_powers_mw": (1.0, 2.0)})
    summary = ex.run_sweep(sc, tmp_path)
    assert summary["status"] == "failed"
    assert [r["status"] for r in summary["rows"]] == ["analysis_failure"] * 2
    assert all("pilot" in r["message"].lower() for r in summary["rows"])


# -- compare and calibrate ---------------------------------------------------------


def test_compare_identical(baseline_run, tmp_path):
    _, out = baseline_run
    report = ex.compare_summaries(ex.load_summary(out), ex.load_summary(out))
    assert report["same_config"]
    assert all(m["difference"] in (0, 0.0, None) for m in report["metrics"].values())
    ex.write_compare(report, tmp_path)
    _assert_svg(tmp_path / "plots" / "compare.svg")


def test_compare_rejects_schema_mismatch(baseline_run, tmp_path):
    _, out = baseline_run
    s = ex.load_summary(out)
    other = dict(s, schema_version=s["schema_version"] + 1)
    with pytest.raises(ex.CompareError):
        ex.compare_summaries(s, other)
    p = tmp_path / "bad"
    p.mkdir()
    (p / "summary.json").write_text(json.dumps(other))
    assert main(["compare", str(out), str(p), "--out", str(tmp_path / "c")]) == EXIT_CONFIG
    with pytest.raises(ex.CompareError):
        ex.compare_summaries(s, dict(s, kind="sweep"))


def test_calibrate(tmp_path):
    summary = ex.run_calibration(load("baseline_10m.json"), tmp_path)
    assert summary["electronic_clearance_db"] == pytest.approx(15.0, abs=0.3)
    meta, cols = read_columns(tmp_path / "traces" / "calibration.json")
    assert set(cols) == {"vacuum", "dark"}
    assert (tmp_path / "analysis" / "calibration.json").exists()


# -- command line ------------------------------------------------------------------


def test_cli_run_and_compare(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["run", "--scenario", "baseline_10m.json", "--out", str(a), "--csv"]) == EXIT_OK
    assert (a / "traces" / "squeezed.csv").stat().st_size > 0
    assert main(["run", "--scenario", "regular_lo_10m.json", "--out", str(b)]) == EXIT_OK
    assert main(["compare", str(a), str(b), "--out", str(tmp_path / "c")]) == EXIT_OK
    report = json.loads((tmp_path / "c" / "analysis" / "compare.json").read_text())
    assert report["a"]["status"] == report["b"]["status"] == "ok"
    assert report["metrics"]["sigma_closed_rad"]["difference"] < 0
    assert "v_minus_db" in capsys.readouterr().out


def test_cli_validate(tmp_path, capsys):
    for name in packaged_scenarios():
        assert main(["validate", "--scenario", name]) == EXIT_OK
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "squeezer": {"pump_power_mw": 9.0, "colour": 1},
                               "fiber": {"length_km": "far"}}))
    assert main(["validate", "--scenario", str(bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "squeezer.colour" in err and "squeezer.pump_power_mw" in err and "fiber.length_km" in err
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_cli_lock_failure(tmp_path):
    sc = load("baseline_10m.json").replace(pilot={"power_at_source_w": 0.0}, output=QUIET,
                                           duration_s=0.004)
    path = _write_scenario(tmp_path / "dark_pilot.json", sc)
    assert main(["run", "--scenario", path, "--out", str(tmp_path / "o")]) == EXIT_LOCK
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["status"] == "lock_failure"
    assert main(["sweep", "--scenario", path, "--out", str(tmp_path / "s")]) == EXIT_LOCK


def test_cli_analysis_failure(tmp_path):
    sc = load("baseline_10m.json").replace(analysis={"pilot_snr_floor_db": 200.0}, output=QUIET,
                                           duration_s=0.004)
    path = _write_scenario(tmp_path / "strict.json", sc)
    assert main(["run", "--scenario", path, "--out", str(tmp_path / "o")]) == EXIT_ANALYSIS


def test_cli_seed_override(tmp_path):
    sc = load("baseline_10m.json", seed=11)
    assert sc.seed == 11 and sc.config_hash() != load("baseline_10m.json").config_hash()
    with pytest.raises(SystemExit):
        main(["validate", "--scenario", "baseline_10m.json", "--seed", "-1"])


def test_summary_json_is_finite(baseline_run):
    _, out = baseline_run
    text = (out / "summary.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert not math.isnan(json.loads(text)["results"]["v_minus"])
