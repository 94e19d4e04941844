"""Trace files: little-endian binary columns plus a JSON sidecar header.

``<name>.bin`` holds the columns back to back; ``<name>.json`` lists each
column's dtype, unit, sample rate, byte offset and length together with the
config hash and seed of the run that produced it.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

TRACE_FORMAT = "rlosim-trace/1"


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_columns(directory, name: str, columns: list, header: dict) -> Path:
    """Write ``columns`` = [(name, array, dtype, unit, sample_rate, block)] and the sidecar.

    ``block`` groups columns (e.g. ``"series"`` vs ``"calibration"``).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for col_name, data, dtype, unit, rate, block in columns:
        arr = np.ascontiguousarray(np.asarray(data).astype(np.dtype(dtype).newbyteorder("<")))
        raw = arr.tobytes()
        entries.append({"name": col_name, "dtype": arr.dtype.str, "unit": unit,
                        "sample_rate_hz": rate, "block": block, "offset": offset,
                        "length": int(arr.shape[0])})
        chunks.append(raw)
        offset += len(raw)
    meta = dict(header)
    meta["format"] = TRACE_FORMAT
    meta["byte_order"] = "little"
    meta["data_file"] = f"{name}.bin"
    meta["columns"] = entries
    atomic_write_bytes(directory / f"{name}.bin", b"".join(chunks))
    atomic_write_text(directory / f"{name}.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory / f"{name}.json"


def read_columns(sidecar) -> tuple[dict, dict]:
    """Return ``(header, {column: array})`` for a sidecar path."""
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    if meta.get("format") != TRACE_FORMAT:
        raise ValueError(f"{sidecar}: unknown trace format {meta.get('format')!r}")
    raw = (sidecar.parent / meta["data_file"]).read_bytes()
    out = {}
    for col in meta["columns"]:
        dt = np.dtype(col["dtype"])
        out[col["name"]] = np.frombuffer(raw, dtype=dt, count=col["length"], offset=col["offset"])
    return meta, out


def trace_columns(trace, include_calibration: bool = True) -> list:
    """Column list for a :class:`~rlosim.lock.loop.SimulationTrace`."""
    fs = trace.sample_rate
    fc = 1.0 / trace.sample_period
    cols = [
        ("hd", trace.hd, "<f4", "V", fs, "series"),
        ("i", trace.i, "<i2", "adc_counts", fc, "series"),
        ("q", trace.q, "<i2", "adc_counts", fc, "series"),
        ("wrapped", trace.wrapped, "<i4", "phase_lsb", fc, "series"),
        ("unwrapped", trace.unwrapped, "<i8", "phase_lsb", fc, "series"),
        ("pzt_command", trace.pzt_command, "<f8", "rad/s", fc, "series"),
        ("eom_command", trace.eom_command, "<f8", "rad", fc, "series"),
        ("pzt_freq", trace.pzt_freq, "<f8", "rad/s", fc, "series"),
        ("eom_phase", trace.eom_phase, "<f8", "rad", fc, "series"),
        ("fsm_state", trace.fsm_state, "<i1", "state", fc, "series"),
        ("theta", trace.theta, "<f8", "rad", fc, "series"),
        ("flags", trace.flags, "<i1", "bitmask", fc, "series"),
    ]
    if include_calibration and trace.vacuum is not None:
        cols.append(("vacuum", trace.vacuum, "<f4", "V", fs, "calibration"))
        cols.append(("dark", trace.dark, "<f4", "V", fs, "calibration"))
    return cols


def write_trace(directory, name: str, trace, scenario, include_calibration: bool = True,
                extra: dict | None = None) -> Path:
    header = {
        "config_hash": scenario.config_hash(),
        "seed": scenario.seed,
        "sample_rate_hz": trace.sample_rate,
        "controller_rate_hz": 1.0 / trace.sample_period,
        "phase_lsb_rad": trace.phase_lsb,
        "phi_set_rad": trace.phi_set,
        "full_lock_index": trace.full_lock_index,
        "diagnostics": trace.diagnostics,
        "config": scenario.to_dict(),
    }
    if extra:
        header.update(extra)
    return write_columns(directory, name, trace_columns(trace, include_calibration), header)


def write_csv_series(path, trace, max_rows: int = 200_000):
    """Controller-rate columns as CSV (for small runs)."""
    n = min(trace.n_ticks, max_rows)
    names = ["time_s", "i", "q", "wrapped", "unwrapped", "pzt_command", "eom_command",
             "fsm_state", "theta"]
    t = trace.time
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for k in range(n):
            w.writerow([repr(float(t[k])), int(trace.i[k]), int(trace.q[k]), int(trace.wrapped[k]),
                        int(trace.unwrapped[k]), repr(float(trace.pzt_command[k])),
                        repr(float(trace.eom_command[k])), int(trace.fsm_state[k]),
                        repr(float(trace.theta[k]))])
    os.replace(tmp, path)
