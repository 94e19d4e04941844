"""Scenario configuration: typed sections with unit-suffixed fields, JSON round-trip.

Every section is a frozen dataclass.  ``Scenario.from_dict`` validates field
names, types and ranges and raises :class:`ConfigError` listing every bad
field by its dotted path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .optics import FiberChannel, HomodyneReceiver, PilotTone, SqueezerModel

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` holds ``(field_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))


@dataclass(frozen=True)
class SqueezerConfig:
    pump_power_mw: float = 2.6
    threshold_power_mw: float = 5.12
    hwhm_bandwidth_hz: float = 66e6
    setup_efficiency: float = 0.64
    measurement_frequency_hz: float = 12.2e6
    gain_perturbation: float = 0.0

    def model(self) -> SqueezerModel:
        return SqueezerModel(self.pump_power_mw, self.threshold_power_mw, self.hwhm_bandwidth_hz,
                             self.setup_efficiency, self.measurement_frequency_hz,
                             self.gain_perturbation)


# Random-walk strength of the fiber phase disturbance, rad^2/(s km); set by
# lock.tuning.calibrate_fiber_drift against the target growth of residual phase
# noise with length.
DEFAULT_FIBER_DRIFT = 45.5


@dataclass(frozen=True)
class FiberConfig:
    length_km: float = 0.01
    attenuation_db_per_km: float = 0.18
    phase_drift_rad2_per_s_km: float = DEFAULT_FIBER_DRIFT

    def model(self) -> FiberChannel:
        return FiberChannel(self.length_km, self.attenuation_db_per_km,
                            self.phase_drift_rad2_per_s_km)


@dataclass(frozen=True)
class PilotConfig:
    offset_frequency_hz: float = 40e6
    power_at_source_w: float = 5e-6

    def model(self) -> PilotTone:
        return PilotTone(self.offset_frequency_hz, self.power_at_source_w)


@dataclass(frozen=True)
class ReceiverConfig:
    lo_power_w: float = 1e-3
    detection_efficiency: float = 1.0
    electronic_noise_clearance_db: float = 15.0
    sample_rate_hz: float = 200e6
    phase_set_rad: float = 0.0
    front_end_gain_v_per_w: float = 2000.0
    full_scale_v: float = 1.0
    wavelength_m: float = 1550.12e-9

    def model(self) -> HomodyneReceiver:
        return HomodyneReceiver(self.lo_power_w, self.detection_efficiency,
                                self.electronic_noise_clearance_db, self.sample_rate_hz,
                                self.phase_set_rad, self.front_end_gain_v_per_w,
                                self.full_scale_v, self.wavelength_m)


LO_MODES = ("real", "regular")


@dataclass(frozen=True)
class LaserConfig:
    """Signal and LO lasers.

    In ``regular`` mode the LO is derived from the signal laser (shared phase
    process) and reaches the detector through its own fiber of
    ``regular_lo_fiber_length_km``.
    """

    signal_linewidth_hz: float = 100.0
    lo_linewidth_hz: float = 100.0
    initial_frequency_offset_hz: float = 0.0
    initial_phase_rad: float = 0.0
    lo_mode: str = "real"
    regular_lo_fiber_length_km: float = 0.01


LOCK_STATE_LABELS = ("CoarseTuning", "FrequencyLock", "FullLock", "LostLock")


@dataclass(frozen=True)
class ControllerConfig:
    enabled: bool = True
    initial_state: str = "CoarseTuning"
    coarse_tuning_enabled: bool = True
    decimation: int = 20
    mixer_amplitude: float = 1.0
    mixer_cutoff_hz: float = 5e6
    mixer_order: int = 4
    adc_bits: int = 14
    adc_full_scale_v: float = 0.25
    phase_bits: int = 16
    unwrap_bits: int = 32
    cordic_iterations: int = 16
    latency_samples: int = 5
    error_reference_length_km: float = 0.01
    slow_kp: float = 1240.0
    slow_ki: float = 3.91e5
    medium_kp: float = 4.11e5
    medium_ki: float = 6.46e8
    fast_kp: float = 0.5
    fast_ki: float = 3.0e5
    fast_filter_hz: float = 39e3
    anti_windup: bool = True
    dac_bits: int = 16
    dac_filter_hz: float = 5e6
    pzt_bandwidth_hz: float = 1e3
    pzt_range_hz: float = 1e9
    eom_bandwidth_hz: float = 1e6
    eom_range_rad: float = 4.0 * math.pi
    capture_range_hz: float = 5e6
    coarse_target_hz: float = 2.5e6
    coarse_step_hz: float = 1e6
    counter_gate_s: float = 10e-6
    frequency_lock_threshold_hz: float = 1e3
    frequency_lock_hold_s: float = 0.2e-3
    frequency_estimate_tau_s: float = 0.5e-3
    phase_smoothing_hz: float = 2e6


@dataclass(frozen=True)
class AnalysisConfig:
    band_low_hz: float = 7.2e6
    band_high_hz: float = 17.2e6
    settle_time_s: float = 1e-3
    welch_segment: int = 16384
    welch_overlap: float = 0.5
    pilot_snr_floor_db: float = 10.0
    phase_lowpass_hz: float = 2e6
    phase_decimation: int = 10
    subtract_dark: bool = True
    calibration_samples: int = 1 << 21


@dataclass(frozen=True)
class OutputConfig:
    write_traces: bool = True
    write_plots: bool = True


@dataclass(frozen=True)
class SweepConfig:
    pump_powers_mw: tuple = ()
    fiber_lengths_km: tuple = ()


@dataclass(frozen=True)
class Scenario:
    seed: int
    name: str = "scenario"
    schema_version: int = SCHEMA_VERSION
    duration_s: float = 11e-3
    noiseless: bool = False
    squeezer: SqueezerConfig = field(default_factory=SqueezerConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    lasers: LaserConfig = field(default_factory=LaserConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        errors = _check_scenario(self)
        if errors:
            raise ConfigError(errors)

    # -- serialization ------------------------------------------------------------
    def to_dict(self) -> dict:
        return _to_plain(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        errors: list = []
        kwargs = _parse_section(cls, data, "", errors)
        if errors:
            # also report range problems of the fields that did parse
            try:
                cls(**kwargs)
            except ConfigError as exc:
                errors.extend(e for e in exc.errors if e not in errors)
            except (TypeError, ValueError):
                pass
            raise ConfigError(errors)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([("<file>", f"invalid JSON: {exc}")]) from None
        return cls.from_dict(data)

    def replace(self, **sections) -> "Scenario":
        """Copy with whole sections or top-level fields replaced.

        Section updates may be given as dicts of field overrides.
        """
        updates = {}
        for key, value in sections.items():
            current = getattr(self, key)
            if isinstance(value, dict) and dataclasses.is_dataclass(current):
                value = dataclasses.replace(current, **value)
            updates[key] = value
        return dataclasses.replace(self, **updates)


_SECTIONS = {
    "squeezer": SqueezerConfig, "fiber": FiberConfig, "pilot": PilotConfig,
    "receiver": ReceiverConfig, "lasers": LaserConfig, "controller": ControllerConfig,
    "analysis": AnalysisConfig, "output": OutputConfig, "sweep": SweepConfig,
}


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def _coerce(value, default, path, errors):
    """Match ``value`` to the type of the field's default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            errors.append((path, f"expected boolean, got {value!r}"))
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append((path, f"expected integer, got {value!r}"))
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append((path, f"expected number, got {value!r}"))
            return value
        if not math.isfinite(value):
            errors.append((path, "must be finite"))
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            errors.append((path, f"expected string, got {value!r}"))
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            errors.append((path, f"expected list, got {value!r}"))
            return ()
        out = []
        for k, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                errors.append((f"{path}[{k}]", f"expected finite number, got {v!r}"))
            else:
                out.append(float(v))
        return tuple(out)
    return value


def _parse_section(cls, data, prefix, errors):
    if not isinstance(data, dict):
        errors.append((prefix.rstrip(".") or "<root>", "expected an object"))
        return {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            errors.append((prefix + key, "unknown field"))
    kwargs = {}
    for name, f in names.items():
        path = prefix + name
        if name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                errors.append((path, "required field missing"))
            continue
        value = data[name]
        if cls is Scenario and name in _SECTIONS:
            sub = _parse_section(_SECTIONS[name], value, path + ".", errors)
            try:
                kwargs[name] = _SECTIONS[name](**sub)
            except TypeError as exc:
                errors.append((path, str(exc)))
            continue
        if cls is Scenario and name == "seed":
            default = 0
        elif f.default is not dataclasses.MISSING:
            default = f.default
        else:
            default = f.default_factory()
        before = len(errors)
        coerced = _coerce(value, default, path, errors)
        if len(errors) == before:
            kwargs[name] = coerced
    return kwargs


def _check_scenario(s: Scenario) -> list:
    errors = []

    def need(ok, path, msg):
        if not ok:
            errors.append((path, msg))

    need(isinstance(s.seed, int) and not isinstance(s.seed, bool) and 0 <= s.seed < 2**64,
         "seed", "must be an integer in [0, 2**64)")
    need(s.schema_version == SCHEMA_VERSION, "schema_version",
         f"unsupported schema version {s.schema_version} (expected {SCHEMA_VERSION})")
    need(s.duration_s > 0, "duration_s", "must be > 0")

    sq = s.squeezer
    need(sq.threshold_power_mw > 0, "squeezer.threshold_power_mw", "must be > 0")
    need(0 <= sq.pump_power_mw < sq.threshold_power_mw, "squeezer.pump_power_mw",
         "must lie in [0, threshold_power_mw)")
    need(0 < sq.setup_efficiency <= 1, "squeezer.setup_efficiency", "must lie in (0, 1]")
    need(sq.hwhm_bandwidth_hz > 0, "squeezer.hwhm_bandwidth_hz", "must be > 0")
    need(sq.measurement_frequency_hz >= 0, "squeezer.measurement_frequency_hz", "must be >= 0")
    need(0 <= sq.gain_perturbation < 1, "squeezer.gain_perturbation", "must lie in [0, 1)")

    fb = s.fiber
    need(fb.length_km >= 0, "fiber.length_km", "must be >= 0")
    need(fb.attenuation_db_per_km >= 0, "fiber.attenuation_db_per_km", "must be >= 0")
    need(fb.phase_drift_rad2_per_s_km >= 0, "fiber.phase_drift_rad2_per_s_km", "must be >= 0")

    need(s.pilot.offset_frequency_hz > 0, "pilot.offset_frequency_hz", "must be > 0")
    need(s.pilot.power_at_source_w >= 0, "pilot.power_at_source_w", "must be >= 0")

    rx = s.receiver
    need(rx.lo_power_w > 0, "receiver.lo_power_w", "must be > 0")
    need(0 < rx.detection_efficiency <= 1, "receiver.detection_efficiency", "must lie in (0, 1]")
    need(rx.sample_rate_hz >= 4 * s.pilot.offset_frequency_hz, "receiver.sample_rate_hz",
         "must be >= 4 x pilot.offset_frequency_hz")
    need(rx.front_end_gain_v_per_w > 0, "receiver.front_end_gain_v_per_w", "must be > 0")
    need(rx.full_scale_v > 0, "receiver.full_scale_v", "must be > 0")
    need(rx.wavelength_m > 0, "receiver.wavelength_m", "must be > 0")

    la = s.lasers
    need(la.signal_linewidth_hz >= 0, "lasers.signal_linewidth_hz", "must be >= 0")
    need(la.lo_linewidth_hz >= 0, "lasers.lo_linewidth_hz", "must be >= 0")
    need(la.lo_mode in LO_MODES, "lasers.lo_mode", f"must be one of {LO_MODES}")
    need(la.regular_lo_fiber_length_km >= 0, "lasers.regular_lo_fiber_length_km", "must be >= 0")
    need(abs(la.initial_frequency_offset_hz) < s.pilot.offset_frequency_hz,
         "lasers.initial_frequency_offset_hz", "magnitude must stay below the pilot offset")

    c = s.controller
    need(c.initial_state in LOCK_STATE_LABELS, "controller.initial_state",
         f"must be one of {LOCK_STATE_LABELS}")
    need(c.decimation >= 1, "controller.decimation", "must be >= 1")
    need(2 <= c.adc_bits <= 24, "controller.adc_bits", "must lie in [2, 24]")
    need(c.adc_full_scale_v > 0, "controller.adc_full_scale_v", "must be > 0")
    need(4 <= c.phase_bits <= 24, "controller.phase_bits", "must lie in [4, 24]")
    need(c.phase_bits < c.unwrap_bits <= 62, "controller.unwrap_bits",
         "must exceed phase_bits and be <= 62")
    need(1 <= c.cordic_iterations <= 30, "controller.cordic_iterations", "must lie in [1, 30]")
    need(c.latency_samples >= 0, "controller.latency_samples", "must be >= 0")
    need(1 <= c.mixer_order <= 12, "controller.mixer_order", "must lie in [1, 12]")
    need(c.error_reference_length_km >= 0, "controller.error_reference_length_km", "must be >= 0")
    need(0 <= c.dac_bits <= 24, "controller.dac_bits", "must lie in [0, 24]")
    for name in ("slow_kp", "slow_ki", "medium_kp", "medium_ki", "fast_kp", "fast_ki"):
        need(getattr(c, name) >= 0, f"controller.{name}", "must be >= 0")
    for name in ("mixer_cutoff_hz", "fast_filter_hz", "dac_filter_hz", "pzt_bandwidth_hz",
                 "pzt_range_hz", "eom_bandwidth_hz", "eom_range_rad", "capture_range_hz",
                 "coarse_target_hz", "coarse_step_hz", "counter_gate_s",
                 "frequency_lock_threshold_hz", "frequency_estimate_tau_s",
                 "phase_smoothing_hz", "mixer_amplitude"):
        need(getattr(c, name) > 0, f"controller.{name}", "must be > 0")
    need(c.frequency_lock_hold_s >= 0, "controller.frequency_lock_hold_s", "must be >= 0")
    need(c.coarse_target_hz <= c.capture_range_hz, "controller.coarse_target_hz",
         "must not exceed capture_range_hz")
    if rx.sample_rate_hz > 0 and c.decimation >= 1:
        need(c.mixer_cutoff_hz < rx.sample_rate_hz / 2, "controller.mixer_cutoff_hz",
             "must be below the Nyquist frequency")
        ts = c.decimation / rx.sample_rate_hz
        need(c.counter_gate_s >= ts, "controller.counter_gate_s", "shorter than one controller period")

    a = s.analysis
    need(0 <= a.band_low_hz < a.band_high_hz, "analysis.band_low_hz", "band must satisfy 0 <= low < high")
    need(a.band_high_hz <= rx.sample_rate_hz / 2, "analysis.band_high_hz", "must not exceed Nyquist")
    need(a.settle_time_s >= 0, "analysis.settle_time_s", "must be >= 0")
    need(a.welch_segment >= 16, "analysis.welch_segment", "must be >= 16")
    need(0 <= a.welch_overlap < 1, "analysis.welch_overlap", "must lie in [0, 1)")
    need(a.phase_lowpass_hz > 0, "analysis.phase_lowpass_hz", "must be > 0")
    need(a.phase_decimation >= 1, "analysis.phase_decimation", "must be >= 1")
    need(a.calibration_samples >= a.welch_segment, "analysis.calibration_samples",
         "must be >= welch_segment")

    for k, p in enumerate(s.sweep.pump_powers_mw):
        need(0 <= p < sq.threshold_power_mw, f"sweep.pump_powers_mw[{k}]",
             "must lie in [0, threshold_power_mw)")
    for k, length in enumerate(s.sweep.fiber_lengths_km):
        need(length >= 0, f"sweep.fiber_lengths_km[{k}]", "must be >= 0")
    return errors


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("<file>", f"cannot read {path}: {exc.strerror}")]) from None
    return Scenario.from_json(text)
