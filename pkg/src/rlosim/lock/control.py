"""Controller building blocks: PI with anti-windup, first-order sections, actuators, FSM states."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .._jit import jit


class LockState(enum.IntEnum):
    COARSE_TUNING = 0
    FREQUENCY_LOCK = 1
    FULL_LOCK = 2
    LOST_LOCK = 3

    @property
    def label(self) -> str:
        return {0: "CoarseTuning", 1: "FrequencyLock", 2: "FullLock", 3: "LostLock"}[int(self)]

    @classmethod
    def from_label(cls, label: str) -> "LockState":
        for state in cls:
            if state.label == label:
                return state
        raise ValueError(f"unknown lock state {label!r}")


@jit
def clamp(x, lo, hi):
    if x > hi:
        return hi
    if x < lo:
        return lo
    return x


@jit
def lowpass_coefficient(cutoff_hz, dt):
    """Smoothing factor of a first-order section ``y += a (x - y)``."""
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * dt)


@jit
def pi_update(kp, ki, integrator, out_min, out_max, error, dt, anti_windup):
    """One PI step; returns ``(output, new_integrator)``.

    With anti-windup the integrator only commits ``error * dt`` when the
    resulting output stays inside the limits, so it is frozen while clamped.
    """
    trial = integrator + error * dt
    u = kp * error + ki * trial
    if out_min <= u <= out_max:
        return u, trial
    if not anti_windup:
        return clamp(u, out_min, out_max), trial
    return clamp(kp * error + ki * integrator, out_min, out_max), integrator


@dataclass
class PiController:
    kp: float
    ki: float
    integrator: float = 0.0
    output_min: float = -math.inf
    output_max: float = math.inf
    enabled: bool = True
    anti_windup: bool = True
    hold_value: float = 0.0

    def __post_init__(self):
        if self.output_min > self.output_max:
            raise ValueError("output_min must not exceed output_max")

    def reset(self, integrator: float = 0.0):
        self.integrator = integrator
        self.hold_value = 0.0


def pi_step(controller: PiController, error: float, dt: float) -> float:
    """Advance ``controller`` by one sample and return its output.

    A disabled controller returns its hold value (the last output) and
    leaves its state untouched.
    """
    if not controller.enabled:
        return controller.hold_value
    out, controller.integrator = pi_update(
        controller.kp, controller.ki, controller.integrator, controller.output_min,
        controller.output_max, error, dt, controller.anti_windup)
    controller.hold_value = out
    return out


@dataclass
class FirstOrderLowPass:
    cutoff_hz: float
    dt: float
    state: float = 0.0

    def __post_init__(self):
        if not self.cutoff_hz > 0 or not self.dt > 0:
            raise ValueError("cutoff and dt must be > 0")
        self.alpha = lowpass_coefficient(self.cutoff_hz, self.dt)

    def step(self, x: float) -> float:
        self.state += self.alpha * (x - self.state)
        return self.state


@jit
def actuator_update(pzt_freq, dac_filtered, eom_phase, pzt_command, eom_command,
                    a_pzt, a_dac, a_eom, pzt_range, eom_range, dac_lsb):
    """Advance PZT and EOM one controller period.

    The PZT frequency follows its command through a first-order response.
    The EOM command is quantized by the DAC, smoothed by the DAC output
    filter and then by the modulator's own first-order response.
    """
    pzt_freq = clamp(pzt_freq + a_pzt * (pzt_command - pzt_freq), -pzt_range, pzt_range)
    if dac_lsb > 0.0:
        dac_value = math.floor(eom_command / dac_lsb + 0.5) * dac_lsb
    else:
        dac_value = eom_command
    dac_filtered = dac_filtered + a_dac * (dac_value - dac_filtered)
    eom_phase = clamp(eom_phase + a_eom * (dac_filtered - eom_phase), -eom_range, eom_range)
    return pzt_freq, dac_filtered, eom_phase


@dataclass(frozen=True)
class ActuatorState:
    """LO actuators: PZT frequency shift (rad/s) and EOM phase (rad)."""

    pzt_freq: float = 0.0
    eom_phase: float = 0.0
    dac_filtered: float = 0.0
    pzt_bandwidth_hz: float = 1e3
    pzt_range: float = 2 * math.pi * 1e9
    eom_bandwidth_hz: float = 1e6
    eom_range: float = 4 * math.pi
    dac_filter_hz: float = 5e6
    dac_bits: int = 16

    @property
    def dac_lsb(self) -> float:
        if self.dac_bits <= 0:
            return 0.0
        return 2.0 * self.eom_range / (1 << self.dac_bits)

    def step(self, pzt_command: float, eom_command: float, dt: float) -> "ActuatorState":
        pzt, dac, eom = actuator_update(
            self.pzt_freq, self.dac_filtered, self.eom_phase, pzt_command, eom_command,
            lowpass_coefficient(self.pzt_bandwidth_hz, dt), lowpass_coefficient(self.dac_filter_hz, dt),
            lowpass_coefficient(self.eom_bandwidth_hz, dt), self.pzt_range, self.eom_range,
            self.dac_lsb)
        return replace(self, pzt_freq=pzt, dac_filtered=dac, eom_phase=eom)
