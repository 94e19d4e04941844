"""Optical signal models: lasers, squeezer, fiber, pilot tone and homodyne front-end.

Squeezed light is represented statistically by its quadrature variances at the
measurement frequency; only the pilot tone is carried as a field-resolved
waveform.  All variances are in shot-noise units (vacuum = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299792458.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LaserState:
    """Instantaneous phase and frequency of one laser.

    ``phase`` is in radians.  Frequencies are angular (rad/s) offsets from
    the nominal carrier; ``linewidth`` is the Lorentzian FWHM in Hz that sets
    the Wiener phase diffusion ``2*pi*linewidth`` rad^2/s.
    """

    phase: float = 0.0
    angular_frequency_offset: float = 0.0
    linewidth: float = 0.0
    pzt_freq_shift: float = 0.0
    temperature_freq_shift: float = 0.0

    def __post_init__(self):
        for name in ("phase", "angular_frequency_offset", "linewidth",
                     "pzt_freq_shift", "temperature_freq_shift"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"LaserState.{name} must be finite")
        if self.linewidth < 0:
            raise ValueError("LaserState.linewidth must be >= 0")

    @property
    def total_frequency(self) -> float:
        return self.angular_frequency_offset + self.pzt_freq_shift + self.temperature_freq_shift

    @property
    def phase_diffusion(self) -> float:
        """Phase-increment variance per second (rad^2/s)."""
        return TWO_PI * self.linewidth


def step_laser(state: LaserState, dt: float, rng: np.random.Generator) -> LaserState:
    """Advance a laser by ``dt`` seconds.

    The phase moves by the total frequency times ``dt`` plus a Gaussian
    increment of variance ``2*pi*linewidth*dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    increment = state.total_frequency * dt
    if state.linewidth > 0:
        increment += math.sqrt(state.phase_diffusion * dt) * rng.standard_normal()
    return replace(state, phase=state.phase + increment)


def wiener_phase_path(state: LaserState, dt: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Phase samples of ``n`` successive :func:`step_laser` calls, vectorized."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    steps = np.full(n, state.total_frequency * dt)
    if state.linewidth > 0:
        steps += math.sqrt(state.phase_diffusion * dt) * rng.standard_normal(n)
    return state.phase + np.cumsum(steps)


@dataclass(frozen=True)
class SqueezerModel:
    """Below-threshold OPO producing squeezed vacuum.

    Powers in mW, frequencies in Hz.  ``gain_perturbation`` is the
    fractional reduction of the normalized pump amplitude, used to emulate a
    phase-matching temperature drift (0 disables it).
    """

    pump_power: float = 2.6
    threshold_power: float = 5.12
    hwhm_bandwidth: float = 66e6
    efficiency: float = 0.64
    measurement_frequency: float = 12.2e6
    gain_perturbation: float = 0.0

    def __post_init__(self):
        if not self.threshold_power > 0:
            raise ValueError("threshold_power must be > 0")
        if not 0 <= self.pump_power < self.threshold_power:
            raise ValueError(
                f"pump_power {self.pump_power} mW must lie in [0, threshold_power="
                f"{self.threshold_power} mW)")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if not self.hwhm_bandwidth > 0:
            raise ValueError("hwhm_bandwidth must be > 0")
        if self.measurement_frequency < 0:
            raise ValueError("measurement_frequency must be >= 0")
        if not 0 <= self.gain_perturbation < 1:
            raise ValueError("gain_perturbation must lie in [0, 1)")

    @property
    def normalized_pump(self) -> float:
        """F_g = sqrt(P_pump / P_threshold), optionally perturbed."""
        return math.sqrt(self.pump_power / self.threshold_power) * (1.0 - self.gain_perturbation)

    def with_efficiency(self, efficiency: float) -> "SqueezerModel":
        return replace(self, efficiency=efficiency)


def opo_variances(model: SqueezerModel) -> tuple[float, float]:
    """Squeezed and anti-squeezed variances without phase noise.

    Returns ``(v_minus0, v_plus0)`` from the standard OPO spectrum
    ``1 -+ 4 eta F / ((1 +- F)^2 + (f/f_sqz)^2)``.
    """
    fg = model.normalized_pump
    if fg >= 1.0:
        raise ValueError("pump at or above threshold: anti-squeezing diverges")
    detuning = (model.measurement_frequency / model.hwhm_bandwidth) ** 2
    v_minus = 1.0 - 4.0 * model.efficiency * fg / ((1.0 + fg) ** 2 + detuning)
    v_plus = 1.0 + 4.0 * model.efficiency * fg / ((1.0 - fg) ** 2 + detuning)
    return v_minus, v_plus


def apply_phase_noise(v_minus0, v_plus0, sigma):
    """Average the quadrature variances over Gaussian phase jitter ``sigma`` (rad).

    Works elementwise on arrays.  The sum ``V- + V+`` is preserved.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    keep = 0.5 * (1.0 + np.exp(-2.0 * sigma**2))
    mix = 1.0 - keep
    v_minus = v_minus0 * keep + v_plus0 * mix
    v_plus = v_plus0 * keep + v_minus0 * mix
    if np.ndim(v_minus) == 0:
        return float(v_minus), float(v_plus)
    return v_minus, v_plus


def quadrature_variance_at(v_minus0, v_plus0, theta):
    """Variance measured at quadrature angle ``theta``: V- cos^2 + V+ sin^2."""
    c = np.cos(theta)
    s = np.sin(theta)
    return v_minus0 * c * c + v_plus0 * s * s


def monte_carlo_phase_average(v_minus0, v_plus0, sigma, n: int, rng: np.random.Generator,
                              sample_quadrature: bool = True, chunk: int = 1 << 20) -> float:
    """Monte-Carlo estimate of the variance under Gaussian phase jitter.

    Draws ``theta ~ N(0, sigma^2)``.  With ``sample_quadrature`` each draw
    also samples the measured quadrature ``sqrt(V-) cos(theta) a + sqrt(V+)
    sin(theta) b`` (``a, b`` standard normal) and the second moment is
    returned; otherwise the conditional variance ``V(theta)`` is averaged.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 0.0
    done = 0
    sm, sp = math.sqrt(v_minus0), math.sqrt(v_plus0)
    while done < n:
        m = min(chunk, n - done)
        theta = sigma * rng.standard_normal(m)
        if sample_quadrature:
            x = sm * np.cos(theta) * rng.standard_normal(m) + sp * np.sin(theta) * rng.standard_normal(m)
            total += float(np.dot(x, x))
        else:
            total += float(np.sum(quadrature_variance_at(v_minus0, v_plus0, theta)))
        done += m
    return total / n


@dataclass(frozen=True)
class FiberChannel:
    """Single-mode fiber span.

    ``phase_drift_coefficient`` (rad^2 / (s km)) sets a random-walk phase
    disturbance whose variance grows linearly with time and length.
    """

    length: float = 0.01
    attenuation_coefficient: float = 0.18
    phase_drift_coefficient: float = 0.0

    def __post_init__(self):
        if not self.length >= 0:
            raise ValueError("fiber length must be >= 0 km")
        if self.attenuation_coefficient < 0:
            raise ValueError("attenuation_coefficient must be >= 0")
        if self.phase_drift_coefficient < 0:
            raise ValueError("phase_drift_coefficient must be >= 0")

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.attenuation_coefficient * self.length / 10.0)

    @property
    def phase_diffusion(self) -> float:
        """Phase-drift variance per second (rad^2/s) for the whole span."""
        return self.phase_drift_coefficient * self.length

    def concatenate(self, other: "FiberChannel") -> "FiberChannel":
        """Splice two spans with identical per-km parameters."""
        if (other.attenuation_coefficient != self.attenuation_coefficient
                or other.phase_drift_coefficient != self.phase_drift_coefficient):
            raise ValueError("can only concatenate spans with identical per-km parameters")
        return replace(self, length=self.length + other.length)


def fiber_transmit(channel: FiberChannel, powers, phase: float = 0.0,
                   dt: float = 0.0, rng: np.random.Generator | None = None):
    """Propagate optical powers through ``channel`` for a time step ``dt``.

    Returns ``(attenuated_powers, phase_after)``.  The added phase is a
    random-walk step of variance ``phase_drift_coefficient * length * dt``;
    with ``dt == 0`` or no drift the phase is returned unchanged.
    """
    if channel.length < 0:
        raise ValueError("negative fiber length")
    attenuated = np.asarray(powers, dtype=float) * channel.transmission
    variance = channel.phase_diffusion * dt
    if variance > 0:
        if rng is None:
            raise ValueError("rng required for a drifting fiber")
        phase = phase + math.sqrt(variance) * rng.standard_normal()
    if attenuated.ndim == 0:
        attenuated = float(attenuated)
    return attenuated, phase


@dataclass(frozen=True)
class PilotTone:
    offset_frequency: float = 40e6
    power_at_source: float = 5e-6

    def __post_init__(self):
        if not self.offset_frequency > 0:
            raise ValueError("pilot offset_frequency must be > 0")
        if self.power_at_source < 0:
            raise ValueError("pilot power must be >= 0")


@dataclass(frozen=True)
class HomodyneReceiver:
    """Balanced homodyne detector followed by a linear front-end amplifier.

    ``front_end_gain`` converts optical beat amplitude sqrt(W*W) into volts;
    the electronic noise sits ``electronic_noise_clearance`` dB below the shot
    noise.  Samples clip at +-``full_scale``.
    """

    lo_power: float = 1e-3
    detection_efficiency: float = 1.0
    electronic_noise_clearance: float = 15.0
    sample_rate: float = 200e6
    phase_set: float = 0.0
    front_end_gain: float = 2000.0
    full_scale: float = 1.0
    wavelength: float = 1550.12e-9

    def __post_init__(self):
        if not self.lo_power > 0:
            raise ValueError("lo_power must be > 0")
        if not 0 < self.detection_efficiency <= 1:
            raise ValueError("detection_efficiency must lie in (0, 1]")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if not self.full_scale > 0:
            raise ValueError("full_scale must be > 0")

    @property
    def photon_energy(self) -> float:
        return PLANCK * LIGHT_SPEED / self.wavelength

    @property
    def shot_noise_std(self) -> float:
        """Shot-noise standard deviation per sample, in volts.

        Scaled consistently with the ``G sqrt(P_p P_LO)`` beat amplitude of a
        balanced detector (factor 2 absorbed into the gain on both).
        """
        return self.front_end_gain * math.sqrt(self.photon_energy * self.lo_power * self.sample_rate / 4.0)

    @property
    def electronic_noise_std(self) -> float:
        return self.shot_noise_std * 10.0 ** (-self.electronic_noise_clearance / 20.0)

    def pilot_amplitude(self, pilot_power: float) -> float:
        """Beat-note amplitude in volts for a pilot of ``pilot_power`` W at the detector."""
        return self.front_end_gain * math.sqrt(pilot_power * self.detection_efficiency * self.lo_power)


def overall_efficiency(squeezer: SqueezerModel, fiber: FiberChannel,
                       receiver: HomodyneReceiver | None = None) -> float:
    """Setup efficiency times fiber transmission times detection efficiency."""
    eta = squeezer.efficiency * fiber.transmission
    if receiver is not None:
        eta *= receiver.detection_efficiency
    return eta


def received_squeezer(squeezer: SqueezerModel, fiber: FiberChannel,
                      receiver: HomodyneReceiver | None = None) -> SqueezerModel:
    """The squeezer as seen at the detector, with all losses folded into eta."""
    return squeezer.with_efficiency(overall_efficiency(squeezer, fiber, receiver))


def homodyne_output(pilot: PilotTone, receiver: HomodyneReceiver,
                    lasers: tuple[LaserState, LaserState], squeezer: SqueezerModel,
                    t: float, rng: np.random.Generator, pilot_power: float | None = None,
                    noiseless: bool = False) -> float:
    """One homodyne detector voltage sample at time ``t``.

    ``lasers`` is ``(signal, lo)``; the optical relative phase is
    ``signal.phase - lo.phase`` and also sets the measured quadrature angle
    (zero is the squeezed quadrature).  ``pilot_power`` is the post-fiber
    power and defaults to the power at the source.
    """
    signal, lo = lasers
    psi = signal.phase - lo.phase
    power = pilot.power_at_source if pilot_power is None else pilot_power
    out = receiver.pilot_amplitude(power) * math.cos(TWO_PI * pilot.offset_frequency * t + psi)
    if not noiseless:
        v_minus0, v_plus0 = opo_variances(squeezer)
        var = float(quadrature_variance_at(v_minus0, v_plus0, psi))
        out += receiver.shot_noise_std * math.sqrt(var) * rng.standard_normal()
        out += receiver.electronic_noise_std * rng.standard_normal()
    return float(np.clip(out, -receiver.full_scale, receiver.full_scale))


def homodyne_samples(t, psi, pilot: PilotTone, receiver: HomodyneReceiver,
                     squeezer: SqueezerModel | None, rng: np.random.Generator | None,
                     pilot_power: float | None = None, electronic: bool = True):
    """Vectorized :func:`homodyne_output` over time and phase arrays.

    ``squeezer=None`` gives the vacuum quadrature; ``rng=None`` disables all
    noise.
    """
    t = np.asarray(t, dtype=float)
    psi = np.broadcast_to(np.asarray(psi, dtype=float), t.shape)
    power = pilot.power_at_source if pilot_power is None else pilot_power
    out = receiver.pilot_amplitude(power) * np.cos(TWO_PI * pilot.offset_frequency * t + psi)
    if rng is not None:
        if squeezer is None:
            var = np.ones_like(t)
        else:
            var = quadrature_variance_at(*opo_variances(squeezer), psi)
        out = out + receiver.shot_noise_std * np.sqrt(var) * rng.standard_normal(t.shape)
        if electronic:
            out = out + receiver.electronic_noise_std * rng.standard_normal(t.shape)
    return np.clip(out, -receiver.full_scale, receiver.full_scale)


def vacuum_trace(receiver: HomodyneReceiver, n: int, rng: np.random.Generator) -> np.ndarray:
    """Shot-noise calibration trace: LO only, signal port blocked."""
    x = receiver.shot_noise_std * rng.standard_normal(n)
    x += receiver.electronic_noise_std * rng.standard_normal(n)
    return np.clip(x, -receiver.full_scale, receiver.full_scale)


def dark_trace(receiver: HomodyneReceiver, n: int, rng: np.random.Generator) -> np.ndarray:
    """Electronic-noise-only trace (LO blocked)."""
    x = receiver.electronic_noise_std * rng.standard_normal(n)
    return np.clip(x, -receiver.full_scale, receiver.full_scale)
