"""Closed-loop simulation: optics, down-mixer, fixed-point controller and actuators.

The plant is advanced once per controller period ``T_s``.  Inside each period
``decimation`` homodyne samples are synthesized with the optical phase
interpolated linearly between period boundaries and then smoothed by two
first-order sections (``phase_smoothing_hz``), which keeps interpolation
images out of the squeezing band near the pilot.  The down-mixer output is
sampled by the ADC at the last sample of the period and handed to
:func:`controller_tick`; the resulting commands act on the plant from the
next period on.

Random inputs are drawn in Python from independent ``SeedSequence`` children
and passed to the compiled kernel, so the kernel itself is deterministic.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .._jit import jit
from ..optics import opo_variances, received_squeezer
from .control import LockState, actuator_update, clamp, lowpass_coefficient, pi_update
from .fixedpoint import (CORDIC_ANGLE_BITS, CORDIC_GUARD_BITS, adc_quantize, cordic_angle_table,
                         cordic_vector, saturating_add, unwrap_increment)

TWO_PI = 2.0 * math.pi

# controller float state
C_PZT_CMD, C_EOM_CMD, C_TEMP, C_SLOW_I, C_MED_I, C_FAST_I, C_FAST_LPF, C_F_EST, C_DF = range(9)
N_CF = 9
# controller int state
(K_FSM, K_PREV, K_U, K_SET, K_WRAPS, K_SLIPS, K_HOLD, K_DROPS, K_RANGE, K_PTR, K_TICK,
 K_FULL_TICK, K_FLAGS, K_LOST) = range(14)
N_CI = 14
# plant float state
P_SIG, P_LO, P_FIB, P_FIB_LO, P_ACT, P_PZT, P_DAC, P_EOM, P_PSI, P_SM1, P_SM2 = range(11)
N_PF = 11
# plant int state
Q_M, Q_SIGN, Q_CROSS, Q_GATE = range(4)
N_PI = 4

FLAG_WRAP = 1
FLAG_DROPOUT = 2
FLAG_RANGE = 4
FLAG_SLIP = 8

ControllerParams = namedtuple("ControllerParams", [
    "enabled", "coarse_enabled", "ts", "phase_bits", "unwrap_bits", "lsb", "table",
    "guard_bits", "angle_bits", "latency", "error_scale", "slow_kp", "slow_ki", "medium_kp",
    "medium_ki", "fast_kp", "fast_ki", "a_fast", "anti_windup", "pzt_range", "eom_range",
    "capture_hz", "coarse_target_hz", "coarse_step", "fl_threshold_hz", "fl_hold_ticks",
    "f_alpha"])

PlantParams = namedtuple("PlantParams", [
    "sub_n", "fpn", "phi_set", "mixer_amplitude", "pilot_amp", "shot_std", "el_std",
    "full_scale", "v_minus", "v_plus", "sos", "adc_lsb", "adc_bits", "a_smooth",
    "sig_step", "lo_step", "fib_step", "fib_lo_step", "omega0", "regular", "a_pzt",
    "a_dac", "a_eom", "pzt_range", "eom_range", "dac_lsb", "gate_ticks", "gate_s", "f_p"])


@jit
def _enter_frequency_lock(cf, ci, p):
    # bumpless: the slow integrator takes over the present PZT command
    cf[C_MED_I] = 0.0
    cf[C_FAST_I] = 0.0
    cf[C_FAST_LPF] = 0.0
    turn = 1 << p.phase_bits
    ci[K_SET] = int(math.floor(ci[K_U] / turn + 0.5)) * turn
    if p.slow_ki > 0.0:
        cf[C_SLOW_I] = cf[C_PZT_CMD] / p.slow_ki
    ci[K_HOLD] = 0
    ci[K_FSM] = 1


@jit
def _enter_full_lock(cf, ci, delayed, p):
    # re-reference onto the nearest turn and absorb the proportional jump
    turn = 1 << p.phase_bits
    old_err = (delayed - ci[K_SET]) * p.lsb
    ci[K_SET] = int(math.floor(ci[K_U] / turn + 0.5)) * turn
    new_err = (delayed - ci[K_SET]) * p.lsb
    if p.slow_ki > 0.0:
        cf[C_SLOW_I] += p.slow_kp * (old_err - new_err) / p.slow_ki
    cf[C_MED_I] = 0.0
    cf[C_FAST_I] = cf[C_EOM_CMD] / p.fast_ki if p.fast_ki > 0.0 else 0.0
    cf[C_FAST_LPF] = 0.0
    ci[K_FSM] = 2
    if ci[K_FULL_TICK] < 0:
        ci[K_FULL_TICK] = ci[K_TICK]


@jit
def controller_tick(cf, ci, buf, p, i_code, q_code, gate, df_hz):
    """One controller period.

    Updates the phase estimate from the ADC codes, runs the lock state
    machine and the active PI paths, and leaves the PZT (rad/s) and EOM (rad)
    commands in ``cf``.  ``gate`` marks a fresh beat-frequency reading
    ``df_hz`` from the counter.  Returns the wrapped phase word.
    """
    flags = 0
    first = ci[K_TICK] == 0
    if i_code == 0 and q_code == 0:
        word = ci[K_PREV]
        flags |= FLAG_DROPOUT
        ci[K_DROPS] += 1
    else:
        word = cordic_vector(q_code, i_code, p.table, p.guard_bits, p.angle_bits, p.phase_bits)
    if first:
        ci[K_PREV] = word
        ci[K_U] = word
        for k in range(buf.shape[0]):
            buf[k] = word
        ci[K_SET] = 0
    inc, wrapped = unwrap_increment(ci[K_PREV], word, p.phase_bits)
    acc, saturated = saturating_add(ci[K_U], inc, p.unwrap_bits)
    if wrapped:
        flags |= FLAG_WRAP
        ci[K_WRAPS] += 1
        if ci[K_FSM] == 2:
            flags |= FLAG_SLIP
            ci[K_SLIPS] += 1
    if saturated:
        flags |= FLAG_RANGE
        ci[K_RANGE] = 1
    ci[K_PREV] = word
    ci[K_U] = acc
    if p.latency > 0:
        delayed = buf[ci[K_PTR]]
        buf[ci[K_PTR]] = acc
        ci[K_PTR] = (ci[K_PTR] + 1) % p.latency
    else:
        delayed = acc
    cf[C_F_EST] += p.f_alpha * (inc - cf[C_F_EST])
    if gate:
        cf[C_DF] = df_hz
    ci[K_TICK] += 1
    ci[K_FLAGS] = flags
    if not p.enabled:
        return word

    state = ci[K_FSM]
    if gate and (state == 1 or state == 2) and abs(df_hz) > p.capture_hz:
        ci[K_FSM] = 3
        ci[K_LOST] += 1
        return word
    if state == 0:
        if gate:
            if abs(df_hz) > p.coarse_target_hz:
                if p.coarse_enabled:
                    step = min(p.coarse_step, abs(df_hz) * TWO_PI)
                    cf[C_TEMP] += step if df_hz > 0 else -step
                elif abs(df_hz) > p.capture_hz:
                    ci[K_FSM] = 3
                    ci[K_LOST] += 1
                else:
                    _enter_frequency_lock(cf, ci, p)
            else:
                _enter_frequency_lock(cf, ci, p)
        return word
    if state == 3:
        if gate:
            if p.coarse_enabled:
                ci[K_FSM] = 0
            elif abs(df_hz) <= p.capture_hz:
                _enter_frequency_lock(cf, ci, p)
        return word

    e_slow = (delayed - ci[K_SET]) * p.lsb
    slow_out, cf[C_SLOW_I] = pi_update(p.slow_kp, p.slow_ki, cf[C_SLOW_I], -p.pzt_range,
                                       p.pzt_range, e_slow, p.ts, p.anti_windup)
    if state == 1:
        cf[C_PZT_CMD] = slow_out
        f_hz = cf[C_F_EST] * p.lsb / (TWO_PI * p.ts)
        if abs(f_hz) < p.fl_threshold_hz:
            ci[K_HOLD] += 1
        else:
            ci[K_HOLD] = 0
        if ci[K_HOLD] >= p.fl_hold_ticks:
            _enter_full_lock(cf, ci, delayed, p)
        return word

    e_lin = q_code / p.error_scale
    med_out, cf[C_MED_I] = pi_update(p.medium_kp, p.medium_ki, cf[C_MED_I], -p.pzt_range,
                                     p.pzt_range, e_lin, p.ts, p.anti_windup)
    cf[C_PZT_CMD] = clamp(slow_out + med_out, -p.pzt_range, p.pzt_range)
    cf[C_FAST_LPF] += p.a_fast * (e_lin - cf[C_FAST_LPF])
    fast_out, cf[C_FAST_I] = pi_update(p.fast_kp, p.fast_ki, cf[C_FAST_I], -p.eom_range,
                                       p.eom_range, cf[C_FAST_LPF], p.ts, p.anti_windup)
    cf[C_EOM_CMD] = fast_out
    return word


@jit
def _sos_step(sos, z, x):
    """Direct-form II transposed cascade, same layout as ``scipy.signal.sosfilt``."""
    for s in range(sos.shape[0]):
        y = sos[s, 0] * x + z[s, 0]
        z[s, 0] = sos[s, 1] * x - sos[s, 4] * y + z[s, 1]
        z[s, 1] = sos[s, 2] * x - sos[s, 5] * y
        x = y
    return x


@jit
def _run_chunk(pf, pi_, cf, ci, buf, zi, zq, pp, cp, n_lo, n_sig, n_fib, n_fib_lo, w_q, w_e,
               out_hd, out_i, out_q, out_word, out_u, out_pzt_cmd, out_eom_cmd, out_pzt,
               out_eom, out_fsm, out_theta, out_flags, record_hd):
    ticks = out_i.shape[0]
    nsub = pp.sub_n
    for n in range(ticks):
        # plant update with the commands of the previous period
        pzt, dac, eom = actuator_update(
            pf[P_PZT], pf[P_DAC], pf[P_EOM], cf[C_PZT_CMD], cf[C_EOM_CMD], pp.a_pzt, pp.a_dac,
            pp.a_eom, pp.pzt_range, pp.eom_range, pp.dac_lsb)
        pf[P_PZT] = pzt
        pf[P_DAC] = dac
        pf[P_EOM] = eom
        dt = cp.ts
        pf[P_ACT] += (pf[P_PZT] + cf[C_TEMP]) * dt
        common = pp.sig_step * n_sig[n]
        pf[P_SIG] += pp.omega0 * dt + common
        if pp.regular:
            pf[P_LO] += common
        else:
            pf[P_LO] += pp.lo_step * n_lo[n]
        pf[P_FIB] += pp.fib_step * n_fib[n]
        pf[P_FIB_LO] += pp.fib_lo_step * n_fib_lo[n]
        psi0 = pf[P_PSI]
        psi1 = pf[P_SIG] + pf[P_FIB] - pf[P_LO] - pf[P_FIB_LO] - pf[P_ACT] - pf[P_EOM]
        pf[P_PSI] = psi1

        fi = 0.0
        fq = 0.0
        for k in range(nsub):
            x = psi0 + (psi1 - psi0) * (k + 1) / nsub
            pf[P_SM1] += pp.a_smooth * (x - pf[P_SM1])
            pf[P_SM2] += pp.a_smooth * (pf[P_SM1] - pf[P_SM2])
            th = pf[P_SM2]
            m = pi_[Q_M]
            frac = m * pp.fpn
            carrier = TWO_PI * (frac - math.floor(frac))
            c = math.cos(th)
            s = math.sin(th)
            var = pp.v_minus * c * c + pp.v_plus * s * s
            j = n * nsub + k
            hd = (pp.pilot_amp * math.cos(carrier + th) + pp.shot_std * math.sqrt(var) * w_q[j]
                  + pp.el_std * w_e[j])
            if hd > pp.full_scale:
                hd = pp.full_scale
            elif hd < -pp.full_scale:
                hd = -pp.full_scale
            if record_hd:
                out_hd[j] = hd
            sign = 1 if hd >= 0.0 else -1
            if sign != pi_[Q_SIGN]:
                pi_[Q_CROSS] += 1
                pi_[Q_SIGN] = sign
            ref = carrier + pp.phi_set
            fi = _sos_step(pp.sos, zi, hd * pp.mixer_amplitude * math.cos(ref))
            fq = _sos_step(pp.sos, zq, -hd * pp.mixer_amplitude * math.sin(ref))
            pi_[Q_M] = m + 1

        i_code = adc_quantize(fi, pp.adc_lsb, pp.adc_bits)
        q_code = adc_quantize(fq, pp.adc_lsb, pp.adc_bits)
        pi_[Q_GATE] += 1
        gate = False
        df = 0.0
        if pi_[Q_GATE] >= pp.gate_ticks:
            gate = True
            df = pi_[Q_CROSS] / (2.0 * pp.gate_s) - pp.f_p
            pi_[Q_GATE] = 0
            pi_[Q_CROSS] = 0
        word = controller_tick(cf, ci, buf, cp, i_code, q_code, gate, df)

        out_i[n] = i_code
        out_q[n] = q_code
        out_word[n] = word
        out_u[n] = ci[K_U]
        out_pzt_cmd[n] = cf[C_PZT_CMD]
        out_eom_cmd[n] = cf[C_EOM_CMD]
        out_pzt[n] = pf[P_PZT]
        out_eom[n] = pf[P_EOM]
        out_fsm[n] = ci[K_FSM]
        out_theta[n] = pf[P_SM2] - pp.phi_set
        out_flags[n] = ci[K_FLAGS]


@dataclass
class SimulationTrace:
    """Time series of one closed-loop (or open-loop) run.

    Controller-rate columns have one entry per period ``sample_period``;
    ``hd`` is at ``sample_rate``.  ``theta`` is the true residual optical
    phase relative to the setpoint (rad); ``wrapped``/``unwrapped`` are the
    controller's fixed-point estimates (phase LSB units).
    """

    sample_rate: float
    sample_period: float
    phase_lsb: float
    phi_set: float
    hd: np.ndarray
    i: np.ndarray
    q: np.ndarray
    wrapped: np.ndarray
    unwrapped: np.ndarray
    pzt_command: np.ndarray
    eom_command: np.ndarray
    pzt_freq: np.ndarray
    eom_phase: np.ndarray
    fsm_state: np.ndarray
    theta: np.ndarray
    flags: np.ndarray
    vacuum: np.ndarray | None = None
    dark: np.ndarray | None = None
    full_lock_index: int = -1
    cycle_slips: int = 0
    wrap_events: int = 0
    dropouts: int = 0
    lost_lock_events: int = 0
    range_flag: bool = False
    final_state: int = 0
    controller_enabled: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return self.i.shape[0]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_ticks) * self.sample_period

    @property
    def locked(self) -> bool:
        return self.full_lock_index >= 0 and int(self.fsm_state[-1]) == LockState.FULL_LOCK

    def analysis_start(self, settle_time: float) -> int:
        """First controller index of the analysis window (lock + settle), or -1."""
        base = self.full_lock_index if self.controller_enabled else 0
        if base < 0:
            return -1
        start = base + int(round(settle_time / self.sample_period))
        return start if start < self.n_ticks else -1

    def hd_window(self, start_tick: int) -> np.ndarray:
        n = self.hd.shape[0] // self.n_ticks
        return self.hd[start_tick * n:]

    def residual_sigma(self, start_tick: int) -> float:
        """Standard deviation of the true residual phase over the window."""
        seg = self.theta[start_tick:]
        return float(np.std(seg))


def _error_scale(scenario) -> float:
    """ADC counts per radian of ``q`` at the gain reference length."""
    c = scenario.controller
    rx = scenario.receiver.model()
    ref = scenario.fiber.model()
    ref = type(ref)(c.error_reference_length_km, ref.attenuation_coefficient,
                    ref.phase_drift_coefficient)
    amp = rx.pilot_amplitude(scenario.pilot.power_at_source_w * ref.transmission)
    lsb = 2.0 * c.adc_full_scale_v / (1 << c.adc_bits)
    return 0.5 * amp * c.mixer_amplitude / lsb


def build_params(scenario, phi_set: float | None = None, enabled: bool | None = None):
    """Kernel parameter tuples for a scenario."""
    c = scenario.controller
    rx = scenario.receiver.model()
    fiber = scenario.fiber.model()
    la = scenario.lasers
    fs = rx.sample_rate
    ts = c.decimation / fs
    phi = rx.phase_set if phi_set is None else phi_set
    lsb = TWO_PI / (1 << c.phase_bits)
    noiseless = scenario.noiseless
    sq = received_squeezer(scenario.squeezer.model(), fiber, rx)
    v_minus, v_plus = opo_variances(sq)
    pilot_power = scenario.pilot.power_at_source_w * fiber.transmission
    if la.lo_mode == "regular":
        lo_fiber = la.regular_lo_fiber_length_km * fiber.phase_drift_coefficient
        regular = 1
    else:
        lo_fiber = 0.0
        regular = 0
    on = c.enabled if enabled is None else enabled
    gate_ticks = max(1, int(round(c.counter_gate_s / ts)))
    cp = ControllerParams(
        enabled=bool(on), coarse_enabled=bool(c.coarse_tuning_enabled), ts=ts,
        phase_bits=c.phase_bits, unwrap_bits=c.unwrap_bits, lsb=lsb,
        table=cordic_angle_table(c.cordic_iterations, CORDIC_ANGLE_BITS),
        guard_bits=CORDIC_GUARD_BITS, angle_bits=CORDIC_ANGLE_BITS, latency=c.latency_samples,
        error_scale=_error_scale(scenario), slow_kp=c.slow_kp, slow_ki=c.slow_ki,
        medium_kp=c.medium_kp, medium_ki=c.medium_ki, fast_kp=c.fast_kp, fast_ki=c.fast_ki,
        a_fast=lowpass_coefficient(c.fast_filter_hz, ts), anti_windup=bool(c.anti_windup),
        pzt_range=TWO_PI * c.pzt_range_hz, eom_range=c.eom_range_rad,
        capture_hz=c.capture_range_hz, coarse_target_hz=c.coarse_target_hz,
        coarse_step=TWO_PI * c.coarse_step_hz, fl_threshold_hz=c.frequency_lock_threshold_hz,
        fl_hold_ticks=max(1, int(round(c.frequency_lock_hold_s / ts))),
        f_alpha=lowpass_coefficient(1.0 / (TWO_PI * c.frequency_estimate_tau_s), ts))
    pp = PlantParams(
        sub_n=c.decimation, fpn=scenario.pilot.offset_frequency_hz / fs, phi_set=phi,
        mixer_amplitude=c.mixer_amplitude, pilot_amp=rx.pilot_amplitude(pilot_power),
        shot_std=0.0 if noiseless else rx.shot_noise_std,
        el_std=0.0 if noiseless else rx.electronic_noise_std, full_scale=rx.full_scale,
        v_minus=v_minus, v_plus=v_plus,
        sos=signal.butter(c.mixer_order, c.mixer_cutoff_hz, fs=fs, output="sos"),
        adc_lsb=2.0 * c.adc_full_scale_v / (1 << c.adc_bits), adc_bits=c.adc_bits,
        a_smooth=lowpass_coefficient(c.phase_smoothing_hz, 1.0 / fs),
        sig_step=0.0 if noiseless else math.sqrt(TWO_PI * la.signal_linewidth_hz * ts),
        lo_step=0.0 if noiseless else math.sqrt(TWO_PI * la.lo_linewidth_hz * ts),
        fib_step=0.0 if noiseless else math.sqrt(fiber.phase_diffusion * ts),
        fib_lo_step=0.0 if noiseless else math.sqrt(lo_fiber * ts),
        omega0=TWO_PI * la.initial_frequency_offset_hz, regular=regular,
        a_pzt=lowpass_coefficient(c.pzt_bandwidth_hz, ts),
        a_dac=lowpass_coefficient(c.dac_filter_hz, ts),
        a_eom=lowpass_coefficient(c.eom_bandwidth_hz, ts),
        pzt_range=TWO_PI * c.pzt_range_hz, eom_range=c.eom_range_rad,
        dac_lsb=(2.0 * c.eom_range_rad / (1 << c.dac_bits)) if c.dac_bits > 0 else 0.0,
        gate_ticks=gate_ticks, gate_s=gate_ticks * ts, f_p=scenario.pilot.offset_frequency_hz)
    return pp, cp


def _settled_mixer_state(pp, psi, warmup: int = 4000):
    """Mixer filter state after ``warmup`` samples of the noiseless pilot at phase ``psi``.

    Starting from the DC steady state and replaying the pilot (including the
    2 f_p mixing product) before sample 0 removes the start-up transient.
    """
    zi_base = signal.sosfilt_zi(pp.sos)
    amp = 0.5 * pp.pilot_amp * pp.mixer_amplitude
    zi = zi_base * amp * math.cos(psi - pp.phi_set)
    zq = zi_base * amp * math.sin(psi - pp.phi_set)
    m = np.arange(-warmup, 0)
    frac = m * pp.fpn
    carrier = TWO_PI * (frac - np.floor(frac))
    hd = pp.pilot_amp * np.cos(carrier + psi)
    ref = carrier + pp.phi_set
    _, zi = signal.sosfilt(pp.sos, hd * pp.mixer_amplitude * np.cos(ref), zi=zi)
    _, zq = signal.sosfilt(pp.sos, -hd * pp.mixer_amplitude * np.sin(ref), zi=zq)
    return np.ascontiguousarray(zi), np.ascontiguousarray(zq)


def noise_streams(seed) -> dict:
    """Independent generators for every noise source of one acquisition."""
    names = ("laser_signal", "laser_lo", "fiber", "fiber_lo", "quadrature", "electronic",
             "vacuum", "dark")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: np.random.default_rng(child) for name, child in zip(names, ss.spawn(len(names)))}


def run_closed_loop(scenario, duration: float | None = None, seed=None, *,
                    phi_set: float | None = None, enabled: bool | None = None,
                    record_hd: bool = True, calibration: bool = True,
                    chunk_ticks: int = 1 << 14) -> SimulationTrace:
    """Simulate the full receiver for ``duration`` seconds.

    ``seed`` defaults to the scenario seed and may be a ``SeedSequence``.
    ``enabled=False`` gives the open-loop companion run; with the same seed it
    sees the same laser and fiber noise, without the deterministic initial
    frequency offset.  Never raises on lock failure: inspect ``locked``,
    ``final_state`` and ``diagnostics`` instead.
    """
    duration = scenario.duration_s if duration is None else duration
    seed = scenario.seed if seed is None else seed
    pp, cp = build_params(scenario, phi_set, enabled)
    if not cp.enabled:
        pp = pp._replace(omega0=0.0)
    c = scenario.controller
    ticks = int(round(duration / cp.ts))
    if ticks < 1:
        raise ValueError("duration shorter than one controller period")
    rngs = noise_streams(seed)
    nsub = pp.sub_n

    psi_start = pp.phi_set + scenario.lasers.initial_phase_rad
    pf = np.zeros(N_PF)
    pf[P_SIG] = psi_start
    pf[P_PSI] = psi_start
    pf[P_SM1] = psi_start
    pf[P_SM2] = psi_start
    pi_ = np.zeros(N_PI, dtype=np.int64)
    start_hd = pp.pilot_amp * math.cos(psi_start)
    pi_[Q_SIGN] = 1 if start_hd >= 0 else -1
    cf = np.zeros(N_CF)
    ci = np.zeros(N_CI, dtype=np.int64)
    ci[K_FSM] = int(LockState.from_label(c.initial_state))
    ci[K_FULL_TICK] = 0 if ci[K_FSM] == LockState.FULL_LOCK else -1
    buf = np.zeros(max(cp.latency, 1), dtype=np.int64)
    zi, zq = _settled_mixer_state(pp, psi_start)

    out = {
        "hd": np.zeros(ticks * nsub if record_hd else 1),
        "i": np.zeros(ticks, dtype=np.int64), "q": np.zeros(ticks, dtype=np.int64),
        "wrapped": np.zeros(ticks, dtype=np.int64), "unwrapped": np.zeros(ticks, dtype=np.int64),
        "pzt_command": np.zeros(ticks), "eom_command": np.zeros(ticks),
        "pzt_freq": np.zeros(ticks), "eom_phase": np.zeros(ticks),
        "fsm_state": np.zeros(ticks, dtype=np.int8), "theta": np.zeros(ticks),
        "flags": np.zeros(ticks, dtype=np.int8),
    }
    for start in range(0, ticks, chunk_ticks):
        n = min(chunk_ticks, ticks - start)
        sl = slice(start, start + n)
        hsl = slice(start * nsub, (start + n) * nsub) if record_hd else slice(0, 1)
        _run_chunk(pf, pi_, cf, ci, buf, zi, zq, pp, cp,
                   rngs["laser_lo"].standard_normal(n), rngs["laser_signal"].standard_normal(n),
                   rngs["fiber"].standard_normal(n), rngs["fiber_lo"].standard_normal(n),
                   rngs["quadrature"].standard_normal(n * nsub),
                   rngs["electronic"].standard_normal(n * nsub),
                   out["hd"][hsl], out["i"][sl], out["q"][sl], out["wrapped"][sl],
                   out["unwrapped"][sl], out["pzt_command"][sl], out["eom_command"][sl],
                   out["pzt_freq"][sl], out["eom_phase"][sl], out["fsm_state"][sl],
                   out["theta"][sl], out["flags"][sl], record_hd)

    vacuum = dark = None
    if calibration:
        from ..optics import dark_trace, vacuum_trace
        rx = scenario.receiver.model()
        if scenario.noiseless:
            vacuum = dark = None
        else:
            ncal = scenario.analysis.calibration_samples
            vacuum = vacuum_trace(rx, ncal, rngs["vacuum"])
            dark = dark_trace(rx, ncal, rngs["dark"])

    trace = SimulationTrace(
        sample_rate=1.0 / (cp.ts / nsub), sample_period=cp.ts, phase_lsb=cp.lsb,
        phi_set=pp.phi_set, vacuum=vacuum, dark=dark, full_lock_index=int(ci[K_FULL_TICK]),
        cycle_slips=int(ci[K_SLIPS]), wrap_events=int(ci[K_WRAPS]), dropouts=int(ci[K_DROPS]),
        lost_lock_events=int(ci[K_LOST]), range_flag=bool(ci[K_RANGE]),
        final_state=int(ci[K_FSM]), controller_enabled=bool(cp.enabled), **out)
    trace.diagnostics = {
        "final_state": LockState(trace.final_state).label,
        "full_lock_time_s": (trace.full_lock_index * cp.ts if trace.full_lock_index >= 0 else None),
        "cycle_slips": trace.cycle_slips,
        "lost_lock_events": trace.lost_lock_events,
        "dropouts": trace.dropouts,
        "range_flag": trace.range_flag,
        "temperature_shift_hz": float(cf[C_TEMP] / TWO_PI),
    }
    return trace
