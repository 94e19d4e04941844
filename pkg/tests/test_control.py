import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rlosim.lock.control import (ActuatorState, FirstOrderLowPass, LockState, PiController,
                                 lowpass_coefficient, pi_step, pi_update)


def test_proportional_only():
    assert pi_step(PiController(kp=1.0, ki=0.0), 0.5, 1e-7) == 0.5


def test_integrator_removes_steady_state_error():
    # pure integrator plant y' = u, constant setpoint
    c = PiController(kp=50.0, ki=400.0)
    y, dt = 0.0, 1e-4
    for _ in range(20000):
        u = pi_step(c, 1.0 - y, dt)
        y += u * dt
    assert abs(1.0 - y) < 1e-9


def test_integrator_rejects_constant_disturbance():
    c = PiController(kp=50.0, ki=400.0)
    y, dt = 0.0, 1e-4
    for _ in range(40000):
        u = pi_step(c, -y, dt)
        y += (u + 3.0) * dt
    assert abs(y) < 1e-9
    assert c.integrator * c.ki == pytest.approx(-3.0, rel=1e-6)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_output_within_limits(errors):
    c = PiController(kp=2.0, ki=1e3, output_min=-1.0, output_max=0.5)
    for e in errors:
        assert -1.0 <= pi_step(c, e, 1e-3) <= 0.5


def test_integrator_frozen_while_saturated():
    c = PiController(kp=1.0, ki=10.0, output_min=-1.0, output_max=1.0)
    pi_step(c, 5.0, 1e-3)
    first = c.integrator
    for _ in range(100):
        assert pi_step(c, 5.0, 1e-3) == 1.0
        assert c.integrator == first


def _recovery_ticks(anti_windup):
    # saturate for a while, then reverse the error and count ticks to leave the rail
    c = PiController(kp=0.1, ki=100.0, output_min=-1.0, output_max=1.0, anti_windup=anti_windup)
    for _ in range(2000):
        pi_step(c, 1.0, 1e-3)
    for k in range(100000):
        if pi_step(c, -0.5, 1e-3) < 0.99:
            return k
    return math.inf


def test_anti_windup_recovers_faster():
    with_aw, without = _recovery_ticks(True), _recovery_ticks(False)
    assert with_aw < without
    assert with_aw <= 1


def test_disabled_holds_last_output():
    c = PiController(kp=1.0, ki=0.0)
    pi_step(c, 0.25, 1e-3)
    c.enabled = False
    assert pi_step(c, 10.0, 1e-3) == 0.25


def test_pi_update_returns_state():
    out, integ = pi_update(1.0, 2.0, 0.5, -10.0, 10.0, 1.0, 0.1, True)
    assert integ == pytest.approx(0.6) and out == pytest.approx(1.0 + 1.2)


def test_invalid_limits():
    with pytest.raises(ValueError):
        PiController(kp=1, ki=1, output_min=1.0, output_max=0.0)


def test_first_order_lowpass_time_constant():
    dt = 1e-7
    f = FirstOrderLowPass(1e3, dt)
    tau = 1 / (2 * math.pi * 1e3)
    n = int(round(tau / dt))
    for _ in range(n):
        y = f.step(1.0)
    assert y == pytest.approx(1 - math.exp(-1), abs=1e-3)
    assert lowpass_coefficient(1e3, dt) == pytest.approx(1 - math.exp(-2 * math.pi * 1e-4))


def test_actuator_bandwidth_and_clamp():
    dt = 1e-7
    s = ActuatorState(dac_bits=0)
    tau_pzt = 1 / (2 * math.pi * 1e3)
    for _ in range(int(round(tau_pzt / dt))):
        s = s.step(1.0, 0.0, dt)
    assert s.pzt_freq == pytest.approx(1 - math.exp(-1), abs=1e-3)
    s = ActuatorState()
    for _ in range(20000):
        s = s.step(1e12, 100.0, dt)
    assert s.pzt_freq == s.pzt_range
    assert s.eom_phase == s.eom_range


def test_dac_quantizes_eom():
    s = ActuatorState()
    lsb = s.dac_lsb
    assert lsb == pytest.approx(8 * math.pi / 65536)
    for _ in range(200):
        s = s.step(0.0, 0.3 * lsb, 1e-7)
    assert s.eom_phase == 0.0


def test_lock_state_labels():
    assert [s.label for s in LockState] == ["CoarseTuning", "FrequencyLock", "FullLock", "LostLock"]
    assert LockState.from_label("FullLock") is LockState.FULL_LOCK
    with pytest.raises(ValueError):
        LockState.from_label("Unlocked")
    assert np.int8(LockState.LOST_LOCK) == 3
