"""Fixed-point phase arithmetic: ADC quantizer, CORDIC atan2 and phase unwrapper.

Phase words are two's-complement binary angles: a ``bits``-wide word spans
[-pi, pi) with one LSB = 2*pi / 2**bits, so ``atan2(0, -1)`` maps to -pi.
The unwrapped accumulator uses the same LSB in a wider saturating register.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .._jit import jit

PHASE_BITS = 16
UNWRAP_BITS = 32
CORDIC_ANGLE_BITS = 32
CORDIC_GUARD_BITS = 24


def phase_lsb(bits: int = PHASE_BITS) -> float:
    return 2.0 * math.pi / (1 << bits)


def wrap_word(value: int, bits: int = PHASE_BITS) -> int:
    """Reduce an integer into the signed ``bits``-wide ring."""
    half = 1 << (bits - 1)
    return ((value + half) & ((1 << bits) - 1)) - half


def radians_to_word(angle: float, bits: int = PHASE_BITS) -> int:
    """Round an angle to the nearest phase word, wrapped into [-pi, pi)."""
    return wrap_word(int(round(angle / phase_lsb(bits))), bits)


def word_to_radians(word, bits: int = PHASE_BITS):
    return np.asarray(word) * phase_lsb(bits)


@jit
def adc_quantize(x, lsb, bits):
    """Round a voltage to a signed ``bits``-wide ADC code with clipping."""
    top = (1 << (bits - 1)) - 1
    code = int(math.floor(x / lsb + 0.5))
    if code > top:
        return top
    if code < -top - 1:
        return -top - 1
    return code


def cordic_angle_table(iterations: int, angle_bits: int = CORDIC_ANGLE_BITS) -> np.ndarray:
    """atan(2**-k) in binary-angle units of a full turn = 2**angle_bits."""
    scale = (1 << angle_bits) / (2.0 * math.pi)
    return np.array([int(round(math.atan(2.0 ** -k) * scale)) for k in range(iterations)],
                    dtype=np.int64)


@jit
def cordic_vector(q, i, table, guard_bits, angle_bits, out_bits):
    """Vectoring-mode CORDIC on integer inputs; returns the phase word.

    Inputs are left-aligned by ``guard_bits``; the left half-plane is first
    rotated by -+90 degrees.  The result is rounded from the internal
    ``angle_bits`` accumulator to an ``out_bits`` word in [-pi, pi).
    Caller must reject (0, 0).
    """
    x = i << guard_bits
    y = q << guard_bits
    z = 0
    quarter = 1 << (angle_bits - 2)
    if x < 0:
        if y >= 0:
            x, y, z = y, -x, quarter
        else:
            x, y, z = -y, x, -quarter
    for k in range(table.shape[0]):
        xs = x >> k
        ys = y >> k
        if y > 0:
            x, y, z = x + ys, y - xs, z + table[k]
        else:
            x, y, z = x - ys, y + xs, z - table[k]
    shift = angle_bits - out_bits
    word = (z + (1 << (shift - 1))) >> shift
    half = 1 << (out_bits - 1)
    return ((word + half) & ((1 << out_bits) - 1)) - half


_TABLES: dict[tuple[int, int], np.ndarray] = {}


def _table(iterations: int, angle_bits: int) -> np.ndarray:
    key = (iterations, angle_bits)
    if key not in _TABLES:
        _TABLES[key] = cordic_angle_table(iterations, angle_bits)
    return _TABLES[key]


def cordic_atan2(q: int, i: int, iterations: int = 16, previous: int = 0,
                 out_bits: int = PHASE_BITS, guard_bits: int = CORDIC_GUARD_BITS,
                 angle_bits: int = CORDIC_ANGLE_BITS) -> tuple[int, bool]:
    """Fixed-point ``atan2(q, i)`` as a phase word.

    Returns ``(word, valid)``.  A zero vector is a measurement dropout: the
    ``previous`` word is held and ``valid`` is False.  Absolute error is at
    most ``2**(1 - iterations)`` rad plus one output LSB.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    q = int(q)
    i = int(i)
    if q == 0 and i == 0:
        return int(previous), False
    word = cordic_vector(q, i, _table(iterations, angle_bits), guard_bits, angle_bits, out_bits)
    return int(word), True


def cordic_atan2_array(q, i, iterations: int = 16, out_bits: int = PHASE_BITS) -> np.ndarray:
    """Elementwise :func:`cordic_atan2` (zero vectors map to 0)."""
    q = np.asarray(q, dtype=np.int64)
    i = np.asarray(i, dtype=np.int64)
    out = np.empty(q.shape, dtype=np.int64)
    table = _table(iterations, CORDIC_ANGLE_BITS)
    _cordic_many(q.ravel(), i.ravel(), table, CORDIC_GUARD_BITS, CORDIC_ANGLE_BITS,
                 out_bits, out.reshape(-1))
    return out


@jit
def _cordic_many(q, i, table, guard_bits, angle_bits, out_bits, out):
    for n in range(q.shape[0]):
        if q[n] == 0 and i[n] == 0:
            out[n] = 0
        else:
            out[n] = cordic_vector(q[n], i[n], table, guard_bits, angle_bits, out_bits)


@jit
def wrap_detect(raw, bits):
    """Two-MSB test on the (bits+1)-wide raw difference of two phase words.

    The sign bit and the next bit differ exactly when the increment lies
    outside [-pi, pi), i.e. a 2*pi correction is due.
    """
    return ((raw >> bits) & 1) != ((raw >> (bits - 1)) & 1)


@jit
def unwrap_increment(prev_word, now_word, bits):
    """Return ``(increment, wrapped)`` between consecutive phase words."""
    raw = now_word - prev_word
    if wrap_detect(raw, bits):
        if raw > 0:
            return raw - (1 << bits), True
        return raw + (1 << bits), True
    return raw, False


@jit
def saturating_add(acc, inc, bits):
    """Add into a signed ``bits``-wide register; returns ``(value, saturated)``."""
    top = (1 << (bits - 1)) - 1
    value = acc + inc
    if value > top:
        return top, True
    if value < -top - 1:
        return -top - 1, True
    return value, False


@dataclass(frozen=True)
class PhaseSample:
    """Wrapped phase word, unwrapped accumulator and wrap bookkeeping."""

    wrapped: int
    unwrapped: int
    wrap_events: int = 0
    range_flag: bool = False
    bits: int = PHASE_BITS
    accumulator_bits: int = UNWRAP_BITS

    @classmethod
    def start(cls, word: int, bits: int = PHASE_BITS,
              accumulator_bits: int = UNWRAP_BITS) -> "PhaseSample":
        return cls(wrapped=int(word), unwrapped=int(word), bits=bits,
                   accumulator_bits=accumulator_bits)

    @property
    def wrapped_rad(self) -> float:
        return self.wrapped * phase_lsb(self.bits)

    @property
    def unwrapped_rad(self) -> float:
        return self.unwrapped * phase_lsb(self.bits)


def unwrap_step(prev: PhaseSample, wrapped_now: int) -> PhaseSample:
    """Accumulate the increment from ``prev.wrapped`` to ``wrapped_now``."""
    inc, wrapped = unwrap_increment(prev.wrapped, int(wrapped_now), prev.bits)
    acc, saturated = saturating_add(prev.unwrapped, inc, prev.accumulator_bits)
    return replace(prev, wrapped=int(wrapped_now), unwrapped=int(acc),
                   wrap_events=prev.wrap_events + int(wrapped),
                   range_flag=prev.range_flag or bool(saturated))


def unwrap_words(words, bits: int = PHASE_BITS, accumulator_bits: int = UNWRAP_BITS):
    """Unwrap a whole sequence of phase words; returns ``(unwrapped, wrap_events)``."""
    words = np.asarray(words, dtype=np.int64)
    out = np.empty_like(words)
    events = _unwrap_many(words, bits, accumulator_bits, out)
    return out, int(events)


@jit
def _unwrap_many(words, bits, accumulator_bits, out):
    events = 0
    acc = words[0]
    out[0] = acc
    for n in range(1, words.shape[0]):
        inc, wrapped = unwrap_increment(words[n - 1], words[n], bits)
        if wrapped:
            events += 1
        acc, _ = saturating_add(acc, inc, accumulator_bits)
        out[n] = acc
    return events
