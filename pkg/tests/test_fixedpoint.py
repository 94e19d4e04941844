import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlosim.lock.fixedpoint import (PHASE_BITS, PhaseSample, adc_quantize, cordic_atan2,
                                    cordic_atan2_array, phase_lsb, radians_to_word, saturating_add,
                                    unwrap_increment, unwrap_step, unwrap_words, wrap_detect,
                                    word_to_radians, wrap_word)

LSB = phase_lsb(PHASE_BITS)


def _angle_error(words, q, i):
    err = word_to_radians(words) - np.arctan2(q, i)
    return np.abs((err + math.pi) % (2 * math.pi) - math.pi)


def _random_vectors(n, seed=0, amplitude=8191):
    rng = np.random.default_rng(seed)
    q = rng.integers(-amplitude, amplitude + 1, n)
    i = rng.integers(-amplitude, amplitude + 1, n)
    keep = (q != 0) | (i != 0)
    return q[keep], i[keep]


class TestCordic:
    def test_diagonal(self):
        w, ok = cordic_atan2(1, 1)
        assert ok
        assert abs(w * LSB - math.pi / 4) <= 2.0**-15 + LSB

    def test_branch_cut_is_minus_pi(self):
        w, ok = cordic_atan2(0, -1)
        assert ok and w == -(1 << (PHASE_BITS - 1))
        assert w * LSB == -math.pi

    def test_axes(self):
        assert cordic_atan2(0, 100)[0] == 0
        assert cordic_atan2(100, 0)[0] == 1 << (PHASE_BITS - 2)
        assert cordic_atan2(-100, 0)[0] == -(1 << (PHASE_BITS - 2))

    def test_zero_vector_holds_previous(self):
        assert cordic_atan2(0, 0, previous=1234) == (1234, False)

    def test_16_iterations_bound(self):
        q, i = _random_vectors(100_000)
        err = _angle_error(cordic_atan2_array(q, i, 16), q, i)
        assert err.max() <= 2.0**-15 + LSB

    @pytest.mark.parametrize("n", range(8, 21))
    def test_bound_per_iteration_count(self, n):
        q, i = _random_vectors(100_000, seed=n)
        err = _angle_error(cordic_atan2_array(q, i, n), q, i)
        assert err.max() <= 2.0 ** (1 - n) + LSB

    def test_scalar_matches_array(self):
        q, i = _random_vectors(200, seed=3)
        arr = cordic_atan2_array(q, i, 12)
        assert [cordic_atan2(a, b, 12)[0] for a, b in zip(q, i)] == arr.tolist()

    def test_output_range(self):
        q, i = _random_vectors(20_000, seed=9)
        w = cordic_atan2_array(q, i, 16)
        half = 1 << (PHASE_BITS - 1)
        assert w.min() >= -half and w.max() < half

    def test_rejects_zero_iterations(self):
        with pytest.raises(ValueError):
            cordic_atan2(1, 1, iterations=0)


class TestWrapRule:
    def test_two_msb_rule_exhaustive_8bit(self):
        bits = 8
        half = 1 << (bits - 1)
        for prev in range(-half, half):
            for now in range(-half, half):
                raw = now - prev
                reference = not (-half <= raw < half)
                assert wrap_detect(raw, bits) == reference, (prev, now)

    def test_increment_exhaustive_8bit(self):
        bits = 8
        half = 1 << bits - 1
        for prev in range(-half, half):
            for now in range(-half, half):
                inc, wrapped = unwrap_increment(prev, now, bits)
                assert -half <= inc < half
                assert (prev + inc - now) % (1 << bits) == 0
                assert wrapped == (inc != now - prev)


class TestUnwrap:
    def test_single_wrap(self):
        s = PhaseSample.start(radians_to_word(3.0))
        s = unwrap_step(s, radians_to_word(-3.0))
        assert s.wrap_events == 1
        assert s.unwrapped_rad == pytest.approx(2 * math.pi - 3.0, abs=LSB)
        assert s.unwrapped_rad == pytest.approx(3.283, abs=1e-3)

    def test_constant_input(self):
        out, events = unwrap_words(np.full(100, 1234))
        assert events == 0 and np.all(out == 1234)

    def test_ramp_round_trip(self):
        ramp = np.arange(0, 50.0 + 1e-9, 0.1)
        words = [radians_to_word(a) for a in ramp]
        out, events = unwrap_words(words)
        assert np.max(np.abs(out * LSB - ramp)) <= LSB
        assert events == int(50.0 / (2 * math.pi) + 0.5)

    def test_step_matches_batch(self):
        rng = np.random.default_rng(1)
        words = [wrap_word(int(v)) for v in np.cumsum(rng.integers(-20000, 20000, 500))]
        batch, events = unwrap_words(words)
        s = PhaseSample.start(words[0])
        seq = [s.unwrapped]
        for w in words[1:]:
            s = unwrap_step(s, w)
            seq.append(s.unwrapped)
        assert seq == batch.tolist() and s.wrap_events == events

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-(math.pi - 2 * LSB), math.pi - 2 * LSB), min_size=1, max_size=300),
           st.floats(-math.pi, math.pi))
    def test_round_trip_property(self, increments, start):
        truth = start + np.concatenate([[0.0], np.cumsum(increments)])
        words = [radians_to_word(a) for a in truth]
        out, _ = unwrap_words(words)
        # the reconstruction is anchored on the first (wrapped) word
        offset = truth[0] - words[0] * LSB
        assert np.max(np.abs(out * LSB + offset - truth)) <= LSB * (1 + 1e-9)

    @given(st.lists(st.floats(-math.pi + 2 * LSB, math.pi - 2 * LSB), min_size=1, max_size=100))
    def test_wrapped_congruent_to_unwrapped(self, increments):
        truth = np.cumsum(increments)
        words = [radians_to_word(a) for a in truth]
        out, _ = unwrap_words(words)
        assert all((u - w) % (1 << PHASE_BITS) == 0 for u, w in zip(out.tolist(), words))

    def test_accumulator_saturates(self):
        top = (1 << 31) - 1
        assert saturating_add(top - 5, 10, 32) == (top, True)
        assert saturating_add(-top - 1, -1, 32) == (-top - 1, True)
        assert saturating_add(3, 4, 32) == (7, False)
        s = PhaseSample(wrapped=0, unwrapped=top - 10)
        s = unwrap_step(s, 100)
        assert s.unwrapped == top and s.range_flag


class TestWords:
    def test_radians_to_word_wraps(self):
        assert radians_to_word(math.pi) == -(1 << 15)
        assert radians_to_word(-math.pi) == -(1 << 15)
        assert radians_to_word(2 * math.pi + 0.5) == radians_to_word(0.5)

    @given(st.integers(-(1 << 40), 1 << 40))
    def test_wrap_word_range(self, v):
        w = wrap_word(v)
        assert -(1 << 15) <= w < (1 << 15) and (v - w) % (1 << 16) == 0


class TestAdc:
    def test_rounding_and_clipping(self):
        lsb = 0.5 / (1 << 14)
        assert adc_quantize(0.0, lsb, 14) == 0
        assert adc_quantize(1.4 * lsb, lsb, 14) == 1
        assert adc_quantize(-1.6 * lsb, lsb, 14) == -2
        assert adc_quantize(10.0, lsb, 14) == (1 << 13) - 1
        assert adc_quantize(-10.0, lsb, 14) == -(1 << 13)

    @given(st.floats(-0.25, 0.25))
    def test_quantization_error_half_lsb(self, x):
        lsb = 0.5 / (1 << 14)
        code = adc_quantize(x, lsb, 14)
        if -(1 << 13) < code < (1 << 13) - 1:
            assert abs(code * lsb - x) <= 0.5 * lsb + 1e-15
