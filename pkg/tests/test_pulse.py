import math

import numpy as np
import pytest
from pydantic import ValidationError

from spinproc.codec import int_to_bits
from spinproc.errors import ConfigError
from spinproc.models import TWO_PI, BandPlan, Harmonic, PulseSegment
from spinproc.pulse import (
    anti_phase,
    comb_from_bits,
    comb_rss,
    drive_amplitude,
    drive_samples,
    load_pulse_program,
    peak_drive,
    program,
    single_tone,
)

from .conftest import CONFIG_DIR

BAND = BandPlan(f_start=500.0, delta_f=250.0, n_bits=8)


class TestComb:
    def test_one_harmonic_per_set_bit(self):
        seg = comb_from_bits(int_to_bits(178, 8), BAND, TWO_PI * 10.0, 0.05)
        assert len(seg.harmonics) == 4
        assert [h.offset / TWO_PI for h in seg.harmonics] == pytest.approx(
            [750.0, 1500.0, 1750.0, 2250.0]
        )
        assert all(h.amplitude == TWO_PI * 10.0 for h in seg.harmonics)

    def test_zero_word_is_silent(self):
        seg = comb_from_bits(int_to_bits(0, 8), BAND, TWO_PI * 10.0, 0.05)
        assert seg.harmonics == ()
        assert drive_amplitude(seg, 0.01) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            comb_from_bits(int_to_bits(3, 4), BAND, 1.0, 0.05)

    def test_reversed_band(self):
        band = BAND.model_copy(update={"reversed": True})
        seg = comb_from_bits(int_to_bits(1, 8), band, 1.0, 0.05)
        assert seg.harmonics[0].offset == pytest.approx(TWO_PI * 2250.0)

    def test_amplitude_summaries(self):
        seg = comb_from_bits(int_to_bits(0b1111, 8), BAND, 3.0, 0.05)
        assert peak_drive(seg) == pytest.approx(12.0)
        assert comb_rss(seg) == pytest.approx(6.0)


class TestAntiPhase:
    def test_negates_waveform(self):
        seg = comb_from_bits(int_to_bits(0b10110010, 8), BAND, TWO_PI * 2.9, 0.01, 0.4)
        anti = anti_phase(seg)
        times = np.linspace(0.0, 0.0099, 57)
        assert np.array_equal(drive_samples(anti, times), -drive_samples(seg, times))
        for t in times:
            assert drive_amplitude(seg, t) + drive_amplitude(anti, t) == 0.0

    def test_phase_wraps(self):
        seg = single_tone(1.0, 1.0, 1.0, phase=1.5 * math.pi)
        assert anti_phase(seg).harmonics[0].total_phase == pytest.approx(0.5 * math.pi)
        assert anti_phase(single_tone(1.0, 1.0, 1.0)).harmonics[0].total_phase == math.pi

    def test_double_shift_is_exact(self):
        for phase in np.linspace(0.0, TWO_PI, 997, endpoint=False):
            seg = comb_from_bits(int_to_bits(0b1011, 8), BAND, TWO_PI * 2.9, 0.01, float(phase))
            anti = anti_phase(seg)
            assert anti_phase(anti) == seg, phase
            assert len(anti.harmonics) == 3 and anti.duration == seg.duration

    def test_empty_segment(self):
        seg = PulseSegment(duration=0.01)
        assert anti_phase(seg) == seg


class TestWaveform:
    def test_scalar_matches_vector(self):
        seg = comb_from_bits(int_to_bits(0b101, 8), BAND, 2.0, 0.02, 0.3)
        times = np.array([0.0, 0.003, 0.0125])
        expected = [drive_amplitude(seg, t, origin=0.05) for t in times]
        assert drive_samples(seg, times, origin=0.05) == pytest.approx(expected)

    def test_origin_shifts_clock(self):
        seg = single_tone(TWO_PI * 100.0, 1.0, 1.0)
        assert drive_amplitude(seg, 0.0, origin=0.0025) == pytest.approx(0.0, abs=1e-12)
        assert drive_amplitude(seg, 0.0025) == pytest.approx(0.0, abs=1e-12)

    def test_zero_outside_segment(self):
        seg = single_tone(0.0, 1.0, 0.01)
        assert drive_amplitude(seg, -1e-6) == 0.0
        assert drive_amplitude(seg, 0.01) == 0.0
        assert drive_samples(seg, np.array([0.02]))[0] == 0.0

    def test_linear_in_harmonic_list(self):
        first = comb_from_bits(int_to_bits(0b00001101, 8), BAND, 2.0, 0.02, 0.3)
        second = comb_from_bits(int_to_bits(0b11000000, 8), BAND, 0.7, 0.02, 1.9)
        joined = PulseSegment(duration=0.02, harmonics=first.harmonics + second.harmonics)
        times = np.linspace(0.0, 0.0199, 41)
        separate = drive_samples(first, times) + drive_samples(second, times)
        assert np.allclose(drive_samples(joined, times), separate, rtol=0.0, atol=1e-12)
        for t in times[:5]:
            total = drive_amplitude(first, t) + drive_amplitude(second, t)
            assert drive_amplitude(joined, t) == pytest.approx(total, abs=1e-12)

    def test_phase_is_normalized(self):
        h = Harmonic(offset=0.0, amplitude=1.0, phase=-0.5 * math.pi)
        assert h.phase == pytest.approx(1.5 * math.pi)

    def test_duplicate_offsets_rejected(self):
        h = Harmonic(offset=10.0, amplitude=1.0)
        with pytest.raises(ValidationError):
            PulseSegment(duration=0.01, harmonics=(h, h))

    def test_program_requires_segments(self):
        with pytest.raises(ValidationError):
            program()


class TestDescriptionFile:
    def test_load_shipped_file(self):
        prog = load_pulse_program(CONFIG_DIR / "pulses" / "two_tone.json")
        assert len(prog.segments) == 2
        assert prog.total_duration == pytest.approx(0.055)
        offsets = [h.offset for seg in prog.segments for h in seg.harmonics]
        assert offsets == pytest.approx([TWO_PI * 500.0, TWO_PI * 1000.0])
        assert prog.segments[1].harmonics == ()

    def test_invalid_description(self):
        with pytest.raises(ConfigError):
            load_pulse_program({"segments": []})
        with pytest.raises(ConfigError):
            load_pulse_program({"segments": [{"duration_ms": -1.0}]})
        with pytest.raises(ConfigError):
            load_pulse_program(CONFIG_DIR / "missing.json")
