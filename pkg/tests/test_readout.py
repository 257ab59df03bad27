import math

import numpy as np
import pytest

from spinproc.errors import ConfigError, SlotRangeError
from spinproc.models import BandPlan, MagnitudeSpectrum, ThresholdPolicy
from spinproc.readout import (
    decode_bits,
    magnitude_spectrum,
    noise_floor,
    slot_amplitudes,
    slot_peaks,
    slot_windows,
)


def _tone(freq: float, n: int = 256, dwell: float = 1e-4) -> np.ndarray:
    return np.exp(2j * math.pi * freq * np.arange(n) * dwell)


def _grid_spectrum(step: float = 62.5, half: int = 16) -> MagnitudeSpectrum:
    freqs = np.arange(-half, half) * step
    mags = np.ones_like(freqs)
    return MagnitudeSpectrum(freqs=freqs, mags=mags, values=mags.astype(complex))


class TestSpectrum:
    def test_parseval(self):
        rng = np.random.default_rng(0)
        fid = rng.standard_normal(200) + 1j * rng.standard_normal(200)
        spec = magnitude_spectrum(fid, 1e-4, pad_factor=4)
        n = spec.freqs.size
        assert n == 800
        assert np.sum(np.abs(fid) ** 2) == pytest.approx(np.sum(spec.mags ** 2) / n)

    def test_tone_peak(self):
        spec = magnitude_spectrum(_tone(1250.0), 1e-4, pad_factor=4)
        peak = int(np.argmax(spec.mags))
        assert abs(spec.freqs[peak] - 1250.0) <= spec.bin_width
        assert spec.mags[peak] == pytest.approx(256.0, rel=0.01)

    def test_centered_axis(self):
        spec = magnitude_spectrum(_tone(0.0, n=16), 1e-3, pad_factor=1)
        assert spec.freqs[0] == pytest.approx(-500.0)
        assert np.all(np.diff(spec.freqs) > 0.0)

    def test_rejects_short_input(self):
        with pytest.raises(ConfigError):
            magnitude_spectrum(np.array([1.0 + 0j]), 1e-4)

    def test_default_pad_from_config(self):
        spec = magnitude_spectrum(_tone(0.0, n=32), 1e-4)
        assert spec.freqs.size == 128


class TestSlots:
    def test_windows_are_disjoint(self):
        band = BandPlan(f_start=125.0, delta_f=250.0, n_bits=3)
        windows = slot_windows(_grid_spectrum(), band)
        total = np.sum(windows, axis=0)
        assert total.max() == 1

    def test_shared_boundary_goes_to_lower_slot(self):
        spec = _grid_spectrum()
        band = BandPlan(f_start=250.0, delta_f=250.0, n_bits=2)
        windows = slot_windows(spec, band)
        boundary = int(np.flatnonzero(spec.freqs == 375.0)[0])
        assert windows[0][boundary]
        assert not windows[1][boundary]
        assert windows[0][int(np.flatnonzero(spec.freqs == 125.0)[0])]

    def test_slot_outside_spectrum(self):
        band = BandPlan(f_start=5000.0, delta_f=250.0, n_bits=2)
        with pytest.raises(SlotRangeError):
            slot_windows(_grid_spectrum(), band)

    def test_amplitudes_and_peaks(self):
        fid = 2.0 * _tone(1250.0) + 0.5 * _tone(2500.0)
        spec = magnitude_spectrum(fid, 1e-4, pad_factor=4)
        band = BandPlan(f_start=1250.0, delta_f=1250.0, n_bits=2)
        amps = slot_amplitudes(spec, band)
        assert amps[0] == pytest.approx(512.0, rel=0.01)
        assert amps[1] == pytest.approx(128.0, rel=0.01)
        peaks = slot_peaks(spec, band)
        assert abs(spec.freqs[peaks[0]] - 1250.0) <= spec.bin_width


class TestDecode:
    def test_threshold_inclusive(self):
        policy = ThresholdPolicy(fraction=0.5, reference=(10.0, 10.0, 10.0))
        assert decode_bits([5.0, 4.999, 12.0], policy).bits == (1, 0, 1)

    def test_length_mismatch(self):
        policy = ThresholdPolicy(fraction=0.5, reference=(10.0, 10.0))
        with pytest.raises(ConfigError):
            decode_bits([1.0], policy)

    def test_reference_must_be_positive(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(fraction=0.5, reference=(1.0, 0.0))

    def test_noise_floor(self):
        assert noise_floor(0.5, 256, 1024) == pytest.approx(0.5 * 16.0 / 32.0)
        assert noise_floor(1.0, 100) == pytest.approx(10.0)


def _slot_tones(n_bits: int, n: int = 64, dwell: float = 1e-4):
    """每个槽一条落在 DFT 格点上的谱线，槽间距为一个格点"""
    bin_hz = 1.0 / (n * dwell)
    band = BandPlan(f_start=bin_hz, delta_f=bin_hz, n_bits=n_bits)
    gains = 1.0 + 0.1 * np.arange(n_bits)
    tones = np.stack([g * _tone(f, n, dwell) for g, f in zip(gains, band.slot_frequencies())])
    return band, tones


def _round_trip(n_bits: int, words) -> None:
    band, tones = _slot_tones(n_bits)
    ones = np.ones(n_bits)
    reference = slot_amplitudes(magnitude_spectrum(ones @ tones, 1e-4, pad_factor=1), band)
    policy = ThresholdPolicy(fraction=0.5, reference=tuple(reference))
    for x in words:
        bits = np.array([(x >> k) & 1 for k in range(n_bits)], dtype=float)
        spec = magnitude_spectrum(bits @ tones, 1e-4, pad_factor=1)
        decoded = decode_bits(slot_amplitudes(spec, band), policy)
        assert decoded.bits == tuple(int(b) for b in bits), x


class TestRoundTrip:
    @pytest.mark.parametrize("n_bits", [1, 2, 3, 5, 8, 12])
    def test_every_pattern(self, n_bits):
        _round_trip(n_bits, range(1 << n_bits))

    @pytest.mark.slow
    def test_every_sixteen_bit_pattern(self):
        _round_trip(16, range(1 << 16))

    @pytest.mark.parametrize("scale", [0.25, 2.0, 1024.0, 3.7, 1e-3])
    def test_decode_scale_invariant(self, scale):
        rng = np.random.default_rng(5)
        reference = rng.uniform(1.0, 10.0, size=16)
        policy = ThresholdPolicy(fraction=0.5, reference=tuple(reference))
        scaled = ThresholdPolicy(fraction=0.5, reference=tuple(scale * reference))
        for _ in range(200):
            amps = rng.uniform(0.0, 1.0, size=16) * reference
            assert decode_bits(scale * amps, scaled) == decode_bits(amps, policy)
