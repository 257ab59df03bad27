"""
脉冲程序
多谐波梳、反相擦除脉冲与驱动波形求值
驱动 Ω(t) = Σ A_k cos(δ_k (origin + t) + φ_k)，在旋转坐标系中作用于 S_x
"""
import math
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .errors import ConfigError
from .models import (
    TWO_PI,
    BandPlan,
    BitArray,
    Harmonic,
    PulseProgram,
    PulseSegment,
)
from .specs import PulseDescription, load_model


def comb_from_bits(
    bits: BitArray,
    band: BandPlan,
    amplitude: float,
    duration: float,
    base_phase: float = 0.0,
) -> PulseSegment:
    """每个置位比特对应一个谐波，频率取该比特槽的频率"""
    if len(bits) != band.n_bits:
        raise ConfigError(f"比特长度 {len(bits)} != 频带槽数 {band.n_bits}")
    harmonics = tuple(
        Harmonic(
            offset=TWO_PI * (band.f_start + band.position(k) * band.delta_f),
            amplitude=amplitude,
            phase=base_phase,
        )
        for k, bit in enumerate(bits.bits)
        if bit
    )
    return PulseSegment(duration=duration, harmonics=harmonics)


def anti_phase(seg: PulseSegment) -> PulseSegment:
    """所有谐波相位加 π（翻转 inverted 标志）"""
    return PulseSegment(
        duration=seg.duration,
        harmonics=tuple(h.model_copy(update={"inverted": not h.inverted}) for h in seg.harmonics),
    )


def drive_amplitude(seg: PulseSegment, t: float, origin: float = 0.0) -> float:
    """t 处的驱动值 (rad/s)，段外为 0"""
    if not 0.0 <= t < seg.duration:
        return 0.0
    clock = origin + t
    return float(
        sum(h.signed_amplitude * math.cos(h.offset * clock + h.phase) for h in seg.harmonics)
    )


def drive_samples(seg: PulseSegment, times: np.ndarray, origin: float = 0.0) -> np.ndarray:
    """drive_amplitude 的向量化版本"""
    times = np.asarray(times, dtype=float)
    values = np.zeros_like(times)
    inside = (times >= 0.0) & (times < seg.duration)
    if not seg.harmonics or not inside.any():
        return values
    clock = origin + times[inside]
    offsets = np.array([h.offset for h in seg.harmonics])
    amps = np.array([h.signed_amplitude for h in seg.harmonics])
    phases = np.array([h.phase for h in seg.harmonics])
    values[inside] = np.cos(np.outer(clock, offsets) + phases) @ amps
    return values


def peak_drive(seg: PulseSegment) -> float:
    """|Ω(t)| 的上界 Σ A_k"""
    return float(sum(h.amplitude for h in seg.harmonics))


def comb_rss(seg: PulseSegment) -> float:
    """梳的平方和根总幅度，记入运行元数据"""
    return float(math.sqrt(sum(h.amplitude ** 2 for h in seg.harmonics)))


def single_tone(offset: float, amplitude: float, duration: float, phase: float = 0.0) -> PulseSegment:
    return PulseSegment(
        duration=duration, harmonics=(Harmonic(offset=offset, amplitude=amplitude, phase=phase),)
    )


def program(*segments: PulseSegment) -> PulseProgram:
    return PulseProgram(segments=tuple(segments))


def program_from_description(description: PulseDescription) -> PulseProgram:
    """Hz / ms / 度 -> rad/s / s / rad"""
    segments = []
    for seg in description.segments:
        harmonics = tuple(
            Harmonic(
                offset=TWO_PI * h.offset_hz,
                amplitude=TWO_PI * h.amplitude_hz,
                phase=math.radians(h.phase_deg),
            )
            for h in seg.harmonics
        )
        try:
            segments.append(PulseSegment(duration=seg.duration_ms * 1e-3, harmonics=harmonics))
        except ValueError as e:
            raise ConfigError(f"脉冲段无效: {e}") from e
    return PulseProgram(segments=tuple(segments))


def load_pulse_program(source: Union[str, Path, Dict]) -> PulseProgram:
    """读取脉冲描述文件"""
    return program_from_description(load_model(source, PulseDescription))
