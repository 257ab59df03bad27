"""
读出
FID -> 绝对值谱 -> 比特槽幅度 -> 比特判决
"""
import math
from typing import List, Optional, Sequence

import numpy as np

from .config import config
from .errors import ConfigError, SlotRangeError
from .models import BandPlan, BitArray, MagnitudeSpectrum, ThresholdPolicy


def magnitude_spectrum(
    fid: np.ndarray, dwell: float, pad_factor: Optional[int] = None
) -> MagnitudeSpectrum:
    """
    零填充到 pad_factor 倍长度后做 DFT，频率轴居中（双边）
    归一化：Σ|fid|² = (1/n) Σ mags²，n 为变换长度
    """
    fid = np.asarray(fid, dtype=complex)
    if fid.ndim != 1 or fid.size < 2:
        raise ConfigError(f"FID 至少需要 2 个采样点: {fid.shape}")
    if not dwell > 0.0:
        raise ConfigError(f"dwell 必须为正: {dwell}")
    pad = pad_factor if pad_factor is not None else config.get_config().pad_factor
    n = fid.size * max(1, int(pad))

    values = np.fft.fftshift(np.fft.fft(fid, n))
    freqs = np.fft.fftshift(np.fft.fftfreq(n, dwell))
    return MagnitudeSpectrum(freqs=freqs, mags=np.abs(values), values=values)


def slot_windows(spec: MagnitudeSpectrum, band: BandPlan) -> List[np.ndarray]:
    """
    每个槽拥有 (f_k - Δf/2, f_k + Δf/2] 内的频率点，最低的槽同时拥有下边界；
    恰好落在相邻两槽公共边界上的点归序号较小的槽
    """
    freqs = spec.freqs
    lo, hi = float(freqs[0]), float(freqs[-1])
    centers = band.slot_frequencies()
    for k, f in enumerate(centers):
        if f < lo or f > hi:
            raise SlotRangeError(
                f"槽 {k} 的频率 {f:.3f} Hz 超出谱范围 [{lo:.3f}, {hi:.3f}]",
                {"slot": k, "freq_hz": float(f)},
            )

    half = 0.5 * band.delta_f
    tol = 1e-9 * band.delta_f
    taken = np.zeros(freqs.size, dtype=bool)
    windows = []
    for k in range(band.n_bits):
        dist = freqs - centers[k]
        mask = np.abs(dist) <= half + tol
        # 序号小的槽先取，共享边界自然归它
        mask &= ~taken
        taken |= mask
        windows.append(mask)
    return windows


def slot_amplitudes(spec: MagnitudeSpectrum, band: BandPlan) -> List[float]:
    """每个槽窗口内的最大幅度"""
    return [
        float(spec.mags[mask].max()) if mask.any() else 0.0
        for mask in slot_windows(spec, band)
    ]


def slot_peaks(spec: MagnitudeSpectrum, band: BandPlan) -> List[int]:
    """每个槽窗口内幅度最大的频率点下标（空窗口为 -1）"""
    peaks = []
    for mask in slot_windows(spec, band):
        idx = np.flatnonzero(mask)
        peaks.append(int(idx[np.argmax(spec.mags[idx])]) if idx.size else -1)
    return peaks


def decode_bits(amps: Sequence[float], policy: ThresholdPolicy) -> BitArray:
    """amps[k] ≥ fraction · reference[k] 判为 1"""
    if len(amps) != len(policy.reference):
        raise ConfigError(f"幅度数 {len(amps)} != 参考数 {len(policy.reference)}")
    return BitArray(
        bits=tuple(
            int(a >= policy.fraction * r) for a, r in zip(amps, policy.reference)
        )
    )


def noise_floor(sigma: float, n_samples: int, n_transients: int = 1) -> float:
    """T 次平均后复高斯白噪声在 DFT 幅度上的 rms：σ·√n / √T"""
    return sigma * math.sqrt(n_samples) / math.sqrt(max(1, n_transients))
