"""
编码层
整数 <-> 比特数组、频带规划与按位取反的精确参考值
"""
from typing import Sequence, Union

import numpy as np

from .errors import BandError, CodecError
from .models import BandPlan, BitArray, TransitionTable

MAX_INT_BITS = 64


def int_to_bits(x: int, n_bits: int) -> BitArray:
    """LSB 在前展开为 n_bits 位"""
    if n_bits < 0 or n_bits > MAX_INT_BITS:
        raise CodecError(f"位数 {n_bits} 超出 [0, {MAX_INT_BITS}]")
    if x < 0 or x >= (1 << n_bits):
        raise CodecError(f"x={x} 超出 [0, 2^{n_bits})")
    return BitArray(bits=tuple((x >> k) & 1 for k in range(n_bits)))


def bits_to_int(bits: Union[BitArray, Sequence[int]]) -> int:
    """int_to_bits 的逆；空数组映射为 0"""
    values = bits.bits if isinstance(bits, BitArray) else tuple(bits)
    if len(values) > MAX_INT_BITS:
        raise CodecError(f"比特数组长度 {len(values)} 超过 {MAX_INT_BITS}")
    result = 0
    for k, b in enumerate(values):
        if b not in (0, 1):
            raise CodecError(f"第 {k} 位不是 0/1: {b}")
        result |= b << k
    return result


def bitwise_not_oracle(x: int, n_bits: int) -> int:
    """2^M - 1 - x"""
    if n_bits < 0:
        raise CodecError(f"位数必须非负: {n_bits}")
    if x < 0 or x >= (1 << n_bits):
        raise CodecError(f"x={x} 超出 [0, 2^{n_bits})")
    return ((1 << n_bits) - 1) ^ x


def parse_decimal(text: str, n_bits: int) -> int:
    """CLI 使用的十进制字符串解析"""
    try:
        x = int(text.strip(), 10)
    except ValueError as e:
        raise CodecError(f"无效的十进制整数: {text!r}") from e
    if x < 0 or x >= (1 << n_bits):
        raise CodecError(f"x={x} 超出 [0, 2^{n_bits})")
    return x


def slot_frequency(band: BandPlan, k: int) -> float:
    """第 k 个比特槽的频率 (Hz)"""
    if k < 0 or k >= band.n_bits:
        raise CodecError(f"槽序号 {k} 超出 [0, {band.n_bits})")
    return band.f_start + band.position(k) * band.delta_f


def all_ones(n_bits: int) -> BitArray:
    return BitArray(bits=(1,) * n_bits)


# ========== 频带与集群谱 ==========

def default_band(table: TransitionTable, n_bits: int, fraction: float = 0.6) -> BandPlan:
    """M 个槽均匀铺满谱宽中央 fraction 的范围"""
    if len(table) == 0:
        raise BandError("集群没有允许跃迁，无法规划频带")
    f_lo, f_hi = float(table.freqs_hz.min()), float(table.freqs_hz.max())
    width = fraction * (f_hi - f_lo)
    if not width > 0.0:
        raise BandError("集群谱宽为零，无法规划频带")
    delta_f = width / n_bits
    center = 0.5 * (f_lo + f_hi)
    return BandPlan(f_start=center - 0.5 * width + 0.5 * delta_f, delta_f=delta_f, n_bits=n_bits)


def align_band(band: BandPlan, table: TransitionTable, min_weight_fraction: float = 0.1) -> BandPlan:
    """
    平移 f_start，使各槽对准窗口内最强的谱线
    平移量取各槽偏差的中位数；只考虑权重 ≥ min_weight_fraction·最大权重的谱线
    """
    if len(table) == 0:
        raise BandError("集群没有允许跃迁，无法对准频带")
    freqs = table.freqs_hz
    strong = table.weight >= min_weight_fraction * table.weight.max()
    half = 0.5 * band.delta_f

    deviations = []
    for f_k in band.slot_frequencies():
        candidates = np.flatnonzero(strong & (np.abs(freqs - f_k) <= half))
        if candidates.size:
            best = candidates[np.argmax(table.weight[candidates])]
            deviations.append(float(freqs[best] - f_k))
    if not deviations:
        raise BandError("没有任何槽窗口内含强谱线", {"band": band.model_dump()})

    shift = float(np.median(deviations))
    return band.model_copy(update={"f_start": band.f_start + shift})


def validate_band(band: BandPlan, table: TransitionTable) -> None:
    """
    槽频率必须落在集群谱范围内（两端各放宽半个槽宽，容许对准后的微小偏差）；
    所有窗口必须位于载波同一侧
    """
    if len(table) == 0:
        raise BandError("集群没有允许跃迁")
    half = 0.5 * band.delta_f
    f_lo = float(table.freqs_hz.min()) - half
    f_hi = float(table.freqs_hz.max()) + half
    for k, f in enumerate(band.slot_frequencies()):
        if f < f_lo or f > f_hi:
            raise BandError(
                f"槽 {k} 的频率 {f:.3f} Hz 不在集群谱范围 [{f_lo:.3f}, {f_hi:.3f}] 内",
                {"slot": k, "freq_hz": float(f)},
            )
    lo, hi = band.span()
    if lo <= 0.0 <= hi:
        # 余弦驱动同时作用于 ±δ，窗口跨过 0 Hz 时镜像谱线会被一起激发
        raise BandError(f"频带窗口 [{lo:.3f}, {hi:.3f}] Hz 跨过载波频率 0 Hz")
