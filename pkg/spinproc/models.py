"""
数据模型
自旋集群、脉冲程序、比特数组、读出与实验结果
"""
import math
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import config

TWO_PI = 2.0 * math.pi


def normalize_phase(phase: float) -> float:
    """映射到 [0, 2π)"""
    v = math.fmod(phase, TWO_PI)
    if v < 0.0:
        v += TWO_PI
    if v >= TWO_PI:
        v = 0.0
    return v


class StepMethod(str, Enum):
    TROTTER2 = "trotter2"
    MIDPOINT = "midpoint-exponential"


class RegimeLabel(str, Enum):
    SINGLE_TRANSITION = "SingleTransition"
    INHOMOGENEOUS_ENSEMBLE = "InhomogeneousEnsemble"
    COLLECTIVE_COHERENT = "CollectiveCoherent"
    THERMODYNAMIC_SATURATION = "ThermodynamicSaturation"
    HARD_PULSE = "HardPulse"
    CROSSOVER = "Crossover"


class ExperimentKind(str, Enum):
    CALIBRATION = "calibration"
    ENCODE = "encode"
    NOT_GATE = "not"
    SWEEP = "sweep"


class JobStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


# ========== 自旋模型 ==========

class SpinCluster(BaseModel):
    """
    N 个自旋 1/2 的集群
    offsets / couplings 单位均为 rad/s
    """
    model_config = ConfigDict(frozen=True)

    n_spins: int = Field(ge=1)
    offsets: Tuple[float, ...]
    couplings: Tuple[Tuple[float, ...], ...]

    @model_validator(mode="after")
    def _check_shape(self) -> "SpinCluster":
        n = self.n_spins
        max_spins = config.get_config().max_spins
        if n > max_spins:
            raise ValueError(f"n_spins={n} 超出上限 {max_spins}")
        if len(self.offsets) != n:
            raise ValueError(f"offsets 长度 {len(self.offsets)} != n_spins {n}")
        if len(self.couplings) != n or any(len(row) != n for row in self.couplings):
            raise ValueError(f"couplings 必须是 {n}x{n} 矩阵")
        for i in range(n):
            if self.couplings[i][i] != 0.0:
                raise ValueError(f"couplings[{i}][{i}] 必须为 0")
            for j in range(i + 1, n):
                if self.couplings[i][j] != self.couplings[j][i]:
                    raise ValueError(f"couplings 不对称: ({i},{j})")
        return self

    @property
    def offset_array(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    @property
    def coupling_matrix(self) -> np.ndarray:
        return np.asarray(self.couplings, dtype=float)

    @property
    def dimension(self) -> int:
        return 2 ** self.n_spins


class SpinOperatorSet(BaseModel):
    """
    集体自旋算符 (维度 2^N)
    单自旋算符按需构造，避免 N 较大时占用 N 个稠密矩阵
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_spins: int
    s_x: np.ndarray
    s_y: np.ndarray
    s_z: np.ndarray
    s_plus: np.ndarray

    def single_x(self, i: int) -> np.ndarray:
        from .spin_model import single_spin_operator
        return single_spin_operator(self.n_spins, i, "x")

    def single_z(self, i: int) -> np.ndarray:
        from .spin_model import single_spin_operator
        return single_spin_operator(self.n_spins, i, "z")


class EigenSystem(BaseModel):
    """本征系统：升序本征值、本征矢（列）、每个本征态的总 M"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    magnetization: np.ndarray
    degenerate: bool = False


class TransitionTable(BaseModel):
    """
    允许跃迁表
    每条跃迁中 i 为 M 较高的态，omega = ε_i − ε_j 即 FID 中的谱线频率
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    i: np.ndarray
    j: np.ndarray
    omega: np.ndarray
    weight: np.ndarray
    element: np.ndarray  # 本征基下的 ⟨i|S_x|j⟩
    degenerate_flag: bool = False

    def __len__(self) -> int:
        return int(self.omega.shape[0])

    @property
    def entries(self) -> Iterator[Tuple[int, int, float, float]]:
        for a, b, w, p in zip(self.i, self.j, self.omega, self.weight):
            yield int(a), int(b), float(w), float(p)

    @property
    def omega_loc(self) -> float:
        """谱的总宽度 (rad/s)"""
        if len(self) == 0:
            return 0.0
        return float(self.omega.max() - self.omega.min())

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.omega / TWO_PI


# ========== 脉冲程序 ==========

class Harmonic(BaseModel):
    """
    单个谐波分量，offset / amplitude 单位 rad/s
    inverted=True 表示在 phase 之上再加 π；翻转标志而不改写 phase，两次反相严格还原
    """
    model_config = ConfigDict(frozen=True)

    offset: float
    amplitude: float = Field(ge=0.0)
    phase: float = 0.0
    inverted: bool = False

    @property
    def total_phase(self) -> float:
        """实际相位，[0, 2π)"""
        return normalize_phase(self.phase + math.pi) if self.inverted else self.phase

    @property
    def signed_amplitude(self) -> float:
        # cos(θ + π) = -cos θ
        return -self.amplitude if self.inverted else self.amplitude

    @field_validator("phase")
    @classmethod
    def _normalize_phase(cls, v: float) -> float:
        return normalize_phase(v)


class PulseSegment(BaseModel):
    """矩形包络的多谐波脉冲段"""
    model_config = ConfigDict(frozen=True)

    duration: float = Field(gt=0.0)
    harmonics: Tuple[Harmonic, ...] = ()

    @model_validator(mode="after")
    def _distinct_offsets(self) -> "PulseSegment":
        offsets = sorted(h.offset for h in self.harmonics)
        for a, b in zip(offsets, offsets[1:]):
            if b - a <= 1e-9 * max(1.0, abs(a), abs(b)):
                raise ValueError(f"谐波频率重复: {a} / {b} rad/s")
        return self


class PulseProgram(BaseModel):
    """按顺序执行的脉冲段"""
    model_config = ConfigDict(frozen=True)

    segments: Tuple[PulseSegment, ...] = Field(min_length=1)

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)


# ========== 编码 ==========

class BitArray(BaseModel):
    """LSB 在前的比特数组"""
    model_config = ConfigDict(frozen=True)

    bits: Tuple[int, ...] = ()

    @field_validator("bits")
    @classmethod
    def _binary(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(b not in (0, 1) for b in v):
            raise ValueError("比特只能为 0 或 1")
        return v

    def __len__(self) -> int:
        return len(self.bits)


class BandPlan(BaseModel):
    """
    比特槽频率规划 (Hz, 旋转坐标系偏移)
    reversed=True 时 LSB 位于最高频率
    """
    model_config = ConfigDict(frozen=True)

    f_start: float
    delta_f: float = Field(gt=0.0)
    n_bits: int = Field(ge=1)
    reversed: bool = False

    def position(self, k: int) -> int:
        return self.n_bits - 1 - k if self.reversed else k

    def slot_frequencies(self) -> np.ndarray:
        return np.array(
            [self.f_start + self.position(k) * self.delta_f for k in range(self.n_bits)]
        )

    def span(self) -> Tuple[float, float]:
        """所有槽窗口覆盖的频率范围"""
        half = 0.5 * self.delta_f
        return (self.f_start - half, self.f_start + (self.n_bits - 1) * self.delta_f + half)


# ========== 传播 ==========

class DeviationState(BaseModel):
    """无迹厄米偏离密度算符"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray
    time: float = 0.0

    @model_validator(mode="after")
    def _hermitian_traceless(self) -> "DeviationState":
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("密度算符必须是方阵")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
            raise ValueError("密度算符不是厄米的")
        if abs(np.trace(m)) > 1e-10 * max(np.linalg.norm(m), 1.0):
            raise ValueError("偏离密度算符必须无迹")
        return self

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


class PropagationParams(BaseModel):
    """积分参数；dt 为空时按脉冲段自动选择"""
    model_config = ConfigDict(frozen=True)

    dt: Optional[float] = Field(default=None, gt=0.0)
    method: StepMethod = StepMethod.TROTTER2


# ========== 读出 ==========

class MagnitudeSpectrum(BaseModel):
    """绝对值谱，values 保留复数谱以便检查相位"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    freqs: np.ndarray
    mags: np.ndarray
    values: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


class ThresholdPolicy(BaseModel):
    """相对校准谱的判决阈值"""
    model_config = ConfigDict(frozen=True)

    fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    reference: Tuple[float, ...]

    @field_validator("reference")
    @classmethod
    def _positive(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not r > 0.0 for r in v):
            raise ValueError("参考幅度必须为正")
        return v


# ========== 激发区间 ==========

class RegimeReport(BaseModel):
    """激发区间分类结果"""
    model_config = ConfigDict(frozen=True)

    label: RegimeLabel
    crossover: Optional[Tuple[RegimeLabel, RegimeLabel]] = None
    thresholds: Tuple[float, float, float]
    omega: float
    kappa: float
    n_spins: int
    omega_loc: float
    rank: float
    margin_decades: float
    diagnostic: Optional[str] = None

    def to_json_dict(self) -> Dict[str, Any]:
        t1, t2, t3 = self.thresholds
        return {
            "label": self.label.value,
            "crossover": [r.value for r in self.crossover] if self.crossover else None,
            "omega_rad_s": self.omega,
            "omega_hz": self.omega / TWO_PI,
            "n_spins": self.n_spins,
            "kappa": self.kappa,
            "thresholds_rad_s": {"delta_omega": t1, "collective": t2, "omega_loc": t3},
            "thresholds_hz": {
                "delta_omega": t1 / TWO_PI,
                "collective": t2 / TWO_PI,
                "omega_loc": t3 / TWO_PI,
            },
            "margin_decades": self.margin_decades,
            "diagnostic": self.diagnostic,
        }


# ========== 实验结果 ==========

class RunResult(BaseModel):
    """一次实验运行的结果"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: ExperimentKind
    fid: np.ndarray
    dwell: float
    spectrum: MagnitudeSpectrum
    slot_amplitudes: Tuple[float, ...]
    bits: BitArray
    value_decimal: str
    regime: RegimeReport
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def value(self) -> int:
        return int(self.value_decimal)


class SweepRow(BaseModel):
    """幅度扫描中的一行"""
    model_config = ConfigDict(frozen=True)

    omega: float
    label: str
    rank: float
    peak_freq_hz: float
    peak_magnitude: float
    peak_re: float
    peak_im: float


class SweepResult(BaseModel):
    """幅度扫描结果，spectra 与 rows 一一对应"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    target_transition: int
    target_freq_hz: float
    duration: float
    rows: Tuple[SweepRow, ...]
    spectra: Tuple[MagnitudeSpectrum, ...]


# ========== 作业 ==========

def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class Job(BaseModel):
    """调度器中的一个计算作业"""
    id: str = Field(default_factory=lambda: str(uuid.uuid4()))
    name: str
    status: JobStatus = JobStatus.PENDING
    created_at: datetime = Field(default_factory=_utcnow)
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    error: Optional[str] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def elapsed(self) -> Optional[float]:
        if self.started_at is None or self.completed_at is None:
            return None
        return (self.completed_at - self.started_at).total_seconds()
