"""
实验描述文件模型
集群、脉冲、采集、噪声与传播参数，全部以 Hz / ms 为外部单位
"""
import hashlib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .models import TWO_PI, BandPlan, PropagationParams, StepMethod

ModelT = TypeVar("ModelT", bound=BaseModel)


class GeneratorName(str, Enum):
    CHAIN = "chain"
    ALL_TO_ALL = "all_to_all"
    RANDOM_GEOMETRIC = "random_geometric"


class ClusterSpec(BaseModel):
    """
    集群描述：显式矩阵或命名生成器
    frame_offset_hz 加到每个自旋的偏移上，用于把载波移出谱中心
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_spins: Optional[int] = Field(default=None, ge=1)
    offsets_hz: Optional[List[float]] = None
    couplings_hz: Optional[List[List[float]]] = None
    generator: Optional[GeneratorName] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    frame_offset_hz: float = 0.0

    @model_validator(mode="after")
    def _one_form(self) -> "ClusterSpec":
        explicit = self.offsets_hz is not None or self.couplings_hz is not None
        if explicit and self.generator is not None:
            raise ValueError("显式矩阵与生成器只能二选一")
        if explicit:
            if self.offsets_hz is None:
                raise ValueError("显式集群需要 offsets_hz")
            if self.n_spins is not None and self.n_spins != len(self.offsets_hz):
                raise ValueError(f"n_spins={self.n_spins} 与 offsets_hz 长度不一致")
        elif self.generator is None:
            raise ValueError("需要 offsets_hz/couplings_hz 或 generator")
        else:
            if self.n_spins is None:
                raise ValueError(f"生成器 {self.generator.value} 需要 n_spins")
            if self.generator == GeneratorName.RANDOM_GEOMETRIC and self.seed is None:
                raise ValueError("random_geometric 需要 seed")
        return self


# ========== 脉冲描述文件 ==========

class HarmonicDescription(BaseModel):
    model_config = ConfigDict(extra="forbid")

    offset_hz: float
    amplitude_hz: float = Field(ge=0.0)
    phase_deg: float = 0.0


class SegmentDescription(BaseModel):
    model_config = ConfigDict(extra="forbid")

    duration_ms: float = Field(gt=0.0)
    harmonics: List[HarmonicDescription] = Field(default_factory=list)


class PulseDescription(BaseModel):
    model_config = ConfigDict(extra="forbid")

    segments: List[SegmentDescription] = Field(min_length=1)


# ========== 实验配置 ==========

class PulseSpec(BaseModel):
    """写入梳与擦除梳的参数"""
    model_config = ConfigDict(extra="forbid")

    write_amplitude_hz: float = Field(default=10.5, ge=0.0)
    write_duration_ms: float = Field(default=50.0, gt=0.0)
    erase_amplitude_hz: float = Field(default=2.9, ge=0.0)
    erase_duration_ms: float = Field(default=10.0, gt=0.0)
    base_phase_deg: float = 0.0
    erase_area_hz_ms: Optional[float] = None  # tune 命令写回

    @property
    def write_amplitude(self) -> float:
        return TWO_PI * self.write_amplitude_hz

    @property
    def erase_amplitude(self) -> float:
        return TWO_PI * self.erase_amplitude_hz

    @property
    def write_duration(self) -> float:
        return self.write_duration_ms * 1e-3

    @property
    def erase_duration(self) -> float:
        return self.erase_duration_ms * 1e-3


class AcquisitionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_samples: int = Field(default=256, ge=2)
    dwell_s: float = Field(default=1e-4, gt=0.0)
    pad_factor: Optional[int] = Field(default=None, ge=1)

    @property
    def acquisition_time(self) -> float:
        return self.n_samples * self.dwell_s


class NoiseSpec(BaseModel):
    """FID 上的复高斯白噪声，sigma 为每个采样点的 rms"""
    model_config = ConfigDict(extra="forbid")

    sigma: float = Field(default=0.0, ge=0.0)


class PropagationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt_s: Optional[float] = Field(default=None, gt=0.0)
    method: StepMethod = StepMethod.TROTTER2

    def to_params(self) -> PropagationParams:
        return PropagationParams(dt=self.dt_s, method=self.method)


class SweepSpec(BaseModel):
    """幅度扫描：单谐波对准跃迁表中的一条谱线"""
    model_config = ConfigDict(extra="forbid")

    target_transition: Optional[int] = Field(default=None, ge=0)
    duration_ms: Optional[float] = Field(default=None, gt=0.0)
    phase_deg: float = 0.0


class ExperimentConfig(BaseModel):
    """完整实验配置"""
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    cluster: ClusterSpec
    band: Optional[BandPlan] = None
    n_bits: int = Field(default=8, ge=1)
    band_fraction: float = Field(default=0.6, gt=0.0, le=1.0)
    align_to_cluster: bool = False
    pulse: PulseSpec = Field(default_factory=PulseSpec)
    acquisition: AcquisitionSpec = Field(default_factory=AcquisitionSpec)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    n_transients: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    propagation: PropagationSpec = Field(default_factory=PropagationSpec)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    threshold_fraction: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    kappa: Optional[float] = Field(default=None, ge=1.0)

    def config_hash(self) -> str:
        """语义相同的配置得到相同的哈希"""
        payload = orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(payload).hexdigest()

    def with_overrides(self, **updates: Any) -> "ExperimentConfig":
        """返回覆盖部分字段后的新配置（重新校验）"""
        data = self.model_dump(mode="json")
        for key, value in updates.items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"配置覆盖无效: {e}") from e

    def dump_json(self) -> bytes:
        return orjson.dumps(
            self.model_dump(mode="json", exclude_none=True),
            option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS,
        )


def load_model(source: Union[str, Path, Dict[str, Any]], model: Type[ModelT]) -> ModelT:
    """从 JSON 文件或字典加载描述，任何失败都归为 ConfigError"""
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        try:
            data = orjson.loads(path.read_bytes())
        except FileNotFoundError as e:
            raise ConfigError(f"文件不存在: {path}") from e
        except OSError as e:
            raise ConfigError(f"无法读取: {path}: {e}") from e
        except orjson.JSONDecodeError as e:
            raise ConfigError(f"JSON 解析失败: {path}: {e}") from e
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{model.__name__} 校验失败: {e}", {"errors": e.errors()}) from e


def load_cluster_spec(source: Union[str, Path, Dict[str, Any]]) -> ClusterSpec:
    return load_model(source, ClusterSpec)


def load_experiment_config(source: Union[str, Path, Dict[str, Any]]) -> ExperimentConfig:
    return load_model(source, ExperimentConfig)
