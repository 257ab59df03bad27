"""
异常定义
每类错误携带 CLI 退出码
"""
from typing import Optional


class SpinProcessorError(Exception):
    """框架基础异常"""

    exit_code: int = 1

    def __init__(self, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class ConfigError(SpinProcessorError, ValueError):
    """配置错误（集群、脉冲、频带、实验参数）"""

    exit_code = 2


class ClusterError(ConfigError):
    """自旋集群描述无效"""


class BandError(ConfigError):
    """频带规划与集群谱不匹配"""


class CalibrationError(SpinProcessorError):
    """校准失败：频带没有激发集群"""

    exit_code = 3


class MissingCalibrationError(SpinProcessorError):
    """编码 / 取反之前未执行校准"""

    exit_code = 3


class StabilityError(SpinProcessorError):
    """积分步长违反稳定性约束"""

    exit_code = 4


class CodecError(SpinProcessorError, ValueError):
    """整数 / 比特数组越界"""

    exit_code = 2


class SlotRangeError(SpinProcessorError, ValueError):
    """比特槽频率落在谱范围之外"""

    exit_code = 2


class OutputError(SpinProcessorError):
    """结果文件无法写出（输出目录不可用）"""

    exit_code = 2
