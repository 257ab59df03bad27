"""
spinproc - 偶极耦合自旋团簇上的并行频域计算模拟器
"""
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import config
from .engine import ExperimentEngine, TuneResult, simulate_program
from .logger import get_logger
from .models import (
    TWO_PI,
    ExperimentKind,
    Job,
    JobStatus,
    MagnitudeSpectrum,
    RegimeReport,
    RunResult,
    SweepResult,
    TransitionTable,
)
from .pulse import load_pulse_program
from .regime import classify_regime
from .scheduler import JobScheduler
from .specs import (
    AcquisitionSpec,
    ClusterSpec,
    ExperimentConfig,
    load_cluster_spec,
    load_experiment_config,
)
from .spin_model import build_cluster, spin_system

logger = get_logger("framework")

ConfigSource = Union[str, Path, Dict[str, Any], ExperimentConfig]


class SpinProcessor:
    """
    SpinProcessor 主入口
    按配置缓存实验引擎，所有实验共用一个作业调度器
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.scheduler = JobScheduler(max_workers=max_workers)
        self._engines: Dict[str, ExperimentEngine] = {}

    # ========== 引擎 ==========

    def engine(self, source: ConfigSource) -> ExperimentEngine:
        """同一配置（按哈希）复用同一引擎，校准参考随之保留"""
        cfg = source if isinstance(source, ExperimentConfig) else load_experiment_config(source)
        key = cfg.config_hash()
        engine = self._engines.get(key)
        if engine is None:
            engine = ExperimentEngine(cfg, self.scheduler)
            self._engines[key] = engine
        return engine

    async def _calibrated(self, source: ConfigSource) -> ExperimentEngine:
        engine = self.engine(source)
        if engine.reference is None:
            await engine.run_calibration()
        return engine

    # ========== 实验 ==========

    async def calibrate(self, source: ConfigSource) -> RunResult:
        return await self.engine(source).run_calibration()

    async def encode(self, source: ConfigSource, x: int) -> RunResult:
        """未校准时先自动校准"""
        engine = await self._calibrated(source)
        return await engine.run_encode(x)

    async def not_gate(self, source: ConfigSource, x: int) -> RunResult:
        engine = await self._calibrated(source)
        return await engine.run_not_gate(x)

    async def batch(
        self, source: ConfigSource, xs: Sequence[int], not_gate: bool = False
    ) -> List[RunResult]:
        engine = await self._calibrated(source)
        kind = ExperimentKind.NOT_GATE if not_gate else ExperimentKind.ENCODE
        return await engine.execute_batch(xs, kind)

    async def sweep(self, source: ConfigSource, omegas: Sequence[float]) -> SweepResult:
        return await self.engine(source).sweep_amplitude(omegas)

    async def tune(self, source: ConfigSource, slot: int = 0) -> TuneResult:
        return await self.engine(source).tune_erase(slot)

    # ========== 无状态工具 ==========

    @staticmethod
    def transitions(cluster: Union[str, Path, Dict[str, Any], ClusterSpec]) -> TransitionTable:
        spec = cluster if isinstance(cluster, ClusterSpec) else load_cluster_spec(cluster)
        return spin_system(build_cluster(spec)).transitions

    @staticmethod
    def classify(
        omega_hz: float,
        n_spins: int,
        omega_loc_hz: Optional[float] = None,
        kappa: Optional[float] = None,
    ) -> RegimeReport:
        if omega_loc_hz is None:
            omega_loc_hz = config.get_config().default_omega_loc_hz
        return classify_regime(TWO_PI * omega_hz, n_spins, TWO_PI * omega_loc_hz, kappa)

    async def simulate(
        self,
        cluster: Union[str, Path, Dict[str, Any], ClusterSpec],
        pulse: Union[str, Path, Dict[str, Any]],
        acquisition: Optional[AcquisitionSpec] = None,
    ) -> Tuple[np.ndarray, MagnitudeSpectrum]:
        spec = cluster if isinstance(cluster, ClusterSpec) else load_cluster_spec(cluster)
        program = load_pulse_program(pulse)
        return await self.scheduler.run("simulate", simulate_program, spec, program, acquisition)

    # ========== 回调与状态 ==========

    def on_complete(self, func: Callable) -> Callable:
        """注册作业完成回调"""
        self.scheduler.on("on_complete", func)
        return func

    def on_error(self, func: Callable) -> Callable:
        """注册作业失败回调"""
        self.scheduler.on("on_error", func)
        return func

    def list_jobs(self, status: Optional[JobStatus] = None) -> List[Job]:
        if status:
            return self.scheduler.get_jobs_by_status(status)
        return self.scheduler.get_all_jobs()

    @property
    def status(self) -> Dict[str, Any]:
        return {
            "engines": len(self._engines),
            "calibrated": sum(1 for e in self._engines.values() if e.reference is not None),
            "running": self.scheduler.running_count,
            "jobs": self.scheduler.stats,
        }


# 便捷函数
def create_app(max_workers: Optional[int] = None) -> SpinProcessor:
    """创建 SpinProcessor 实例"""
    return SpinProcessor(max_workers=max_workers)


__all__ = [
    "SpinProcessor",
    "ExperimentEngine",
    "ExperimentConfig",
    "ClusterSpec",
    "RunResult",
    "SweepResult",
    "TuneResult",
    "Job",
    "JobStatus",
    "create_app",
]
