"""
实验引擎
组装集群、频带与脉冲程序，执行校准 / 编码 / 取反 / 幅度扫描，
并在作业调度器上完成多次累加平均
"""
import hashlib
import math
import time
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict
from tenacity import AsyncRetrying, retry_if_exception_type, stop_after_attempt

from .codec import (
    align_band,
    all_ones,
    bitwise_not_oracle,
    default_band,
    int_to_bits,
    validate_band,
)
from .config import config
from .errors import CalibrationError, ConfigError, MissingCalibrationError, SlotRangeError
from .logger import get_logger
from .models import (
    TWO_PI,
    BandPlan,
    BitArray,
    ExperimentKind,
    MagnitudeSpectrum,
    PropagationParams,
    PulseProgram,
    PulseSegment,
    RegimeReport,
    RunResult,
    SweepResult,
    SweepRow,
    ThresholdPolicy,
)
from .propagator import acquire_fid, evolve_program, thermal_state
from .pulse import anti_phase, comb_from_bits, comb_rss, single_tone
from .readout import decode_bits, magnitude_spectrum, noise_floor, slot_amplitudes, slot_peaks
from .regime import classify_regime
from .scheduler import JobScheduler
from .specs import AcquisitionSpec, ClusterSpec, ExperimentConfig
from .spin_model import SpinSystem, build_cluster, spin_system

logger = get_logger("engine")

# 64 位参考字及其按位取反
WIDE_WORD_BITS = 64
WIDE_WORD_X = 7348754808244345529
WIDE_WORD_NOT = 11097989265465206086


class TuneResult(BaseModel):
    """擦除幅度调谐结果"""
    model_config = ConfigDict(frozen=True)

    slot: int
    erase_amplitude_hz: float
    erase_duration_ms: float
    erase_area_hz_ms: float
    iterations: int
    residual: float
    config: ExperimentConfig


def bits_value(bits: BitArray) -> int:
    """任意长度比特数组的整数值"""
    return sum(b << k for k, b in enumerate(bits.bits))


class ExperimentEngine:
    """
    实验引擎
    - 由 ExperimentConfig 组装自旋系统与频带
    - 确定性模拟只算一次，噪声按 (seed, 程序, 序号) 独立生成
    - 校准参考幅度保存在引擎上，供编码 / 取反判决
    """

    def __init__(self, cfg: ExperimentConfig, scheduler: Optional[JobScheduler] = None):
        settings = config.get_config()
        self.cfg = cfg
        self.scheduler = scheduler or JobScheduler()
        self.cluster = build_cluster(cfg.cluster)
        self.system: SpinSystem = spin_system(self.cluster)
        self.params: PropagationParams = cfg.propagation.to_params()
        self.fraction = cfg.threshold_fraction or settings.threshold_fraction
        self.kappa = cfg.kappa or settings.default_kappa
        self.pad_factor = cfg.acquisition.pad_factor or settings.pad_factor
        self.band = self._plan_band()
        self._check_acquisition()

        self.reference: Optional[ThresholdPolicy] = None
        self._clean_cache: Dict[PulseProgram, np.ndarray] = {}

        logger.info(
            "engine_ready",
            experiment=cfg.name,
            n_spins=self.cluster.n_spins,
            transitions=len(self.system.transitions),
            f_start_hz=self.band.f_start,
            delta_f_hz=self.band.delta_f,
            n_bits=self.band.n_bits,
        )

    # ========== 组装 ==========

    def _plan_band(self) -> BandPlan:
        table = self.system.transitions
        band = self.cfg.band or default_band(table, self.cfg.n_bits, self.cfg.band_fraction)
        if self.cfg.align_to_cluster:
            aligned = align_band(band, table)
            logger.info("band_aligned", shift_hz=aligned.f_start - band.f_start)
            band = aligned
        validate_band(band, table)
        return band

    def _check_acquisition(self) -> None:
        acq = self.cfg.acquisition
        if acq.acquisition_time < 4.0 / self.band.delta_f:
            raise ConfigError(
                f"采集时长 {acq.acquisition_time:.4g} s 不足 4/Δf = {4.0 / self.band.delta_f:.4g} s"
            )
        nyquist = 0.5 / acq.dwell_s
        lo, hi = self.band.span()
        if lo < -nyquist or hi >= nyquist:
            raise SlotRangeError(
                f"频带 [{lo:.1f}, {hi:.1f}] Hz 超出采样带宽 ±{nyquist:.1f} Hz",
                {"nyquist_hz": nyquist},
            )

    @property
    def n_bits(self) -> int:
        return self.band.n_bits

    # ========== 脉冲程序 ==========

    def write_segment(self, bits: BitArray, amplitude: Optional[float] = None) -> PulseSegment:
        p = self.cfg.pulse
        return comb_from_bits(
            bits,
            self.band,
            p.write_amplitude if amplitude is None else amplitude,
            p.write_duration,
            math.radians(p.base_phase_deg),
        )

    def erase_segment(self, bits: BitArray, amplitude: Optional[float] = None) -> PulseSegment:
        p = self.cfg.pulse
        comb = comb_from_bits(
            bits,
            self.band,
            p.erase_amplitude if amplitude is None else amplitude,
            p.erase_duration,
            math.radians(p.base_phase_deg),
        )
        return anti_phase(comb)

    def calibration_program(self, amplitude: Optional[float] = None) -> PulseProgram:
        return PulseProgram(segments=(self.write_segment(all_ones(self.n_bits), amplitude),))

    def encode_program(self, x: int) -> PulseProgram:
        return PulseProgram(segments=(self.write_segment(int_to_bits(x, self.n_bits)),))

    def not_program(self, x: int, erase_amplitude: Optional[float] = None) -> PulseProgram:
        return PulseProgram(
            segments=(
                self.write_segment(all_ones(self.n_bits)),
                self.erase_segment(int_to_bits(x, self.n_bits), erase_amplitude),
            )
        )

    # ========== 模拟与平均 ==========

    def simulate_clean(self, program: PulseProgram) -> np.ndarray:
        """无噪声 FID（同步，按程序缓存；返回值不可原地修改）"""
        cached = self._clean_cache.get(program)
        if cached is not None:
            return cached
        acq = self.cfg.acquisition
        state = evolve_program(thermal_state(self.system), self.system, program, self.params)
        fid = acquire_fid(state, self.system, acq.n_samples, acq.dwell_s)
        self._clean_cache[program] = fid
        return fid

    @staticmethod
    def stream_key(program: PulseProgram) -> int:
        """程序内容决定的噪声流编号"""
        payload = orjson.dumps(program.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
        return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")

    def transient_noise(self, key: int, index: int) -> np.ndarray:
        """第 index 次累加的复高斯噪声，E|z|² = σ²"""
        rng = np.random.default_rng([self.cfg.seed, key, index])
        n = self.cfg.acquisition.n_samples
        scale = self.cfg.noise.sigma / math.sqrt(2.0)
        return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    async def average_transients(
        self, program: Optional[PulseProgram] = None, clean: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """
        n_transients 次相同的确定性模拟各自叠加独立噪声后取平均
        σ = 0 时直接返回单次结果
        """
        program = program or self.calibration_program()
        if clean is None:
            clean = await self.scheduler.run("simulate", self.simulate_clean, program)
        sigma = self.cfg.noise.sigma
        if sigma == 0.0:
            return clean.copy()

        key = self.stream_key(program)
        noises = await self.scheduler.map(
            "transient", partial(self.transient_noise, key), range(self.cfg.n_transients)
        )
        return clean + np.mean(np.stack(noises), axis=0)

    def calibration_floor(self) -> float:
        """校准判据：max(factor × 噪声底, 数值零)"""
        settings = config.get_config()
        acq = self.cfg.acquisition
        statistical = settings.noise_floor_factor * noise_floor(
            self.cfg.noise.sigma, acq.n_samples, self.cfg.n_transients
        )
        s_z_norm = self.system.n_spins * self.system.dimension / 4.0
        return max(statistical, 1e-9 * s_z_norm * acq.n_samples)

    # ========== 结果 ==========

    def regime_for(self, omega: float) -> RegimeReport:
        omega_loc = self.system.omega_loc
        if not omega_loc > 0.0:
            omega_loc = TWO_PI * config.get_config().default_omega_loc_hz
            logger.warning("omega_loc_fallback", omega_loc_hz=omega_loc / TWO_PI)
        return classify_regime(omega, self.system.n_spins, omega_loc, self.kappa)

    def _spectrum(self, fid: np.ndarray) -> Tuple[MagnitudeSpectrum, List[float]]:
        spectrum = magnitude_spectrum(fid, self.cfg.acquisition.dwell_s, self.pad_factor)
        return spectrum, slot_amplitudes(spectrum, self.band)

    def _result(
        self,
        kind: ExperimentKind,
        program: PulseProgram,
        fid: np.ndarray,
        spectrum: MagnitudeSpectrum,
        amps: List[float],
        bits: BitArray,
        amplitude: float,
        started: float,
        **extra: Any,
    ) -> RunResult:
        metadata: Dict[str, Any] = {
            "experiment": self.cfg.name,
            "seed": self.cfg.seed,
            "config_hash": self.cfg.config_hash(),
            "n_transients": self.cfg.n_transients,
            "noise_sigma": self.cfg.noise.sigma,
            "band": self.band.model_dump(),
            "write_amplitude_hz": amplitude / TWO_PI,
            # 每段梳的平方和根幅度
            "comb_rss_hz": [comb_rss(seg) / TWO_PI for seg in program.segments],
            "wall_time_s": time.perf_counter() - started,
        }
        metadata.update(extra)
        return RunResult(
            kind=kind,
            fid=fid,
            dwell=self.cfg.acquisition.dwell_s,
            spectrum=spectrum,
            slot_amplitudes=tuple(amps),
            bits=bits,
            value_decimal=str(bits_value(bits)),
            regime=self.regime_for(amplitude),
            metadata=metadata,
        )

    def _require_reference(self) -> ThresholdPolicy:
        if self.reference is None:
            raise MissingCalibrationError("尚未校准：请先执行 run_calibration")
        return self.reference

    # ========== 实验 ==========

    async def run_calibration(self, amplitude: Optional[float] = None) -> RunResult:
        """全 1 梳，记录每个槽的参考幅度"""
        started = time.perf_counter()
        amplitude = self.cfg.pulse.write_amplitude if amplitude is None else amplitude
        program = self.calibration_program(amplitude)
        fid = await self.average_transients(program)
        spectrum, amps = self._spectrum(fid)

        floor = self.calibration_floor()
        weak = [k for k, a in enumerate(amps) if a <= floor]
        if weak:
            logger.warning("calibration_failed", weak_slots=weak, floor=floor)
            raise CalibrationError(
                f"槽 {weak} 的参考幅度不高于噪声判据 {floor:.3g}，频带没有激发集群",
                {"weak_slots": weak, "floor": floor, "amplitudes": amps},
            )

        self.reference = ThresholdPolicy(fraction=self.fraction, reference=tuple(amps))
        bits = decode_bits(amps, self.reference)
        logger.info(
            "calibration_done",
            amplitude_hz=amplitude / TWO_PI,
            min_reference=min(amps),
            floor=floor,
        )
        return self._result(
            ExperimentKind.CALIBRATION,
            program,
            fid,
            spectrum,
            amps,
            bits,
            amplitude,
            started,
            reference=list(amps),
            floor=floor,
        )

    async def run_encode(self, x: int) -> RunResult:
        """写入 x 对应的梳并按校准参考判决"""
        return (await self.execute_batch([x], ExperimentKind.ENCODE))[0]

    async def run_not_gate(self, x: int) -> RunResult:
        """全 1 梳之后施加 x 的反相梳，结果应为 2^M - 1 - x"""
        return (await self.execute_batch([x], ExperimentKind.NOT_GATE))[0]

    async def execute_batch(
        self, xs: Sequence[int], kind: ExperimentKind = ExperimentKind.ENCODE
    ) -> List[RunResult]:
        """并发执行多次编码或取反；结果顺序与 xs 一致"""
        policy = self._require_reference()
        if kind == ExperimentKind.ENCODE:
            programs = [self.encode_program(x) for x in xs]
        elif kind == ExperimentKind.NOT_GATE:
            programs = [self.not_program(x) for x in xs]
        else:
            raise ConfigError(f"execute_batch 不支持 {kind.value}")

        started = time.perf_counter()
        cleans = await self.scheduler.map(f"{kind.value}_batch", self.simulate_clean, programs)

        results = []
        for x, program, clean in zip(xs, programs, cleans):
            fid = await self.average_transients(program, clean)
            spectrum, amps = self._spectrum(fid)
            bits = decode_bits(amps, policy)
            value = bits_value(bits)
            extra: Dict[str, Any] = {"x": str(x)}
            if kind == ExperimentKind.ENCODE:
                expected = x
            else:
                expected = bitwise_not_oracle(x, self.n_bits)
                extra["wide_word_check"] = {
                    "bits": WIDE_WORD_BITS,
                    "x": str(WIDE_WORD_X),
                    "y": str(bitwise_not_oracle(WIDE_WORD_X, WIDE_WORD_BITS)),
                    "matches": bitwise_not_oracle(WIDE_WORD_X, WIDE_WORD_BITS) == WIDE_WORD_NOT,
                }
            extra["expected"] = str(expected)
            extra["oracle_match"] = value == expected
            extra["bit_errors"] = bin(value ^ expected).count("1")
            if value != expected:
                logger.warning(
                    "oracle_mismatch",
                    kind=kind.value,
                    x=x,
                    decoded=value,
                    expected=expected,
                    slot_amplitudes=amps,
                    reference=list(policy.reference),
                )
            logger.info(
                "run_decoded",
                kind=kind.value,
                x=x,
                decoded=value,
                expected=expected,
                bit_errors=extra["bit_errors"],
            )
            results.append(
                self._result(
                    kind,
                    program,
                    fid,
                    spectrum,
                    amps,
                    bits,
                    self.cfg.pulse.write_amplitude,
                    started,
                    **extra,
                )
            )
        return results

    async def sweep_amplitude(self, omegas: Sequence[float]) -> SweepResult:
        """单谐波对准一条跃迁，逐个幅度测量响应"""
        if len(omegas) == 0:
            raise ConfigError("幅度列表为空")
        if any(not w > 0.0 for w in omegas):
            raise ConfigError(f"幅度必须为正: {list(omegas)}")
        table = self.system.transitions
        sweep = self.cfg.sweep
        target = sweep.target_transition
        if target is None:
            target = int(np.argmax(table.weight))
        if target >= len(table):
            raise ConfigError(f"跃迁序号 {target} 超出跃迁表长度 {len(table)}")

        offset = float(table.omega[target])
        f_target = offset / TWO_PI
        duration = (sweep.duration_ms or self.cfg.pulse.write_duration_ms) * 1e-3
        phase = math.radians(sweep.phase_deg)
        programs = [
            PulseProgram(segments=(single_tone(offset, float(w), duration, phase),)) for w in omegas
        ]
        cleans = await self.scheduler.map("sweep", self.simulate_clean, programs)

        acq = self.cfg.acquisition
        half_window = 2.0 / acq.acquisition_time
        rows, spectra = [], []
        for omega, program, clean in zip(omegas, programs, cleans):
            fid = await self.average_transients(program, clean)
            spectrum = magnitude_spectrum(fid, acq.dwell_s, self.pad_factor)
            near = np.flatnonzero(np.abs(spectrum.freqs - f_target) <= half_window)
            if near.size == 0:
                raise SlotRangeError(f"目标谱线 {f_target:.3f} Hz 超出谱范围")
            peak = int(near[np.argmax(spectrum.mags[near])])
            report = self.regime_for(float(omega))
            label = report.label.value
            if report.crossover is not None:
                label = f"Crossover({report.crossover[0].value}/{report.crossover[1].value})"
            rows.append(
                SweepRow(
                    omega=float(omega),
                    label=label,
                    rank=report.rank,
                    peak_freq_hz=float(spectrum.freqs[peak]),
                    peak_magnitude=float(spectrum.mags[peak]),
                    peak_re=float(spectrum.values[peak].real),
                    peak_im=float(spectrum.values[peak].imag),
                )
            )
            spectra.append(spectrum)
        logger.info("sweep_done", target=target, target_freq_hz=f_target, points=len(rows))
        return SweepResult(
            target_transition=target,
            target_freq_hz=f_target,
            duration=duration,
            rows=tuple(rows),
            spectra=tuple(spectra),
        )

    # ========== 调参 ==========

    async def tune_erase(self, slot: int = 0, iterations: int = 10) -> TuneResult:
        """
        二分擦除幅度
        取单比特 x = 1 << slot 的取反实验，该槽谱线在峰值频点的复数值投影到
        未擦除时的相位上；投影随擦除幅度单调下降，过零处即擦除幅度
        """
        if not 0 <= slot < self.n_bits:
            raise ConfigError(f"槽序号 {slot} 超出 [0, {self.n_bits})")
        pulse = self.cfg.pulse
        x = 1 << slot

        baseline = await self.scheduler.run(
            "tune_baseline", self.simulate_clean, self.not_program(x, erase_amplitude=0.0)
        )
        spectrum, _ = self._spectrum(baseline)
        peak = slot_peaks(spectrum, self.band)[slot]
        c0 = complex(spectrum.values[peak])
        if abs(c0) <= self.calibration_floor():
            raise CalibrationError(f"槽 {slot} 没有可擦除的信号")

        async def signed_response(amplitude: float) -> float:
            fid = await self.scheduler.run(
                "tune_trial", self.simulate_clean, self.not_program(x, erase_amplitude=amplitude)
            )
            value = complex(self._spectrum(fid)[0].values[peak])
            return (value * c0.conjugate()).real / abs(c0)

        lo = 0.0
        hi = 2.0 * pulse.write_amplitude * pulse.write_duration / pulse.erase_duration
        s_hi = await signed_response(hi)
        if s_hi > 0.0:
            raise CalibrationError(
                f"擦除幅度区间 [0, {hi / TWO_PI:.3f}] Hz 内响应未过零", {"response": s_hi}
            )
        for step in range(iterations):
            mid = 0.5 * (lo + hi)
            s_mid = await signed_response(mid)
            logger.debug("tune_step", step=step, amplitude_hz=mid / TWO_PI, response=s_mid)
            if s_mid > 0.0:
                lo = mid
            else:
                hi = mid

        amplitude = 0.5 * (lo + hi)
        residual = abs(await signed_response(amplitude)) / abs(c0)
        amplitude_hz = amplitude / TWO_PI
        area = amplitude_hz * pulse.erase_duration_ms
        tuned = self.cfg.with_overrides(
            pulse={"erase_amplitude_hz": amplitude_hz, "erase_area_hz_ms": area}
        )
        self.cfg = tuned
        logger.info("erase_tuned", slot=slot, amplitude_hz=amplitude_hz, residual=residual)
        return TuneResult(
            slot=slot,
            erase_amplitude_hz=amplitude_hz,
            erase_duration_ms=pulse.erase_duration_ms,
            erase_area_hz_ms=area,
            iterations=iterations,
            residual=residual,
            config=tuned,
        )

    async def search_write_amplitude(
        self, start: Optional[float] = None, factor: float = 1.5, attempts: int = 5
    ) -> RunResult:
        """校准失败时按 factor 逐次提高写入幅度重试"""
        base = self.cfg.pulse.write_amplitude if start is None else start
        amplitude = base
        async for attempt in AsyncRetrying(
            stop=stop_after_attempt(attempts),
            retry=retry_if_exception_type(CalibrationError),
            reraise=True,
        ):
            with attempt:
                amplitude = base * factor ** (attempt.retry_state.attempt_number - 1)
                logger.info(
                    "write_amplitude_attempt",
                    attempt=attempt.retry_state.attempt_number,
                    amplitude_hz=amplitude / TWO_PI,
                )
                result = await self.run_calibration(amplitude)
        self.cfg = self.cfg.with_overrides(pulse={"write_amplitude_hz": amplitude / TWO_PI})
        return result


def simulate_program(
    cluster: ClusterSpec,
    program: PulseProgram,
    acquisition: Optional[AcquisitionSpec] = None,
    params: Optional[PropagationParams] = None,
) -> Tuple[np.ndarray, MagnitudeSpectrum]:
    """任意脉冲程序作用于热平衡态后的 FID 与谱"""
    acquisition = acquisition or AcquisitionSpec()
    system = spin_system(build_cluster(cluster))
    state = evolve_program(thermal_state(system), system, program, params)
    fid = acquire_fid(state, system, acquisition.n_samples, acquisition.dwell_s)
    spectrum = magnitude_spectrum(fid, acquisition.dwell_s, acquisition.pad_factor)
    logger.info(
        "program_simulated",
        n_spins=system.n_spins,
        segments=len(program.segments),
        duration_s=program.total_duration,
    )
    return fid, spectrum
