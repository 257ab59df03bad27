"""
传播子
偏离密度算符在 H_int + Ω(t) S_x 下的演化与 FID 采集

trotter2 在 S_x 本征坐标系中执行：S_x = W diag(m_x) W，W 为 N 个 Hadamard 的
Kronecker 积，m_x = N/2 - popcount。每步只需一次逐元素相位与一次与固定
整步自由演化算符的相似变换。
"""
import math
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm

from .config import config
from .errors import ConfigError, StabilityError
from .logger import get_logger
from .models import (
    TWO_PI,
    DeviationState,
    PropagationParams,
    PulseProgram,
    PulseSegment,
    SpinCluster,
    StepMethod,
)
from .pulse import drive_samples, peak_drive
from .spin_model import SpinSystem, magnetization_numbers, spin_operators

logger = get_logger("propagator")

SystemLike = Union[SpinSystem, np.ndarray]

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
_FID_CHUNK = 4096


def as_system(system: SystemLike) -> SpinSystem:
    """接受 SpinSystem 或 H_int 矩阵"""
    if isinstance(system, SpinSystem):
        return system
    return SpinSystem(np.asarray(system))


@lru_cache(maxsize=8)
def sx_frame(n_spins: int) -> Tuple[np.ndarray, np.ndarray]:
    """(W, m_x)：S_x = W diag(m_x) W"""
    w = np.ones((1, 1))
    for _ in range(n_spins):
        w = np.kron(w, _HADAMARD)
    return w, magnetization_numbers(n_spins)


def thermal_state(source: Union[SpinCluster, SpinSystem]) -> DeviationState:
    """高温平衡态，ρ = S_z"""
    n = source.n_spins
    return DeviationState(matrix=spin_operators(n).s_z.astype(complex), time=0.0)


def default_dt(system: SpinSystem, seg: PulseSegment) -> float:
    """min(1/(oversampling · f_max), 稳定性上限)"""
    cfg = config.get_config()
    rates = [system.omega_loc]
    rates.extend(abs(h.offset) for h in seg.harmonics)
    rates.extend(h.amplitude for h in seg.harmonics)
    f_max = max(rates) / TWO_PI

    candidates = [seg.duration]
    if f_max > 0.0:
        candidates.append(1.0 / (cfg.dt_oversampling * f_max))
    bound = peak_drive(seg) + system.spectral_norm
    if bound > 0.0:
        candidates.append(0.999 * cfg.stability_limit / bound)
    return min(candidates)


def check_stability(system: SpinSystem, seg: PulseSegment, dt: float) -> None:
    """dt · (Σ|A_k| + ‖H_int‖₂) ≤ stability_limit"""
    limit = config.get_config().stability_limit
    product = dt * (peak_drive(seg) + system.spectral_norm)
    if product > limit:
        raise StabilityError(
            f"步长 {dt:.3e} s 违反稳定性约束: {product:.3f} > {limit}",
            {"dt": dt, "product": product, "limit": limit},
        )


def step_unitary(
    system: SystemLike, theta: float, h: float, method: StepMethod = StepMethod.TROTTER2
) -> np.ndarray:
    """单步传播算符，theta = Ω(t_mid)·h"""
    system = as_system(system)
    if method == StepMethod.TROTTER2:
        w, mx = sx_frame(system.n_spins)
        uh = system.free_propagator(0.5 * h)
        rotation = (w * np.exp(-1j * theta * mx)) @ w
        return uh @ rotation @ uh
    return expm(-1j * (system.hamiltonian * h + theta * system.operators.s_x))


def _trotter2(rho: np.ndarray, system: SpinSystem, h: float, thetas: np.ndarray) -> np.ndarray:
    w, mx = sx_frame(system.n_spins)
    uh = system.free_propagator(0.5 * h)
    c = w @ system.free_propagator(h) @ w
    c_dag = c.conj().T

    z = w @ uh @ rho @ uh.conj().T @ w
    last = thetas.size - 1
    for k, theta in enumerate(thetas):
        d = np.exp(-1j * theta * mx)
        z = d[:, None] * z * d.conj()[None, :]
        if k < last:
            z = c @ z @ c_dag
    p = uh @ w
    return p @ z @ p.conj().T


def _midpoint(rho: np.ndarray, system: SpinSystem, h: float, thetas: np.ndarray) -> np.ndarray:
    h_step = system.hamiltonian * h
    sx = system.operators.s_x
    for theta in thetas:
        u = expm(-1j * (h_step + theta * sx))
        rho = u @ rho @ u.conj().T
    return rho


def _tidy(rho: np.ndarray) -> np.ndarray:
    """去掉舍入误差带来的非厄米与迹分量"""
    rho = 0.5 * (rho + rho.conj().T)
    dim = rho.shape[0]
    rho[np.diag_indices(dim)] -= np.trace(rho) / dim
    return rho


def evolve_free(state: DeviationState, system: SystemLike, t: float) -> DeviationState:
    """ρ ← U ρ U†, U = exp(-i H_int t)，在本征基中精确计算"""
    system = as_system(system)
    if t == 0.0:
        return DeviationState(matrix=state.matrix.copy(), time=state.time)
    eps = system.eigen.eigenvalues
    rho_e = system.to_eigenbasis(state.matrix)
    phase = np.exp(-1j * eps * t)
    rho_e = phase[:, None] * rho_e * phase.conj()[None, :]
    return DeviationState(matrix=_tidy(system.from_eigenbasis(rho_e)), time=state.time + t)


def evolve_pulse(
    state: DeviationState,
    system: SystemLike,
    seg: PulseSegment,
    params: Optional[PropagationParams] = None,
) -> DeviationState:
    """
    在一个脉冲段内演化
    驱动相位以 state.time 为原点，连续的段共享同一载波
    """
    system = as_system(system)
    params = params or PropagationParams()
    if not seg.harmonics:
        return evolve_free(state, system, seg.duration)

    dt = params.dt if params.dt is not None else default_dt(system, seg)
    check_stability(system, seg, dt)

    n_steps = max(1, math.ceil(seg.duration / dt - 1e-9))
    h = seg.duration / n_steps
    midpoints = (np.arange(n_steps) + 0.5) * h
    thetas = drive_samples(seg, midpoints, origin=state.time) * h

    logger.debug(
        "evolve_pulse",
        method=params.method.value,
        harmonics=len(seg.harmonics),
        steps=n_steps,
        dt=h,
    )
    if params.method == StepMethod.TROTTER2:
        rho = _trotter2(state.matrix, system, h, thetas)
    else:
        rho = _midpoint(state.matrix, system, h, thetas)
    return DeviationState(matrix=_tidy(rho), time=state.time + seg.duration)


def evolve_program(
    state: DeviationState,
    system: SystemLike,
    program: PulseProgram,
    params: Optional[PropagationParams] = None,
) -> DeviationState:
    """按顺序执行所有段"""
    system = as_system(system)
    for seg in program.segments:
        state = evolve_pulse(state, system, seg, params)
    return state


def acquire_fid(
    state: DeviationState, system: SystemLike, n_samples: int, dwell: float
) -> np.ndarray:
    """
    s_k = Tr(ρ(k·dwell) S_+)
    S_+ 只连接 M 相差 1 的本征态，因此 FID 是跃迁表中各谱线的叠加：
    s(t) = Σ 2 ρ̃_ji ⟨i|S_x|j⟩ exp(+i ω_ij t)，i 为 M 较高的态
    """
    if n_samples < 2:
        raise ConfigError(f"n_samples 必须 >= 2: {n_samples}")
    if not dwell > 0.0:
        raise ConfigError(f"dwell 必须为正: {dwell}")
    system = as_system(system)
    table = system.transitions

    rho_e = system.to_eigenbasis(state.matrix)
    amplitudes = 2.0 * rho_e[table.j, table.i] * table.element
    times = np.arange(n_samples) * dwell

    fid = np.zeros(n_samples, dtype=complex)
    for start in range(0, len(table), _FID_CHUNK):
        sl = slice(start, start + _FID_CHUNK)
        fid += np.exp(1j * np.outer(times, table.omega[sl])) @ amplitudes[sl]
    return fid
