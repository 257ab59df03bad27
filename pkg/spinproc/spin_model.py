"""
自旋模型
集群构造、久期偶极哈密顿量、集体自旋算符、本征系统与允许跃迁表

基矢约定：自旋 0 是 Kronecker 积中最高位的因子，比特 0 表示自旋向上，
因此基矢 b 的总磁量子数 M = N/2 - popcount(b)。
"""
import math
from functools import lru_cache, reduce
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .config import config
from .errors import ClusterError
from .logger import get_logger
from .models import TWO_PI, EigenSystem, SpinCluster, SpinOperatorSet, TransitionTable
from .specs import ClusterSpec, GeneratorName

logger = get_logger("spin_model")

_SINGLE = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
    "y": np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex),
    "z": np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex),
}


# ========== 基矢工具 ==========

def spin_bits(n_spins: int) -> np.ndarray:
    """(2^N, N) 数组，元素为 1 表示该自旋向下"""
    index = np.arange(2 ** n_spins)
    shifts = n_spins - 1 - np.arange(n_spins)
    return (index[:, None] >> shifts[None, :]) & 1


def magnetization_numbers(n_spins: int) -> np.ndarray:
    return n_spins / 2.0 - spin_bits(n_spins).sum(axis=1)


def _flip_mask(n_spins: int, *spins: int) -> int:
    mask = 0
    for i in spins:
        mask |= 1 << (n_spins - 1 - i)
    return mask


# ========== 集群构造 ==========

def make_cluster(offsets: Sequence[float], couplings: Optional[Sequence[Sequence[float]]] = None) -> SpinCluster:
    """由 rad/s 单位的偏移与耦合矩阵构造集群"""
    n = len(offsets)
    if couplings is None:
        couplings = [[0.0] * n for _ in range(n)]
    try:
        return SpinCluster(
            n_spins=n,
            offsets=tuple(float(v) for v in offsets),
            couplings=tuple(tuple(float(v) for v in row) for row in couplings),
        )
    except ValidationError as e:
        raise ClusterError(f"集群无效: {e}") from e


def _check_generator(n_spins: int, **positive: float) -> None:
    if n_spins < 1:
        raise ClusterError(f"n_spins 必须 >= 1: {n_spins}")
    for name, value in positive.items():
        if not value > 0.0:
            raise ClusterError(f"生成器参数 {name} 必须为正: {value}")


def chain(n_spins: int, coupling: float, offsets: Optional[Sequence[float]] = None) -> SpinCluster:
    """最近邻耦合的线性链"""
    _check_generator(n_spins, coupling=coupling)
    d = np.zeros((n_spins, n_spins))
    for i in range(n_spins - 1):
        d[i, i + 1] = d[i + 1, i] = coupling
    return make_cluster(offsets if offsets is not None else [0.0] * n_spins, d.tolist())


def all_to_all(n_spins: int, coupling: float, offsets: Optional[Sequence[float]] = None) -> SpinCluster:
    """所有自旋对等强耦合"""
    _check_generator(n_spins, coupling=coupling)
    d = np.full((n_spins, n_spins), float(coupling))
    np.fill_diagonal(d, 0.0)
    return make_cluster(offsets if offsets is not None else [0.0] * n_spins, d.tolist())


def random_geometric(
    n_spins: int,
    seed: int,
    coupling_scale: float = TWO_PI * 400.0,
    offset_spread: float = TWO_PI * 150.0,
    min_distance: float = 0.5,
) -> SpinCluster:
    """
    随机几何集群
    自旋随机放置在边长 N^(1/3) 的立方体内（最小间距 min_distance），
    d_ij ∝ (1 - 3cos²θ) / (2 r³)，θ 为连线与 z 轴夹角，最大 |d| 归一到 coupling_scale；
    偏移在 ±offset_spread 内均匀分布
    """
    _check_generator(
        n_spins, coupling_scale=coupling_scale, offset_spread=offset_spread, min_distance=min_distance
    )
    rng = np.random.default_rng(seed)
    side = max(1.0, n_spins ** (1.0 / 3.0))

    positions: list = []
    attempts = 0
    while len(positions) < n_spins:
        attempts += 1
        if attempts > 100_000:
            raise ClusterError(f"无法以最小间距 {min_distance} 放置 {n_spins} 个自旋")
        p = rng.uniform(0.0, side, size=3)
        if all(np.linalg.norm(p - q) >= min_distance for q in positions):
            positions.append(p)
    pos = np.array(positions)

    d = np.zeros((n_spins, n_spins))
    for i in range(n_spins):
        for j in range(i + 1, n_spins):
            r_vec = pos[j] - pos[i]
            r = float(np.linalg.norm(r_vec))
            cos_theta = r_vec[2] / r
            d[i, j] = d[j, i] = (1.0 - 3.0 * cos_theta ** 2) / (2.0 * r ** 3)
    peak = np.abs(d).max(initial=0.0)
    if peak > 0.0:
        d *= coupling_scale / peak

    offsets = rng.uniform(-offset_spread, offset_spread, size=n_spins)
    return make_cluster(offsets.tolist(), d.tolist())


def build_cluster(spec: ClusterSpec) -> SpinCluster:
    """按描述构造集群；外部单位 Hz，内部 rad/s"""
    frame = TWO_PI * spec.frame_offset_hz

    if spec.generator is None:
        offsets = [TWO_PI * f + frame for f in spec.offsets_hz or []]
        couplings = (
            [[TWO_PI * v for v in row] for row in spec.couplings_hz]
            if spec.couplings_hz is not None
            else None
        )
        if couplings is not None and len(couplings) != len(offsets):
            raise ClusterError(f"couplings_hz 行数 {len(couplings)} != 自旋数 {len(offsets)}")
        return make_cluster(offsets, couplings)

    n = int(spec.n_spins or 0)
    params = dict(spec.params)
    try:
        if spec.generator == GeneratorName.RANDOM_GEOMETRIC:
            cluster = random_geometric(
                n,
                seed=int(spec.seed),  # type: ignore[arg-type]
                coupling_scale=TWO_PI * float(params.get("coupling_scale_hz", 400.0)),
                offset_spread=TWO_PI * float(params.get("offset_spread_hz", 150.0)),
                min_distance=float(params.get("min_distance", 0.5)),
            )
        else:
            coupling = TWO_PI * float(params.get("coupling_hz", 100.0))
            raw = params.get("offsets_hz")
            offsets_rad = [TWO_PI * float(v) for v in raw] if raw is not None else None
            factory = chain if spec.generator == GeneratorName.CHAIN else all_to_all
            cluster = factory(n, coupling, offsets_rad)
    except ClusterError:
        raise
    except (TypeError, ValueError) as e:
        raise ClusterError(f"生成器参数无效: {params}: {e}") from e

    if frame != 0.0:
        cluster = make_cluster([v + frame for v in cluster.offsets], cluster.couplings)
    logger.debug("cluster_built", generator=spec.generator.value, n_spins=n, seed=spec.seed)
    return cluster


# ========== 算符 ==========

def single_spin_operator(n_spins: int, i: int, axis: str) -> np.ndarray:
    """第 i 个自旋的 I_axis，嵌入 2^N 维空间"""
    if not 0 <= i < n_spins:
        raise ClusterError(f"自旋序号 {i} 超出 [0, {n_spins})")
    factors = [_SINGLE[axis] if k == i else np.eye(2) for k in range(n_spins)]
    return reduce(np.kron, factors)


@lru_cache(maxsize=16)
def spin_operators(n_spins: int) -> SpinOperatorSet:
    """集体算符 S_x, S_y, S_z 与 S_+"""
    dim = 2 ** n_spins
    bits = spin_bits(n_spins)
    index = np.arange(dim)

    s_plus = np.zeros((dim, dim))
    for i in range(n_spins):
        down = index[bits[:, i] == 1]
        s_plus[down ^ _flip_mask(n_spins, i), down] = 1.0

    s_x = 0.5 * (s_plus + s_plus.T)
    s_y = (s_plus - s_plus.T) / 2j
    s_z = np.diag(magnetization_numbers(n_spins))
    return SpinOperatorSet(n_spins=n_spins, s_x=s_x, s_y=s_y, s_z=s_z, s_plus=s_plus)


def internal_hamiltonian(cluster: SpinCluster) -> np.ndarray:
    """
    H = Σ δ_i I_z^i + Σ_{i<j} d_ij (2 I_z^i I_z^j - I_x^i I_x^j - I_y^i I_y^j)
    直接在积基下按比特构造，结果为实对称矩阵 (rad/s)
    """
    n = cluster.n_spins
    dim = cluster.dimension
    bits = spin_bits(n)
    z = 0.5 - bits
    index = np.arange(dim)
    d = cluster.coupling_matrix

    h = np.zeros((dim, dim))
    diag = z @ cluster.offset_array
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] == 0.0:
                continue
            diag = diag + 2.0 * d[i, j] * z[:, i] * z[:, j]
            # 翻转-翻转项 -(d/2)(I+I- + I-I+)
            src = index[bits[:, i] != bits[:, j]]
            h[src ^ _flip_mask(n, i, j), src] += -0.5 * d[i, j]
    h[index, index] = diag
    return h


# ========== 本征系统 ==========

def eigensystem(h: np.ndarray) -> EigenSystem:
    """
    按 S_z 子空间分块对角化，合并后按本征值升序排列（同值按 M 升序）
    若 H 不守恒 S_z，则退回整体对角化并以 ⟨i|S_z|i⟩ 取最近的半整数作为 M
    """
    dim = h.shape[0]
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if dim < 2 or 2 ** n != dim or h.shape != (dim, dim):
        raise ClusterError(f"哈密顿量维度不是 2^N: {h.shape}")

    m = magnetization_numbers(n)
    scale = max(float(np.abs(h).max()), 1.0)
    leak = float(np.abs(h[m[:, None] != m[None, :]]).max(initial=0.0))

    if leak > 1e-12 * scale:
        logger.warning("sz_not_conserved", leak=leak)
        values, vectors = np.linalg.eigh(h)
        expect = (np.abs(vectors) ** 2).T @ m
        mags = np.round(2.0 * expect) / 2.0
    else:
        values = np.empty(dim)
        vectors = np.zeros((dim, dim), dtype=h.dtype)
        mags = np.empty(dim)
        col = 0
        for value in np.unique(m):
            idx = np.flatnonzero(m == value)
            w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
            k = idx.size
            values[col:col + k] = w
            vectors[idx, col:col + k] = v
            mags[col:col + k] = value
            col += k

    order = np.lexsort((mags, values))
    values, vectors, mags = values[order], vectors[:, order], mags[order]

    spread = float(values[-1] - values[0])
    eps = config.get_config().freq_epsilon_rel * spread
    degenerate = bool(np.any(np.diff(values) <= eps))
    if degenerate:
        logger.warning("degenerate_eigenvalues", n_spins=n, epsilon=eps)
    return EigenSystem(eigenvalues=values, eigenvectors=vectors, magnetization=mags, degenerate=degenerate)


def transition_table(es: EigenSystem, ops: SpinOperatorSet) -> TransitionTable:
    """|⟨i|S_x|j⟩|² > weight_epsilon 且 M_i - M_j = 1 的全部跃迁，按频率升序"""
    cfg = config.get_config()
    v = es.eigenvectors
    sx = v.conj().T @ ops.s_x @ v
    weight = np.abs(sx) ** 2
    dm = es.magnetization[:, None] - es.magnetization[None, :]
    mask = (np.abs(dm - 1.0) < 0.25) & (weight > cfg.weight_epsilon)
    i, j = np.nonzero(mask)
    omega = es.eigenvalues[i] - es.eigenvalues[j]

    order = np.lexsort((j, i, omega))
    i, j, omega = i[order], j[order], omega[order]

    omega_loc = float(omega.max() - omega.min()) if omega.size else 0.0
    eps = cfg.freq_epsilon_rel * omega_loc
    degenerate = bool(omega.size > 1 and np.any(np.diff(omega) <= eps))
    if degenerate:
        logger.warning("degenerate_transitions", count=int(omega.size), epsilon=eps)

    return TransitionTable(
        i=i, j=j, omega=omega, weight=weight[i, j], element=sx[i, j], degenerate_flag=degenerate
    )


def transition_bound(n_spins: int) -> int:
    """ΔM = 1 跃迁数上限 C(2N, N+1)"""
    return math.comb(2 * n_spins, n_spins + 1)


# ========== 缓存包 ==========

class SpinSystem:
    """
    集群的计算包：算符、H_int、本征系统与跃迁表
    传播子按步长缓存本征基下的自由演化算符
    """

    def __init__(self, hamiltonian: np.ndarray, cluster: Optional[SpinCluster] = None):
        self.hamiltonian = hamiltonian
        self.cluster = cluster
        self.eigen = eigensystem(hamiltonian)
        self.n_spins = int(round(math.log2(hamiltonian.shape[0])))
        self.operators = spin_operators(self.n_spins)
        self.transitions = transition_table(self.eigen, self.operators)
        self._free_cache: Dict[float, np.ndarray] = {}

    @classmethod
    def from_cluster(cls, cluster: SpinCluster) -> "SpinSystem":
        return cls(internal_hamiltonian(cluster), cluster)

    @property
    def dimension(self) -> int:
        return int(self.hamiltonian.shape[0])

    @property
    def omega_loc(self) -> float:
        return self.transitions.omega_loc

    @property
    def spectral_norm(self) -> float:
        """‖H_int‖₂ = max |ε|"""
        return float(np.abs(self.eigen.eigenvalues).max())

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        v = self.eigen.eigenvectors
        return v.conj().T @ matrix @ v

    def from_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        v = self.eigen.eigenvectors
        return v @ matrix @ v.conj().T

    def free_propagator(self, t: float) -> np.ndarray:
        """exp(-i H_int t)"""
        cached = self._free_cache.get(t)
        if cached is None:
            v = self.eigen.eigenvectors
            cached = (v * np.exp(-1j * self.eigen.eigenvalues * t)) @ v.conj().T
            if len(self._free_cache) >= 8:
                self._free_cache.clear()
            self._free_cache[t] = cached
        return cached

    def __repr__(self) -> str:
        return f"SpinSystem(n_spins={self.n_spins}, transitions={len(self.transitions)})"


@lru_cache(maxsize=8)
def spin_system(cluster: SpinCluster) -> SpinSystem:
    """同一集群只对角化一次"""
    system = SpinSystem.from_cluster(cluster)
    logger.info(
        "spin_system_ready",
        n_spins=cluster.n_spins,
        transitions=len(system.transitions),
        omega_loc_hz=system.omega_loc / TWO_PI,
        degenerate=system.transitions.degenerate_flag,
    )
    return system
