"""
激发区间分类
以能级间距估计 Δω = 2^(-2N)·ω_loc 为基准，把单谐波驱动幅度 Ω 归入五个区间
"""
import math
from typing import Any, Dict, List, Optional, Tuple

from scipy.special import comb

from .config import config
from .errors import ConfigError
from .models import RegimeLabel, RegimeReport

R = RegimeLabel

# 区间序号，交叉区取相邻两者之间
RANKS: Dict[Tuple[RegimeLabel, ...], float] = {
    (R.SINGLE_TRANSITION,): 1.0,
    (R.SINGLE_TRANSITION, R.INHOMOGENEOUS_ENSEMBLE): 1.5,
    (R.INHOMOGENEOUS_ENSEMBLE,): 2.0,
    (R.COLLECTIVE_COHERENT,): 3.0,
    (R.THERMODYNAMIC_SATURATION,): 4.0,
    (R.THERMODYNAMIC_SATURATION, R.HARD_PULSE): 4.5,
    (R.HARD_PULSE,): 5.0,
}


def spacing_estimate(n_spins: int, omega_loc: float) -> float:
    """Δω = 2^(-2N)·ω_loc"""
    if n_spins < 0:
        raise ConfigError(f"自旋数必须非负: {n_spins}")
    if not omega_loc > 0.0:
        raise ConfigError(f"ω_loc 必须为正: {omega_loc}")
    return math.ldexp(omega_loc, -2 * n_spins)


def regime_edges(n_spins: int, omega_loc: float, kappa: float) -> List[float]:
    t1 = spacing_estimate(n_spins, omega_loc)
    t2 = math.ldexp(t1, n_spins)
    t3 = omega_loc
    return [t1 / kappa, t1 * kappa, t2 / kappa, t2 * kappa, t3 / kappa, t3 * kappa]


def classify_regime(
    omega: float,
    n_spins: int,
    omega_loc: float,
    kappa: Optional[float] = None,
) -> RegimeReport:
    """
    t1 = Δω, t2 = 2^N·Δω, t3 = ω_loc
      Ω < t1/κ                 SingleTransition
      t1·κ ≤ Ω ≤ t2/κ          InhomogeneousEnsemble
      t2/κ < Ω < t2·κ          CollectiveCoherent
      t2·κ ≤ Ω ≤ t3/κ          ThermodynamicSaturation
      Ω > t3·κ                 HardPulse
    其余为相邻两区间的 Crossover。2^N < κ² 时区间 2 消失（几何退化）。
    """
    if kappa is None:
        kappa = config.get_config().default_kappa
    if kappa < 1.0:
        raise ConfigError(f"kappa 必须 >= 1: {kappa}")
    if not omega > 0.0:
        raise ConfigError(f"Ω 必须为正: {omega}")

    edges = regime_edges(n_spins, omega_loc, kappa)
    e1_lo, e1_hi, e2_lo, e2_hi, e3_lo, e3_hi = edges
    t1 = spacing_estimate(n_spins, omega_loc)
    thresholds = (t1, math.ldexp(t1, n_spins), omega_loc)

    diagnostic = None
    degenerate = 2.0 ** n_spins < kappa ** 2
    if degenerate:
        diagnostic = (
            f"N={n_spins} 过小：2^N < κ² = {kappa ** 2:g}，"
            "InhomogeneousEnsemble 区间不存在，相邻区间以 Crossover 相连"
        )
        if omega < e1_lo:
            key: Tuple[RegimeLabel, ...] = (R.SINGLE_TRANSITION,)
        elif omega <= e2_lo:
            key = (R.SINGLE_TRANSITION, R.INHOMOGENEOUS_ENSEMBLE)
        elif omega < e2_hi:
            key = (R.COLLECTIVE_COHERENT,)
        elif omega <= e3_hi:
            key = (R.THERMODYNAMIC_SATURATION, R.HARD_PULSE)
        else:
            key = (R.HARD_PULSE,)
    else:
        if omega < e1_lo:
            key = (R.SINGLE_TRANSITION,)
        elif omega < e1_hi:
            key = (R.SINGLE_TRANSITION, R.INHOMOGENEOUS_ENSEMBLE)
        elif omega <= e2_lo:
            key = (R.INHOMOGENEOUS_ENSEMBLE,)
        elif omega < e2_hi:
            key = (R.COLLECTIVE_COHERENT,)
        elif omega <= e3_lo:
            key = (R.THERMODYNAMIC_SATURATION,)
        elif omega <= e3_hi:
            key = (R.THERMODYNAMIC_SATURATION, R.HARD_PULSE)
        else:
            key = (R.HARD_PULSE,)

    margin = min(abs(math.log10(omega / e)) for e in edges)
    return RegimeReport(
        label=key[0] if len(key) == 1 else R.CROSSOVER,
        crossover=(key[0], key[1]) if len(key) == 2 else None,
        thresholds=thresholds,
        omega=omega,
        kappa=kappa,
        n_spins=n_spins,
        omega_loc=omega_loc,
        rank=RANKS[key],
        margin_decades=margin,
        diagnostic=diagnostic,
    )


def transition_density_check(n_spins: int) -> Dict[str, Any]:
    """允许跃迁数 C(2N, N+1) 与 2^(2N) 密度估计的对照"""
    allowed = int(comb(2 * n_spins, n_spins + 1, exact=True))
    estimate = 4 ** n_spins
    return {
        "n_spins": n_spins,
        "allowed_transitions": allowed,
        "density_estimate": estimate,
        "ratio": allowed / estimate,
    }
