"""
截断跳和 Σ* 与 Dirichlet 过程的跳表示
Σ* 由阈值水平 ℓ_k = 2^k 上的截断和逐级逼近，连续 w 级的变化都不超过 δ_stab 时判定稳定；
不收敛如实报告，不静默接受
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple, Union

import numpy as np

from ..finite_chain_core.jumps import JumpFunction
from ..finite_chain_core.paths import PathSample
from ..finite_chain_core.traces import AFTrace, jump_trace
from ..levy_models.model import LevyModel
from ..levy_models.quadrature import small_jump_error

logger = logging.getLogger(__name__)

STARRED_WEIGHTS = ("left", "midpoint", "none")
KILLING_WEIGHTS = ("left", "midpoint")

JumpMap = Union[JumpFunction, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class TruncationSchedule:
    """阈值水平 ℓ_k = 2^k（k = k_min..k_max）与稳定判据"""

    k_min: int = 0
    k_max: int = 30
    tolerance: float = 1e-8
    window: int = 2
    threshold: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.k_max < self.k_min:
            raise ValueError(f"k_max={self.k_max} 小于 k_min={self.k_min}")
        if not self.tolerance > 0:
            raise ValueError(f"δ_stab 必须为正，实际 {self.tolerance}")
        if self.window < 1:
            raise ValueError("窗口长度必须 ≥ 1")

    @property
    def levels(self) -> List[float]:
        return [2.0 ** k for k in range(self.k_min, self.k_max + 1)]

    @classmethod
    def for_chain(cls, phi: JumpFunction, **kwargs: Any) -> "TruncationSchedule":
        """k_min 取使 2^k > max 1/|φ|（非零元素上）的最小整数，首级即包含全部跳"""
        values = np.abs(phi.full())
        nonzero = values[values > 0]
        if nonzero.size == 0:
            return cls(**kwargs)
        k_min = math.floor(math.log2(1.0 / float(nonzero.min()))) + 1
        kwargs.setdefault("k_max", k_min + 10)
        return cls(k_min=k_min, **kwargs)

    @classmethod
    def for_levy(cls, model: LevyModel, epsilon: float, f_sup: float, jump_count: int,
                 **kwargs: Any) -> "TruncationSchedule":
        """δ_stab = max(1e−8, 3σ(ε)‖f‖_∞√(跳数))"""
        sigma = math.sqrt(small_jump_error(model, epsilon))
        tolerance = max(1e-8, 3.0 * sigma * f_sup * math.sqrt(max(jump_count, 1)))
        return cls(tolerance=tolerance, **kwargs)


@dataclass
class ConvergenceReport:
    """逐级 sup 范数变化与稳定判定"""

    levels: List[float] = field(default_factory=list)
    deltas: List[float] = field(default_factory=list)
    converged: bool = False
    first_stable_level: Optional[float] = None
    tolerance: float = math.nan

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "deltas": self.deltas,
            "converged": self.converged,
            "first_stable_level": self.first_stable_level,
            "tolerance": self.tolerance,
        }

    def rows(self) -> List[dict]:
        """从首级到首个稳定级（不收敛时为全部级）的表格行"""
        stop = len(self.levels)
        if self.first_stable_level is not None:
            stop = self.levels.index(self.first_stable_level) + 1
        return [{"level": self.levels[i], "delta": self.deltas[i],
                 "stable": self.first_stable_level is not None and i == stop - 1}
                for i in range(stop)]


def _evaluate(phi: JumpMap, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if isinstance(phi, JumpFunction):
        return phi.evaluate(pre, post)
    return np.asarray(phi(pre, post), dtype=float)


def _jump_weights(weight: str, f: Any, path: PathSample, pre: np.ndarray,
                  post: np.ndarray) -> np.ndarray:
    if weight == "none" or f is None:
        return np.ones(len(pre))
    before = path.function_values(f, pre)
    if weight == "left":
        return before
    return 0.5 * (before + path.function_values(f, post))


def starred_sum(weight: str, f: Any, phi: JumpMap, path: PathSample,
                schedule: TruncationSchedule) -> Tuple[AFTrace, ConvergenceReport]:
    """
    Σ*_{s≤t} w(s)φ(X_{s−},X_s)

    对每个 ℓ_k 计算 Σ w(s)φ(X_{s−},X_s)1{|ψ(X_{s−},X_s)| > 1/ℓ_k}，ψ 缺省为 φ

    Args:
        weight: left（f(X_{s−})）、midpoint（½(f(X_s)+f(X_{s−}))）或 none
        f: 状态函数
        phi: 跳函数或 (pre, post) → 值 的可调用对象
        path: 路径
        schedule: 截断水平

    Returns:
        (首个稳定级的轨迹, 收敛报告)；不收敛时返回最后一级的轨迹
    """
    if weight not in STARRED_WEIGHTS:
        raise ValueError(f"未知权: {weight}，可选 {STARRED_WEIGHTS}")
    pre, post = path.jump_pairs()
    values = _evaluate(phi, pre, post) * _jump_weights(weight, f, path, pre, post)
    size = np.abs(_evaluate(phi, pre, post) if schedule.threshold is None
                  else np.asarray(schedule.threshold(pre, post), dtype=float))

    report = ConvergenceReport(tolerance=schedule.tolerance)
    traces: List[AFTrace] = []
    run = 0
    for level in schedule.levels:
        trace = jump_trace(path, np.where(size > 1.0 / level, values, 0.0))
        delta = math.inf if not traces else trace.sup_distance(traces[-1])
        traces.append(trace)
        report.levels.append(level)
        report.deltas.append(delta)
        run = run + 1 if delta <= schedule.tolerance else 0
        if run >= schedule.window:
            stable = len(traces) - 1 - schedule.window
            report.converged = True
            report.first_stable_level = report.levels[stable]
            return traces[stable], report
    logger.warning(f"Σ* 在 ℓ={report.levels[-1]:g} 内未稳定（δ_stab={schedule.tolerance:.3g}）")
    return traces[-1], report


def jump_representation(path: PathSample, phi: JumpMap, mode: str = "ito", f: Any = None,
                        Ac: Optional[AFTrace] = None,
                        schedule: Optional[TruncationSchedule] = None,
                        killing_weight: str = "left") -> Tuple[AFTrace, ConvergenceReport]:
    """
    Ā 的跳表示（加权形式）

    ∫f dĀ = ∫f dA^c + Σ* w(s)·½(φ−φ̄)(X_{s−},X_s)1_{E×E} + f(X_{ζ−})φ(X_{ζ−},∂)1{t ≥ ζ}，
    w 为 f(X_{s−})（ito）或 ½(f(X_s)+f(X_{s−}))（stratonovich）；
    killing_weight="midpoint" 时杀死项的权为 ½(f(X_{ζ−})+f(∂))

    Args:
        path: 路径
        phi: 链上为 JumpFunction；Lévy 上为已反对称化的 (pre, post) 可调用对象
        mode: ito 或 stratonovich
        f: 状态函数，缺省为 1
        Ac: 连续部分轨迹
        schedule: 截断水平，链上缺省按 φ 自动选取
        killing_weight: left 或 midpoint

    Returns:
        (dirichlet 类型的轨迹, 收敛报告)
    """
    if mode not in ("ito", "stratonovich"):
        raise ValueError(f"未知权模式: {mode}")
    if killing_weight not in KILLING_WEIGHTS:
        raise ValueError(f"未知杀死权: {killing_weight}，可选 {KILLING_WEIGHTS}")
    weight = "left" if mode == "ito" else "midpoint"
    if isinstance(phi, JumpFunction):
        interior = JumpFunction(phi.antisymmetrized().body)
        schedule = schedule or TruncationSchedule.for_chain(interior)
    else:
        interior = phi
        schedule = schedule or TruncationSchedule()

    trace, report = starred_sum(weight, f, interior, path, schedule)

    if path.killed and isinstance(phi, JumpFunction):
        last = path.state_before(path.zeta)
        kill_value = phi.boundary[last]
        if f is not None:
            f_last = path.function_values(f, last)
            kill_value = kill_value * (f_last if killing_weight == "left"
                                       else 0.5 * (f_last + path.cemetery_value(f)))
        kill = np.zeros(path.n_events + 1)
        kill[-1] = float(kill_value[0])
        trace = trace + jump_trace(path, kill)
    if Ac is not None:
        trace = trace + Ac
    return trace.with_kind("dirichlet"), report
