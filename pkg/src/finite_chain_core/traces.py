"""
加法泛函轨迹
AFTrace 在路径断点上记录右连续值与左极限；相邻断点之间只有绝对连续增量，
链上被积函数分段常数，因而轨迹在断点之间是线性的
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import pandas as pd

from .jumps import JumpFunction, kernel_apply
from .model import ChainModel
from .paths import PathSample

logger = logging.getLogger(__name__)

TRACE_KINDS = ("martingale", "zero-energy", "bracket", "dirichlet", "raw-sum")


class TraceMismatchError(Exception):
    """轨迹不属于同一路径或类型不符"""
    pass


@dataclass(frozen=True, eq=False)
class AFTrace:
    """沿一条路径求值的加法泛函"""

    times: np.ndarray
    values: np.ndarray
    left_limits: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise TraceMismatchError(f"未知轨迹类型: {self.kind}")
        if not (self.times.shape == self.values.shape == self.left_limits.shape):
            raise TraceMismatchError("times、values、left_limits 长度不一致")
        if self.values.size and (self.values[0] != 0.0 or self.left_limits[0] != 0.0):
            raise TraceMismatchError("加法泛函在 0 时刻必须为 0")

    # ---- 构造 ----

    @classmethod
    def from_parts(cls, times: np.ndarray, jumps: np.ndarray, increments: np.ndarray,
                   kind: str) -> "AFTrace":
        """
        由断点处的跳与区间增量累加得到轨迹

        Args:
            times: 断点，times[0]=0
            jumps: 各断点处的跳（jumps[0] 必须为 0）
            increments: 各区间 [t_i, t_{i+1}) 上的连续增量
            kind: 轨迹类型
        """
        jumps = np.asarray(jumps, dtype=float)
        increments = np.asarray(increments, dtype=float)
        if jumps[0] != 0.0:
            raise TraceMismatchError("0 时刻不允许跳")
        values = np.concatenate([[0.0], np.cumsum(increments + jumps[1:])])
        left_limits = np.concatenate([[0.0], values[:-1] + increments])
        return cls(np.asarray(times, dtype=float), values, left_limits, kind)

    @classmethod
    def zeros(cls, times: np.ndarray, kind: str = "raw-sum") -> "AFTrace":
        return cls(np.asarray(times, dtype=float), np.zeros(len(times)), np.zeros(len(times)), kind)

    # ---- 查询 ----

    @property
    def jumps(self) -> np.ndarray:
        return self.values - self.left_limits

    @property
    def increments(self) -> np.ndarray:
        return self.left_limits[1:] - self.values[:-1]

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def value_at(self, t: Any) -> np.ndarray:
        """断点之间线性插值的右连续值"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1)
        nxt = np.minimum(idx + 1, self.times.size - 1)
        width = self.times[nxt] - self.times[idx]
        frac = np.divide(t - self.times[idx], width, out=np.zeros_like(t), where=width > 0)
        return self.values[idx] + frac * (self.left_limits[nxt] - self.values[idx]) * (nxt > idx)

    def check_compatible(self, other: "AFTrace"):
        if self.times.shape != other.times.shape or not np.array_equal(self.times, other.times):
            raise TraceMismatchError("两条轨迹的断点不一致（不属于同一路径）")

    def sup_distance(self, other: "AFTrace") -> float:
        """断点处值与左极限的最大差"""
        self.check_compatible(other)
        return float(max(np.max(np.abs(self.values - other.values), initial=0.0),
                         np.max(np.abs(self.left_limits - other.left_limits), initial=0.0)))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.values), initial=0.0),
                         np.max(np.abs(self.left_limits), initial=0.0)))

    def total_variation(self) -> float:
        """Σ|跳| + Σ|区间增量|；区间内单调时即轨迹的全变差"""
        return float(np.sum(np.abs(self.jumps)) + np.sum(np.abs(self.increments)))

    # ---- 运算 ----

    def weighted(self, jump_weights: np.ndarray, segment_weights: np.ndarray,
                 kind: str = "raw-sum") -> "AFTrace":
        """∫ w dA：断点处的跳乘 jump_weights，区间增量乘 segment_weights"""
        return AFTrace.from_parts(self.times, self.jumps * jump_weights,
                                  self.increments * segment_weights, kind)

    def with_kind(self, kind: str) -> "AFTrace":
        return AFTrace(self.times, self.values, self.left_limits, kind)

    def _combine(self, other: "AFTrace", sign: float) -> "AFTrace":
        self.check_compatible(other)
        kind = self.kind if self.kind == other.kind else "raw-sum"
        return AFTrace(self.times, self.values + sign * other.values,
                       self.left_limits + sign * other.left_limits, kind)

    def __add__(self, other: "AFTrace") -> "AFTrace":
        return self._combine(other, 1.0)

    def __sub__(self, other: "AFTrace") -> "AFTrace":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "AFTrace":
        return AFTrace(self.times, c * self.values, c * self.left_limits, self.kind)

    __rmul__ = __mul__

    def __neg__(self) -> "AFTrace":
        return self * -1.0

    # ---- 导出 ----

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "value": self.values, "left_limit": self.left_limits})

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def jump_trace(path: PathSample, jump_values: np.ndarray, kind: str = "raw-sum") -> AFTrace:
    """
    纯跳轨迹 Σ_{s≤t} c_s

    Args:
        path: 路径
        jump_values: 与 path.jump_pairs() 对齐的跳值
        kind: 轨迹类型
    """
    times = path.breakpoints
    jumps = np.zeros(times.size)
    idx = np.searchsorted(times, path.jump_times())
    np.add.at(jumps, idx, np.asarray(jump_values, dtype=float))
    return AFTrace.from_parts(times, jumps, np.zeros(times.size - 1), kind)


def rate_trace(path: PathSample, rates: np.ndarray, kind: str = "zero-energy") -> AFTrace:
    """
    连续轨迹 ∫_0^t g(X_s) ds，rates 为各断点区间上的 g 值

    Args:
        path: 路径
        rates: 长度为断点区间数的数组
        kind: 轨迹类型
    """
    times = path.breakpoints
    return AFTrace.from_parts(times, np.zeros(times.size), np.asarray(rates) * np.diff(times), kind)


def density_trace(path: PathSample, density: Any, kind: str = "zero-energy") -> AFTrace:
    """∫_0^t g(X_s) ds，g 为状态函数（∂ 上取 0）"""
    return rate_trace(path, path.function_values(density, path.segment_states()), kind)


def jump_sum_trace(phi: JumpFunction, path: PathSample, kind: str = "raw-sum") -> AFTrace:
    """Σ_{s≤t} φ(X_{s−}, X_s)，含杀死跳"""
    pre, post = path.jump_pairs()
    return jump_trace(path, phi.evaluate(pre, post), kind)


def increment_trace(u: Any, path: PathSample, kind: str = "raw-sum") -> AFTrace:
    """
    u(X_t) − u(X_0)

    断点处的跳为 u(X_t) − u(X_{t−})，区间增量为 u(X_{t_{i+1}−}) − u(X_{t_i})；
    链路径上区间增量为 0，带补偿的 Lévy 路径上区间增量来自布朗部分
    """
    times = path.breakpoints
    after = path.function_values(u, path.state_at(times))
    before = path.function_values(u, path.state_before(times))
    return AFTrace.from_parts(times, after - before, before[1:] - after[:-1], kind)


def maf_trace(model: ChainModel, phi: JumpFunction, path: PathSample,
              ell: Optional[float] = None) -> AFTrace:
    """
    纯间断鞅加法泛函 M_t = Σ_{s≤t} φ_ℓ(X_{s−},X_s) − ∫_0^t N(φ_ℓ)(X_s) ds

    Args:
        model: 链模型
        phi: 跳函数
        path: 同一模型的路径
        ell: 截断水平，None 表示不截断

    Returns:
        martingale 类型的轨迹
    """
    phi_l = phi.truncate(ell)
    jumps = jump_sum_trace(phi_l, path)
    compensator = density_trace(path, kernel_apply(model, phi_l))
    return (jumps - compensator).with_kind("martingale")
