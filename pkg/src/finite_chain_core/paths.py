"""
样本路径模块
PathSample 保存一条右连续左极限轨道：初始状态、跳跃事件、寿命 ζ 与观察期；
链路径由竞争指数时钟精确模拟
"""

import logging
import math
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .model import CEMETERY, ChainModel, ChainModelError, FunctionDomainError

logger = logging.getLogger(__name__)

# 缺省评估网格点数
DEFAULT_GRID_POINTS = 11

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


class PathError(Exception):
    """路径构造或拼接错误"""
    pass


def make_rng(seed: SeedLike) -> np.random.Generator:
    """由整数种子、SeedSequence 或现成生成器得到 Philox 计数器型生成器"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def stream_seed(root: int, stream: str, index: int = 0) -> np.random.SeedSequence:
    """
    命名随机流：同一根种子下，不同流名互不干扰

    Args:
        root: 根种子
        stream: 流名（通常为检查名）
        index: 流内序号

    Returns:
        SeedSequence
    """
    return np.random.SeedSequence(int(root), spawn_key=(zlib.crc32(stream.encode("utf-8")), int(index)))


@dataclass(frozen=True, eq=False)
class PathSample:
    """一条样本路径；链路径状态为整数编码，Lévy 路径状态为 R^N 中的点"""

    x0: Any
    event_times: np.ndarray
    event_states: np.ndarray
    horizon: float
    zeta: float = math.inf
    killed: bool = False
    grid: Optional[np.ndarray] = None
    jumps: Optional[np.ndarray] = None
    diffusion_times: Optional[np.ndarray] = None
    diffusion_values: Optional[np.ndarray] = None
    n_states: Optional[int] = None

    def __post_init__(self):
        times = np.asarray(self.event_times, dtype=float)
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "event_states", np.asarray(self.event_states))
        if self.grid is None:
            object.__setattr__(self, "grid", np.linspace(0.0, self.horizon, DEFAULT_GRID_POINTS))
        else:
            object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))

        if self.horizon <= 0:
            raise PathError(f"观察期必须为正，实际 T={self.horizon}")
        if times.size and np.any(np.diff(times) <= 0):
            raise PathError("事件时间必须严格递增")
        if times.size and times[-1] >= min(self.zeta, self.horizon):
            raise PathError("事件时间必须小于 min(ζ, T)")
        if self.killed and not self.zeta <= self.horizon:
            raise PathError(f"被杀死的路径要求 ζ ≤ T，实际 ζ={self.zeta}")
        if not self.killed and math.isfinite(self.zeta):
            raise PathError("未被杀死的路径 ζ 必须为 +∞")

    # ---- 基本属性 ----

    @property
    def is_chain(self) -> bool:
        return self.jumps is None

    @property
    def n_events(self) -> int:
        return int(self.event_times.size)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """0、T、评估网格、事件时间、ζ 与扩散网格的并集"""
        parts = [np.array([0.0, self.horizon]), self.grid, self.event_times]
        if self.killed:
            parts.append(np.array([self.zeta]))
        if self.diffusion_times is not None:
            parts.append(self.diffusion_times)
        times = np.unique(np.concatenate(parts))
        return times[(times >= 0.0) & (times <= self.horizon)]

    def jump_times(self) -> np.ndarray:
        """所有跳跃时刻；被杀死的链路径包含 ζ"""
        if self.killed:
            return np.append(self.event_times, self.zeta)
        return self.event_times

    def jump_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        每次跳跃的 (X_{s−}, X_s)

        Returns:
            (pre, post)；链路径中杀死跳的 post 为 CEMETERY
        """
        if self.is_chain:
            states = self.event_states.astype(int)
            pre = np.concatenate([[int(self.x0)], states[:-1]]) if states.size else states
            post = states
            if self.killed:
                last = int(states[-1]) if states.size else int(self.x0)
                pre = np.append(pre, last)
                post = np.append(post, CEMETERY)
            return pre.astype(int), post.astype(int)
        post = self.event_states
        return post - self.jumps, post

    # ---- 状态查询 ----

    def _diffusion_at(self, t: np.ndarray) -> np.ndarray:
        dim = np.asarray(self.x0).shape[0]
        if self.diffusion_times is None:
            return np.zeros((t.size, dim))
        return np.column_stack([
            np.interp(t, self.diffusion_times, self.diffusion_values[:, d]) for d in range(dim)
        ])

    def _states_from_index(self, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
        if self.is_chain:
            table = np.concatenate([[int(self.x0)], self.event_states.astype(int)])
            return table[idx]
        x0 = np.asarray(self.x0, dtype=float)
        cumulative = np.vstack([np.zeros_like(x0), np.cumsum(self.jumps, axis=0)]) \
            if self.n_events else np.zeros((1, x0.shape[0]))
        return x0[None, :] + cumulative[idx] + self._diffusion_at(t)

    def state_at(self, t: Any) -> np.ndarray:
        """右连续状态 X_t；t ≥ ζ 时为 ∂"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.event_times, t, side="right")
        states = self._states_from_index(idx, t)
        if self.killed:
            states = np.where(t >= self.zeta, CEMETERY, states)
        return states

    def state_before(self, t: Any) -> np.ndarray:
        """左极限 X_{t−}；t > ζ 时为 ∂"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.event_times, t, side="left")
        states = self._states_from_index(idx, t)
        if self.killed:
            states = np.where(t > self.zeta, CEMETERY, states)
        return states

    def segment_states(self) -> np.ndarray:
        """各断点区间 [t_i, t_{i+1}) 上的状态"""
        return self.state_at(self.breakpoints[:-1])

    def _extended(self, f: Any) -> np.ndarray:
        arr = np.asarray(f, dtype=float)
        if self.n_states is None:
            raise PathError("Lévy 路径上的状态函数必须是可调用对象")
        if arr.shape == (self.n_states,):
            return np.append(arr, 0.0)
        if arr.shape == (self.n_states + 1,):
            return arr
        raise FunctionDomainError(f"状态函数长度应为 {self.n_states} 或 {self.n_states + 1}，实际形状 {arr.shape}")

    def function_values(self, f: Any, states: Any) -> np.ndarray:
        """
        在给定状态上求状态函数的值

        链上 f 为长度 n（f(∂)=0）或 n+1（末位为 f(∂)）的向量；Lévy 上 f 为可调用对象
        """
        if callable(f):
            return np.asarray(f(np.asarray(states)), dtype=float)
        return self._extended(f)[np.asarray(states, dtype=int)]

    def cemetery_value(self, f: Any) -> float:
        """f(∂)；Lévy 路径没有墓地，返回 0"""
        if callable(f) or self.n_states is None:
            return 0.0
        return float(self._extended(f)[-1])

    # ---- 路径变换 ----

    def splice(self, other: "PathSample") -> "PathSample":
        """
        在 T 处接上从 X_T 出发的另一条链路径，得到 [0, T+T'] 上的路径

        Args:
            other: 从 self.state_at(T) 出发的路径

        Returns:
            拼接后的 PathSample
        """
        if not (self.is_chain and other.is_chain):
            raise PathError("只有链路径支持拼接")
        if self.killed:
            raise PathError("被杀死的路径不能再拼接")
        end_state = int(self.state_at(self.horizon)[0])
        if int(other.x0) != end_state:
            raise PathError(f"拼接点状态不一致: {end_state} != {other.x0}")
        shift = self.horizon
        return PathSample(
            x0=self.x0,
            event_times=np.concatenate([self.event_times, shift + other.event_times]),
            event_states=np.concatenate([self.event_states, other.event_states]).astype(int),
            horizon=shift + other.horizon,
            zeta=shift + other.zeta if other.killed else math.inf,
            killed=other.killed,
            grid=np.unique(np.concatenate([self.grid, shift + other.grid])),
            n_states=self.n_states,
        )

    def reversed(self, t: Optional[float] = None) -> "PathSample":
        """
        时间反转 s ↦ X_{(t−s)−}（仅限未杀死的链路径）

        Args:
            t: 反转时刻，缺省为 T

        Returns:
            [0, t] 上的反转路径
        """
        if not self.is_chain or self.killed:
            raise PathError("时间反转只适用于未被杀死的链路径")
        t = self.horizon if t is None else float(t)
        mask = self.event_times < t
        times = self.event_times[mask]
        states = self.event_states[mask].astype(int)
        pre = np.concatenate([[int(self.x0)], states[:-1]]) if states.size else states
        x_end = int(states[-1]) if states.size else int(self.x0)
        return PathSample(
            x0=x_end,
            event_times=(t - times)[::-1],
            event_states=pre[::-1],
            horizon=t,
            grid=np.unique(t - self.grid[self.grid <= t]),
            n_states=self.n_states,
        )

    # ---- 导出 ----

    def to_frame(self) -> pd.DataFrame:
        """事件日志：链为 (t, state)，Lévy 为 (t, h_1..h_N)"""
        if self.is_chain:
            states = self.event_states.astype(int)
            if self.killed:
                states = np.append(states, CEMETERY)
            return pd.DataFrame({"t": self.jump_times(), "state": states})
        columns = {"t": self.event_times}
        for d in range(self.jumps.shape[1]):
            columns[f"h_{d + 1}"] = self.jumps[:, d]
        return pd.DataFrame(columns)

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def simulate_chain_path(model: ChainModel, x0: int, T: float, seed: SeedLike,
                        grid: Optional[Sequence[float]] = None) -> PathSample:
    """
    竞争指数时钟精确模拟

    在 x 处停留 Exp(Σ_y q(x,y)+k(x))，以 q(x,y) 的比例跳到 y，以 k(x) 的比例跳到 ∂

    Args:
        model: 链模型
        x0: 初始状态
        T: 观察期
        seed: 种子或生成器
        grid: 评估网格，缺省为 [0, T] 上 11 个等距点

    Returns:
        PathSample
    """
    if not 0 <= int(x0) < model.n:
        raise ChainModelError(f"初始状态 {x0} 不在 0..{model.n - 1} 中")
    if T <= 0:
        raise PathError(f"观察期必须为正，实际 T={T}")
    rng = make_rng(seed)
    rates = model.total_rates
    cumulative = np.cumsum(np.hstack([model.q, model.k[:, None]]), axis=1)

    t = 0.0
    x = int(x0)
    times: List[float] = []
    states: List[int] = []
    zeta = math.inf
    killed = False
    while rates[x] > 0:
        t += rng.exponential(1.0 / rates[x])
        if t >= T:
            break
        target = int(np.searchsorted(cumulative[x], rng.random() * rates[x], side="right"))
        target = min(target, model.n)
        if target == model.n:
            zeta, killed = t, True
            break
        times.append(t)
        states.append(target)
        x = target

    return PathSample(x0=int(x0), event_times=np.array(times),
                      event_states=np.array(states, dtype=int), horizon=float(T),
                      zeta=zeta, killed=killed, grid=grid, n_states=model.n)


def simulate_chain_paths(model: ChainModel, starts: Sequence[int], T: float,
                         seed: SeedLike, grid: Optional[Sequence[float]] = None) -> List[PathSample]:
    """用同一个生成器依次模拟多条路径"""
    rng = make_rng(seed)
    return [simulate_chain_path(model, x0, T, rng, grid=grid) for x0 in starts]


def stationary_starts(model: ChainModel, count: int, seed: SeedLike) -> np.ndarray:
    """按 m/|m| 抽取初始状态"""
    rng = make_rng(seed)
    return rng.choice(model.n, size=count, p=model.m / model.m.sum())
