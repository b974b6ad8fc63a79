"""
截断 Lévy 过程的复合 Poisson 模拟
|h| > ε 的跳按速率 λ(ε) 到达，跳长由限制后的 Lévy 测度的径向逆分布函数抽取，方向在球面上均匀；
可选地用协方差 σ²(ε)/N·I 的布朗运动替代被丢弃的小跳
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..finite_chain_core.paths import PathSample, SeedLike, make_rng
from .model import LevyModel, LevyModelError
from .quadrature import small_jump_error, tail_mass

logger = logging.getLogger(__name__)

# 径向逆分布函数表的节点数
RADIAL_TABLE_KNOTS = 4096

# 补偿布朗运动的缺省时间步数
DIFFUSION_STEPS = 200


@dataclass(frozen=True)
class TruncationPolicy:
    """小跳截断策略"""

    epsilon: float
    compensate: bool = False
    diffusion_steps: int = DIFFUSION_STEPS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise LevyModelError(f"截断半径必须为正，实际 ε={self.epsilon}")
        if self.diffusion_steps < 1:
            raise LevyModelError("扩散步数必须 ≥ 1")

    def halved(self) -> "TruncationPolicy":
        return TruncationPolicy(self.epsilon / 2.0, self.compensate, self.diffusion_steps)


class JumpSizeSampler:
    """限制在 |h| > ε 上的归一化 Lévy 测度的抽样器"""

    def __init__(self, model: LevyModel, epsilon: float, knots: int = RADIAL_TABLE_KNOTS):
        """
        Args:
            model: Lévy 模型
            epsilon: 截断半径
            knots: 径向表节点数（仅一般径向密度使用）
        """
        self.model = model
        self.epsilon = float(epsilon)
        self.rate = tail_mass(model, epsilon)
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise LevyModelError(f"λ(ε)={self.rate} 不是正的有限数，ε={epsilon} 过大")
        self._inverse = None if model.is_stable else self._build_table(knots)

    def _build_table(self, knots: int) -> PchipInterpolator:
        """尾部概率 P(R > r) 的对数对 log r 的单调插值，取反函数"""
        eps = self.epsilon
        upper = eps
        # 外边界取到尾部概率低于 1e-14
        while self.model.radial_integral(0.0, upper, math.inf) / self.rate > 1e-14:
            upper *= 10.0
            if upper > eps * 1e30:
                raise LevyModelError(f"{self.model.name}: 径向尾部衰减过慢，无法建表")
        radii = np.geomspace(eps, upper, knots)
        log_tail = np.empty(knots)
        log_tail[-1] = math.log(max(self.model.radial_integral(0.0, radii[-1], math.inf), 1e-300))
        for i in range(knots - 2, -1, -1):
            piece = self.model.radial_integral(0.0, radii[i], radii[i + 1])
            log_tail[i] = np.logaddexp(log_tail[i + 1], math.log(max(piece, 1e-300)))
        level = log_tail[0] - log_tail
        keep = np.concatenate([[True], np.diff(level) > 0])
        return PchipInterpolator(level[keep], np.log(radii)[keep], extrapolate=True)

    def radii(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """径向长度 |h|"""
        u = rng.random(count)
        u = np.where(u == 0.0, np.finfo(float).tiny, u)
        if self.model.is_stable:
            return self.epsilon * u ** (-1.0 / self.model.alpha)
        return np.exp(self._inverse(-np.log(u)))

    def directions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """球面上的均匀方向"""
        if self.model.dim == 1:
            return np.where(rng.random(count) < 0.5, -1.0, 1.0)[:, None]
        g = rng.standard_normal((count, self.model.dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """count 个跳 h，形状 (count, N)"""
        return self.radii(rng, count)[:, None] * self.directions(rng, count)


def sample_levy_path(model: LevyModel, x0: Any, T: float, policy: TruncationPolicy,
                     seed: SeedLike, grid: Optional[Sequence[float]] = None,
                     sampler: Optional[JumpSizeSampler] = None) -> PathSample:
    """
    模拟一条截断 Lévy 路径

    Args:
        model: Lévy 模型
        x0: 起点
        T: 观察期
        policy: 截断策略
        seed: 种子或生成器
        grid: 评估网格
        sampler: 复用的跳长抽样器（批量模拟时避免重复建表）

    Returns:
        PathSample（ζ = +∞）
    """
    rng = make_rng(seed)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.dim,):
        raise LevyModelError(f"起点维数应为 {model.dim}，实际形状 {x0.shape}")
    sampler = sampler or JumpSizeSampler(model, policy.epsilon)

    count = int(rng.poisson(sampler.rate * T))
    times = np.sort(rng.uniform(0.0, T, count))
    keep = np.concatenate([[True], np.diff(times) > 0]) if count else np.zeros(0, dtype=bool)
    times = times[keep]
    jumps = sampler.sample(rng, times.size).reshape(times.size, model.dim)
    positions = x0[None, :] + np.cumsum(jumps, axis=0)

    grid_arr = np.linspace(0.0, T, 11) if grid is None else np.asarray(grid, dtype=float)
    diffusion_times = diffusion_values = None
    if policy.compensate:
        variance = small_jump_error(model, policy.epsilon) / model.dim
        diffusion_times = np.unique(np.concatenate([
            np.linspace(0.0, T, policy.diffusion_steps + 1), times, grid_arr]))
        steps = rng.standard_normal((diffusion_times.size - 1, model.dim)) \
            * np.sqrt(variance * np.diff(diffusion_times))[:, None]
        diffusion_values = np.vstack([np.zeros((1, model.dim)), np.cumsum(steps, axis=0)])
        at_jumps = np.searchsorted(diffusion_times, times)
        positions = positions + diffusion_values[at_jumps]

    return PathSample(x0=x0, event_times=times, event_states=positions, horizon=float(T),
                      grid=grid_arr, jumps=jumps, diffusion_times=diffusion_times,
                      diffusion_values=diffusion_values)


def sample_jump_ensemble(model: LevyModel, T: float, epsilon: float, n_paths: int,
                         seed: SeedLike, sampler: Optional[JumpSizeSampler] = None) -> tuple:
    """
    批量抽取 n_paths 条截断路径上的全部跳（不组装 PathSample，不含补偿）

    Args:
        model: Lévy 模型
        T: 观察期
        epsilon: 截断半径
        n_paths: 路径数
        seed: 种子或生成器
        sampler: 复用的跳长抽样器

    Returns:
        (owner, h)：owner[i] 为第 i 个跳所属路径，h 形状 (总跳数, N)，同一路径内按时间顺序排列
    """
    rng = make_rng(seed)
    sampler = sampler or JumpSizeSampler(model, epsilon)
    counts = rng.poisson(sampler.rate * T, size=n_paths)
    owner = np.repeat(np.arange(n_paths), counts)
    return owner, sampler.sample(rng, int(counts.sum()))


def ensemble_pre_states(x0: Any, owner: np.ndarray, h: np.ndarray) -> np.ndarray:
    """各跳之前的位置 X_{s−}：同一路径内跳的累积和，起点为 x0"""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if owner.size == 0:
        return np.zeros((0, x0.size))
    total = np.cumsum(h, axis=0)
    first = np.concatenate([[True], owner[1:] != owner[:-1]])
    group_start = np.maximum.accumulate(np.where(first, np.arange(owner.size), 0))
    offset = total[group_start] - h[group_start]
    return x0[None, :] + total - h - offset
