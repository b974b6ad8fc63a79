"""
Lévy 核求积
特征指数、截断尾部质量、小跳方差以及一般跳检验函数的核积分 ∫ψ(x,x+h)ν(dh)
"""

import logging
import math
from typing import Any, Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma as gamma_fn
from scipy.special import jv

from .model import (
    QUAD_RTOL,
    KernelDivergenceError,
    LevyModel,
    LevyModelError,
    QuadratureError,
    checked_quad,
)

logger = logging.getLogger(__name__)

# 球面节点数（N=2 为圆周等分数；N=3 为 cosθ 的 Gauss 点数 × 方位角等分数）
CIRCLE_NODES = 64
SPHERE_NODES = (24, 48)

# 0 附近可积性检测的半径
PROBE_RADII = (1e-3, 1e-4, 1e-5, 1e-6)

JumpTest = Callable[[np.ndarray, np.ndarray], np.ndarray]


def tail_mass(model: LevyModel, epsilon: float) -> float:
    """λ(ε) = ν({|h| > ε})"""
    if epsilon <= 0:
        raise LevyModelError(f"截断半径必须为正，实际 ε={epsilon}")
    return model.radial_integral(0.0, epsilon, math.inf)


def small_jump_error(model: LevyModel, epsilon: float) -> float:
    """
    σ²(ε) = ∫_{|h|<ε} |h|² ν(dh)；α-稳定模型为闭式 |S^{N−1}|·A·ε^{2−α}/(2−α)

    Args:
        model: Lévy 模型
        epsilon: 截断半径

    Returns:
        被丢弃小跳的方差
    """
    if epsilon <= 0:
        raise LevyModelError(f"截断半径必须为正，实际 ε={epsilon}")
    return model.radial_integral(2.0, 0.0, epsilon)


def spherical_cos_average(dim: int, k: Any) -> np.ndarray:
    """单位球面上 cos⟨ξ,θ⟩ 的平均值，|ξ| = k：Γ(N/2)(2/k)^{N/2−1}J_{N/2−1}(k)"""
    k = np.asarray(k, dtype=float)
    if dim == 1:
        return np.cos(k)
    nu = dim / 2.0 - 1.0
    safe = np.where(k == 0, 1.0, k)
    value = gamma_fn(dim / 2.0) * (2.0 / safe) ** nu * jv(nu, safe)
    return np.where(k == 0, 1.0, value)


def char_exponent(model: LevyModel, xi: Any, method: Optional[str] = None,
                  epsilon: float = 0.0, rtol: float = QUAD_RTOL) -> float:
    """
    特征指数 ψ(ξ) = ∫(1 − cos⟨ξ,h⟩) ν(dh)

    Args:
        model: Lévy 模型
        xi: 频率向量（或标量）
        method: "closed"（仅 α-稳定且 ε=0）或 "quadrature"；缺省自动选择
        epsilon: 只积分 |h| > ε 的部分，得到截断过程的指数 ψ_ε
        rtol: 相对容差

    Returns:
        ψ(ξ)
    """
    k = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
    if k == 0.0:
        return 0.0
    if method is None:
        method = "closed" if model.is_stable and epsilon == 0.0 else "quadrature"
    if method == "closed":
        if not model.is_stable or epsilon != 0.0:
            raise LevyModelError("闭式特征指数只适用于未截断的 α-稳定模型")
        return k ** model.alpha

    def radial(r: float) -> float:
        return float((1.0 - spherical_cos_average(model.dim, k * r)) * model.density(r)) \
            * r ** (model.dim - 1)

    # 近端：[ε, R] 上直接积分，按振荡周期加断点
    R = max(1.0, 40.0 * math.pi / k)
    lo = float(epsilon)
    if lo >= R:
        R = lo
        near = 0.0
    else:
        period = 2.0 * math.pi / k
        points = [p for p in np.arange(period, R, period)[:100] if p > lo]
        near = checked_quad(radial, lo, R, rtol=rtol, atol=1e-13, points=points or None,
                            limit=max(200, 4 * len(points)), what=f"{model.name} 特征指数")

    # 远端：∫_R^∞ f r^{N−1} dr − ∫_R^∞ cos 平均 · f r^{N−1} dr
    far_mass = model.radial_integral(0.0, R, math.inf) / model.sphere
    if model.dim == 1:
        far_cos = checked_quad(lambda r: float(model.density(r)), R, math.inf, weight="cos",
                               wvar=k, rtol=rtol, atol=1e-13, what=f"{model.name} 特征指数尾部")
    else:
        far_cos = _oscillatory_tail(
            lambda r: float(spherical_cos_average(model.dim, k * r) * model.density(r)) * r ** (model.dim - 1),
            R, math.pi / k, rtol, scale=abs(near) + far_mass)
    return model.sphere * (near + far_mass - far_cos)


def _oscillatory_tail(func: Callable[[float], float], start: float, half_period: float,
                      rtol: float, scale: float = 1.0, max_intervals: int = 20000) -> float:
    """按半周期分段累加振荡尾部积分，直到相邻两段之和足够小"""
    total = 0.0
    a = start
    previous = math.inf
    for _ in range(max_intervals):
        piece = checked_quad(func, a, a + half_period, rtol=rtol, atol=1e-16, what="振荡尾部")
        total += piece
        a += half_period
        if abs(piece + previous) < 1e-2 * rtol * max(abs(total), scale):
            return total
        previous = piece
    raise QuadratureError("振荡尾部在最大分段数内未收敛", abs(previous) / max(abs(total), 1e-300))


def sphere_nodes(dim: int) -> tuple:
    """
    球面求积节点与权重（权重和为 1）

    Returns:
        (directions (K, N), weights (K,))
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if dim == 2:
        theta = 2.0 * math.pi * np.arange(CIRCLE_NODES) / CIRCLE_NODES
        return np.column_stack([np.cos(theta), np.sin(theta)]), np.full(CIRCLE_NODES, 1.0 / CIRCLE_NODES)
    if dim == 3:
        n_polar, n_azimuth = SPHERE_NODES
        z, wz = leggauss(n_polar)
        phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - zz ** 2)
        directions = np.column_stack([(rho * np.cos(pp)).ravel(), (rho * np.sin(pp)).ravel(), zz.ravel()])
        weights = (wz[:, None] / 2.0 / n_azimuth * np.ones_like(pp)).ravel()
        return directions, weights
    raise LevyModelError(f"核积分只支持 N ≤ 3，实际 N={dim}")


def kernel_integral(model: LevyModel, psi: JumpTest, x: Any, epsilon: float = 0.0,
                    points: Optional[Sequence[float]] = None, rtol: float = QUAD_RTOL) -> float:
    """
    Nψ(x) = ∫_{|h|>ε} ψ(x, x+h) ν(dh)，径向自适应求积配合球面节点

    Args:
        model: Lévy 模型
        psi: 跳检验函数 ψ(x, y)，x、y 形状为 (K, N)
        x: 起点
        epsilon: 内截断半径；为 0 时先做 0 附近可积性检测
        points: 径向断点（例如指示函数的间断半径）
        rtol: 相对容差

    Returns:
        积分值
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise LevyModelError(f"起点维数应为 {model.dim}，实际形状 {x.shape}")
    directions, weights = sphere_nodes(model.dim)
    base = np.repeat(x[None, :], directions.shape[0], axis=0)

    def spherical(r: float) -> float:
        return float(weights @ np.asarray(psi(base, base + r * directions), dtype=float))

    def radial(r: float) -> float:
        return spherical(r) * float(model.density(r)) * r ** (model.dim - 1)

    if epsilon == 0.0:
        _check_origin(radial)

    breaks = sorted({float(p) for p in (points or []) if p > epsilon} | {max(1.0, 2.0 * epsilon)})
    edges = [float(epsilon)] + breaks + [math.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        total += checked_quad(radial, a, b, rtol=rtol, atol=1e-13, what=f"{model.name} 核积分")
    return model.sphere * total


def _check_origin(radial: Callable[[float], float]):
    """r·g(r) 必须随 r → 0 衰减，否则 ∫_0 g dr 发散"""
    scaled = [abs(r * radial(r)) for r in PROBE_RADII]
    if max(scaled) == 0.0:
        return
    if scaled[-1] >= scaled[0] and scaled[-1] > 1e-12:
        raise KernelDivergenceError(
            f"核积分在 0 附近发散：r·g(r) 在 r={PROBE_RADII[0]}..{PROBE_RADII[-1]} 上不衰减 {scaled}"
        )
