"""
次随机半群与精确期望
P_t = exp(tL) 由 scipy 的 scaling-and-squaring 计算；跳和与补偿子的期望给出鞅性检验的精确预言
"""

import logging
from typing import Any, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm

from .jumps import JumpFunction, kernel_apply
from .model import ChainModel, ChainModelError

logger = logging.getLogger(__name__)


def generator_matrix(model: ChainModel) -> np.ndarray:
    """L = q − diag(Σ_y q + k)"""
    return model.q - np.diag(model.total_rates)


def transition_matrix(model: ChainModel, t: float) -> np.ndarray:
    """P_t = exp(tL)，行和 ≤ 1"""
    if t < 0:
        raise ChainModelError(f"时间必须非负，实际 t={t}")
    return expm(t * generator_matrix(model))


def semigroup_apply(model: ChainModel, t: float, F: Any) -> np.ndarray:
    """
    (P_t F)(x) = E_x[F(X_t); t < ζ]

    Args:
        model: 链模型
        t: 时间，t ≥ 0
        F: 状态函数

    Returns:
        长度 n 的向量
    """
    F = np.asarray(F, dtype=float)[: model.n]
    if t == 0:
        return F.copy()
    return transition_matrix(model, t) @ F


def integrated_semigroup_apply(model: ChainModel, t: float, F: Any,
                               nodes: Optional[int] = None) -> np.ndarray:
    """
    ∫_0^t P_s F ds

    nodes 为 None 时用分块矩阵指数 exp([[tL, tF],[0, 0]]) 的右上块精确计算；
    否则用 nodes 点 Gauss–Legendre 求积

    Args:
        model: 链模型
        t: 积分上限
        F: 状态函数
        nodes: 求积节点数

    Returns:
        长度 n 的向量
    """
    F = np.asarray(F, dtype=float)[: model.n]
    if t == 0:
        return np.zeros(model.n)
    L = generator_matrix(model)
    if nodes is None:
        n = model.n
        block = np.zeros((n + 1, n + 1))
        block[:n, :n] = t * L
        block[:n, n] = t * F
        return expm(block)[:n, n]

    x, w = leggauss(nodes)
    s = 0.5 * t * (x + 1.0)
    values = np.array([expm(si * L) @ F for si in s])
    return 0.5 * t * (w @ values)


def expected_compensator(model: ChainModel, phi: JumpFunction, t: float,
                         nodes: Optional[int] = None) -> np.ndarray:
    """E_x[∫_0^t N(φ)(X_s) ds] = ∫_0^t P_s N(φ) ds"""
    return integrated_semigroup_apply(model, t, kernel_apply(model, phi), nodes=nodes)


def expected_jump_sum(model: ChainModel, phi: JumpFunction, t: float) -> np.ndarray:
    """
    E_x[Σ_{0<s≤t} φ(X_{s−},X_s)]，含杀死跳 φ(X_{ζ−},∂)

    在 E_∂ 上取倾斜生成元 G_θ(x,y)=q(x,y)e^{θφ(x,y)}、G_θ(x,∂)=k(x)e^{θφ(x,∂)}，
    则 exp(tG_θ)1 是 exp(θ·跳和) 的期望；对 θ 在 0 处求导，
    导数 ∫_0^t e^{(t−s)G}G' e^{sG}ds 取自分块矩阵 exp(t[[G, G'],[0, G]]) 的右上块

    Args:
        model: 链模型
        phi: 跳函数
        t: 时间

    Returns:
        长度 n 的向量（各起点）
    """
    n = model.n
    G = np.zeros((n + 1, n + 1))
    G[:n, :n] = generator_matrix(model)
    G[:n, n] = model.k
    dG = np.zeros((n + 1, n + 1))
    dG[:n, :n] = model.q * phi.body
    dG[:n, n] = model.k * phi.boundary

    block = np.zeros((2 * (n + 1), 2 * (n + 1)))
    block[: n + 1, : n + 1] = G
    block[: n + 1, n + 1:] = dG
    block[n + 1:, n + 1:] = G
    derivative = expm(t * block)[: n + 1, n + 1:]
    return (derivative @ np.ones(n + 1))[:n]
