"""
Dirichlet 形式线性代数
由链模型构造 E、E1、J、κ 与生成元 L，并计算括号测度与能量
"""

import logging
from typing import Any, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .jumps import JumpFunction
from .model import ChainModel, ChainModelError

logger = logging.getLogger(__name__)

# E1 条件数告警阈值
COND_LIMIT = 1e12


class GammaSolveError(ChainModelError):
    """E1 线性求解失败"""

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message}（条件数 {condition_number:.3e}）")
        self.condition_number = condition_number


class FormMatrices:
    """有限链上的纯跳 Dirichlet 形式（无强局部部分）"""

    def __init__(self, model: ChainModel, E: np.ndarray, J: np.ndarray,
                 kappa: np.ndarray, L: np.ndarray, cond_limit: float = COND_LIMIT):
        self.model = model
        self.E = E
        self.E1 = E + np.diag(model.m)
        self.J = J
        self.kappa = kappa
        self.L = L
        for arr in (self.E, self.E1, self.J, self.kappa, self.L):
            arr.setflags(write=False)

        self.condition_number = float(np.linalg.cond(self.E1))
        if self.condition_number > cond_limit:
            logger.warning(f"{model.name}: E1 条件数 {self.condition_number:.3e} 超过 {cond_limit:.0e}")
        try:
            self._factor = cho_factor(self.E1)
        except LinAlgError as e:
            raise GammaSolveError(f"{model.name}: E1 不是正定矩阵", self.condition_number) from e

    def bilinear(self, u: Any, v: Any) -> float:
        """E(u, v)"""
        return float(np.asarray(u, dtype=float) @ self.E @ np.asarray(v, dtype=float))

    def solve_e1(self, b: np.ndarray) -> np.ndarray:
        """解 E1 w = b（Cholesky 分解在构造时完成）"""
        return cho_solve(self._factor, b)


def build_form(model: ChainModel, cond_limit: float = COND_LIMIT) -> FormMatrices:
    """
    构造 Dirichlet 形式矩阵

    E 由 J 的对称化得到：E = diag(ΣJ 行 + ΣJ 列) − J − Jᵀ + diag(κ)，
    因而在非严格模式下也保持对称

    Args:
        model: 链模型（严格模式下已通过细致平衡校验）
        cond_limit: 条件数告警阈值

    Returns:
        FormMatrices
    """
    if model.strict:
        violations = model.balance_violations()
        if violations:
            raise ChainModelError(f"{model.name}: 细致平衡不成立 {violations[:5]}")

    J = 0.5 * model.m[:, None] * model.q
    kappa = model.m * model.k
    E = np.diag(J.sum(axis=1) + J.sum(axis=0)) - J - J.T + np.diag(kappa)
    L = model.q - np.diag(model.q.sum(axis=1) + model.k)

    logger.debug(f"{model.name}: 构造 Dirichlet 形式，n={model.n}")
    return FormMatrices(model, E, J, kappa, L, cond_limit=cond_limit)


def generator_apply(form: FormMatrices, u: Any) -> np.ndarray:
    """(Lu)(x) = Σ_y q(x,y)(u(y)−u(x)) − k(x)u(x)"""
    u = np.asarray(u, dtype=float)
    if u.shape != (form.model.n,):
        raise ChainModelError(f"函数长度应为 {form.model.n}，实际形状 {u.shape}")
    return form.L @ u


def bracket_measure(model: ChainModel, phi: JumpFunction,
                    psi: Optional[JumpFunction] = None) -> np.ndarray:
    """
    ⟨M_φ, M_ψ⟩ 的 Revuz 测度

    x ↦ m(x)[Σ_y φ(x,y)ψ(x,y)q(x,y) + φ(x,∂)ψ(x,∂)k(x)]

    Args:
        model: 链模型
        phi: 跳函数 φ
        psi: 跳函数 ψ，缺省取 φ

    Returns:
        长度 n 的测度向量
    """
    psi = phi if psi is None else psi
    density = (model.q * phi.body * psi.body).sum(axis=1) + model.k * phi.boundary * psi.boundary
    return model.m * density


def mutual_energy(model: ChainModel, phi: JumpFunction, psi: JumpFunction) -> float:
    """e(M_φ, M_ψ) = ½ μ_{⟨M_φ,M_ψ⟩}(E)"""
    return 0.5 * float(bracket_measure(model, phi, psi).sum())


def energy(model: ChainModel, phi: JumpFunction) -> float:
    """e(M_φ) = ½ μ_{⟨M_φ⟩}(E)"""
    return mutual_energy(model, phi, phi)


def truncation_energy_gap(model: ChainModel, phi: JumpFunction, ell: float) -> float:
    """e(M_φ − M_{φ_ℓ})：只由 |φ| ≤ 1/ℓ 的小跳贡献"""
    return energy(model, phi - phi.truncate(ell))
