"""
跳函数模块
φ 定义在 E_∂×E_∂ 上：body 为 E×E 部分，boundary 为 φ(x,∂)，约定 φ(∂,·)=0
"""

from typing import Any, Optional

import numpy as np

from .model import ChainModel, ChainModelError


class JumpFunction:
    """纯间断鞅加法泛函的坐标：跳函数 φ"""

    def __init__(self, body: Any, boundary: Optional[Any] = None):
        """
        Args:
            body: n×n 矩阵 φ(x,y)，对角线必须为 0
            boundary: 长度 n 的向量 φ(x,∂)，缺省为 0
        """
        body_arr = np.array(body, dtype=float)
        if body_arr.ndim != 2 or body_arr.shape[0] != body_arr.shape[1]:
            raise ChainModelError(f"跳函数 body 必须是方阵，实际形状 {body_arr.shape}")
        n = body_arr.shape[0]
        boundary_arr = np.zeros(n) if boundary is None else np.array(boundary, dtype=float)
        if boundary_arr.shape != (n,):
            raise ChainModelError(f"跳函数 boundary 长度应为 {n}，实际形状 {boundary_arr.shape}")
        if np.any(np.diag(body_arr) != 0):
            raise ChainModelError("跳函数在对角线上必须为 0")

        self.body = body_arr
        self.boundary = boundary_arr
        self.body.setflags(write=False)
        self.boundary.setflags(write=False)
        self._full: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.body.shape[0]

    # ---- 构造 ----

    @classmethod
    def zeros(cls, n: int) -> "JumpFunction":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_function(cls, u: Any) -> "JumpFunction":
        """φ_u(x,y)=u(y)−u(x)，φ_u(x,∂)=−u(x)"""
        u = np.asarray(u, dtype=float)
        return cls(u[None, :] - u[:, None], -u)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator,
               with_boundary: bool = True) -> "JumpFunction":
        body = rng.normal(size=(n, n))
        np.fill_diagonal(body, 0.0)
        boundary = rng.normal(size=n) if with_boundary else None
        return cls(body, boundary)

    # ---- 变换 ----

    def full(self) -> np.ndarray:
        """(n+1)×(n+1) 矩阵，末行末列对应 ∂，∂ 行为 0"""
        if self._full is None:
            out = np.zeros((self.n + 1, self.n + 1))
            out[:-1, :-1] = self.body
            out[:-1, -1] = self.boundary
            out.setflags(write=False)
            self._full = out
        return self._full

    def evaluate(self, pre: Any, post: Any) -> np.ndarray:
        """按状态编码（∂ 为 -1）逐对取值 φ(pre, post)"""
        return self.full()[np.asarray(pre, dtype=int), np.asarray(post, dtype=int)]

    def transpose(self) -> "JumpFunction":
        """φ̄(x,y)=φ(y,x)；φ̄(x,∂)=φ(∂,x)=0"""
        return JumpFunction(self.body.T)

    def truncate(self, ell: Optional[float]) -> "JumpFunction":
        """φ_ℓ：|φ| ≤ 1/ℓ 处置零；ell 为 None 时原样返回"""
        if ell is None:
            return self
        cut = 1.0 / float(ell)
        return JumpFunction(np.where(np.abs(self.body) > cut, self.body, 0.0),
                            np.where(np.abs(self.boundary) > cut, self.boundary, 0.0))

    def interior(self) -> "JumpFunction":
        """1_{E×E}φ"""
        return JumpFunction(self.body)

    def reversal_kernel(self) -> "JumpFunction":
        """ψ_K = −1_{E×E}(φ+φ̄)"""
        return JumpFunction(-(self.body + self.body.T))

    def antisymmetrized(self) -> "JumpFunction":
        """Ā 的跳函数：E×E 上 ½(φ−φ̄)，边界列保持 φ(x,∂)"""
        return JumpFunction(0.5 * (self.body - self.body.T), self.boundary)

    def weighted(self, f: Any) -> "JumpFunction":
        """(f∗M) 的跳函数 f(x)φ(x,y)"""
        f = np.asarray(f, dtype=float)[: self.n]
        return JumpFunction(f[:, None] * self.body, f * self.boundary)

    def product(self, other: "JumpFunction") -> "JumpFunction":
        """逐点乘积 φψ"""
        return JumpFunction(self.body * other.body, self.boundary * other.boundary)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.body), initial=0.0),
                         np.max(np.abs(self.boundary), initial=0.0)))

    def __add__(self, other: "JumpFunction") -> "JumpFunction":
        return JumpFunction(self.body + other.body, self.boundary + other.boundary)

    def __sub__(self, other: "JumpFunction") -> "JumpFunction":
        return JumpFunction(self.body - other.body, self.boundary - other.boundary)

    def __mul__(self, c: float) -> "JumpFunction":
        return JumpFunction(c * self.body, c * self.boundary)

    __rmul__ = __mul__

    def __neg__(self) -> "JumpFunction":
        return self * -1.0

    def __repr__(self) -> str:
        return f"JumpFunction(n={self.n}, max|φ|={self.max_abs():.3g})"


def kernel_apply(model: ChainModel, phi: JumpFunction) -> np.ndarray:
    """
    Lévy 核作用 N(φ)(x) = Σ_y q(x,y)φ(x,y) + k(x)φ(x,∂)

    Args:
        model: 链模型
        phi: 跳函数

    Returns:
        长度 n 的向量
    """
    if phi.n != model.n:
        raise ChainModelError(f"跳函数维数 {phi.n} 与模型状态数 {model.n} 不一致")
    return (model.q * phi.body).sum(axis=1) + model.k * phi.boundary
