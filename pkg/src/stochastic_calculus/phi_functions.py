"""
Itô 公式中的 Φ ∈ C²(R^K)
注册表给出值、梯度与 Hessian，并提供中心差分核对与跳修正项 C_t 的计算
"""

import logging
from typing import Any, Callable, Dict, List, Sequence

import numpy as np

from ..finite_chain_core.paths import PathSample
from ..finite_chain_core.traces import AFTrace

logger = logging.getLogger(__name__)

# exp_clipped 的截断点
EXP_CLIP = 30.0

CORRECTION_WEIGHTS = ("midpoint", "left")


class PhiFunction:
    """Φ: R^K → R 及其一阶、二阶导数；输入形状 (S, K)"""

    def __init__(self, name: str, arity: int, value: Callable, gradient: Callable,
                 hessian: Callable):
        self.name = name
        self.arity = arity
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def _check(self, y: Any) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        y = y[:, None] if y.ndim == 1 else y
        if self.arity and y.shape[1] != self.arity:
            raise ValueError(f"Φ={self.name} 需要 {self.arity} 个分量，实际 {y.shape[1]}")
        return y

    def value(self, y: Any) -> np.ndarray:
        return np.asarray(self._value(self._check(y)), dtype=float)

    def gradient(self, y: Any) -> np.ndarray:
        return np.asarray(self._gradient(self._check(y)), dtype=float)

    def hessian(self, y: Any) -> np.ndarray:
        return np.asarray(self._hessian(self._check(y)), dtype=float)

    def __repr__(self) -> str:
        return f"PhiFunction({self.name})"


def _diagonal(second: Callable) -> Callable:
    def hessian(y):
        out = np.zeros(y.shape + (y.shape[1],))
        idx = np.arange(y.shape[1])
        out[:, idx, idx] = second(y)
        return out
    return hessian


def _clipped_exp(y):
    return np.exp(np.minimum(y, EXP_CLIP))


PHI_REGISTRY: Dict[str, PhiFunction] = {
    "x": PhiFunction("x", 0, lambda y: y.sum(axis=1), np.ones_like,
                     _diagonal(np.zeros_like)),
    "x2": PhiFunction("x2", 0, lambda y: (y ** 2).sum(axis=1), lambda y: 2.0 * y,
                      _diagonal(lambda y: np.full_like(y, 2.0))),
    "x3": PhiFunction("x3", 0, lambda y: (y ** 3).sum(axis=1), lambda y: 3.0 * y ** 2,
                      _diagonal(lambda y: 6.0 * y)),
    "exp_clipped": PhiFunction("exp_clipped", 0, lambda y: (_clipped_exp(y) - 1.0).sum(axis=1),
                               _clipped_exp, _diagonal(_clipped_exp)),
    "product": PhiFunction("product", 2, lambda y: y[:, 0] * y[:, 1],
                           lambda y: y[:, ::-1].copy(),
                           lambda y: np.broadcast_to(np.array([[0.0, 1.0], [1.0, 0.0]]),
                                                     (y.shape[0], 2, 2)).copy()),
}


def get_phi(name: str) -> PhiFunction:
    """按名称取 Φ"""
    if name not in PHI_REGISTRY:
        raise KeyError(f"未知 Φ: {name}，可选 {sorted(PHI_REGISTRY)}")
    return PHI_REGISTRY[name]


def derivative_check(phi: PhiFunction, points: Any, step: float = 1e-5) -> float:
    """
    用中心差分核对梯度与 Hessian

    Args:
        phi: 被检查的 Φ
        points: (S, K) 检查点
        step: 差分步长

    Returns:
        最大相对误差（分母取 max(1, |解析值|)）
    """
    y = np.atleast_2d(np.asarray(points, dtype=float))
    K = y.shape[1]
    grad = phi.gradient(y)
    hess = phi.hessian(y)
    worst = 0.0
    for k in range(K):
        shift = np.zeros(K)
        shift[k] = step
        fd_grad = (phi.value(y + shift) - phi.value(y - shift)) / (2.0 * step)
        fd_hess = (phi.gradient(y + shift) - phi.gradient(y - shift)) / (2.0 * step)
        worst = max(worst,
                    float(np.max(np.abs(fd_grad - grad[:, k]) / np.maximum(1.0, np.abs(grad[:, k])))),
                    float(np.max(np.abs(fd_hess - hess[:, :, k]) / np.maximum(1.0, np.abs(hess[:, :, k])))))
    return worst


def stack_functions(us: Sequence[Any], path: PathSample, states: np.ndarray) -> np.ndarray:
    """u = (u_1..u_K) 在给定状态上的值，形状 (S, K)"""
    return np.column_stack([path.function_values(u, states) for u in us])


def jump_correction_trace(phi: PhiFunction, us: List[Any], path: PathSample,
                          weight: str = "midpoint") -> AFTrace:
    """
    Itô 公式中的跳修正项

    weight="midpoint"：C_t = Σ_{s≤t}[ΔΦ(u) − Σ_k ½(Φ_k(u(X_s))+Φ_k(u(X_{s−})))Δu_k]；
    weight="left"：Σ_{s≤t}[ΔΦ(u) − Σ_k Φ_k(u(X_{s−}))Δu_k]

    Args:
        phi: Φ
        us: 状态函数列表（链上 ∂ 处取各自的扩展值）
        path: 路径
        weight: midpoint 或 left

    Returns:
        raw-sum 类型的纯跳轨迹
    """
    if weight not in CORRECTION_WEIGHTS:
        raise ValueError(f"未知修正权: {weight}，可选 {CORRECTION_WEIGHTS}")
    times = path.breakpoints
    after = stack_functions(us, path, path.state_at(times))
    before = stack_functions(us, path, path.state_before(times))
    d_phi = phi.value(after) - phi.value(before)
    du = after - before
    if weight == "midpoint":
        slope = 0.5 * (phi.gradient(after) + phi.gradient(before))
    else:
        slope = phi.gradient(before)
    jumps = d_phi - (slope * du).sum(axis=1)
    return AFTrace.from_parts(times, jumps, np.zeros(times.size - 1), "raw-sum")
